#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "strobosq/analytic.hpp"
#include "strobosq/csv.hpp"
#include "strobosq/dynamics.hpp"
#include "strobosq/errors.hpp"
#include "strobosq/rng.hpp"
#include "strobosq/spectral.hpp"

using namespace strobosq;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double gamma_total = 1000.0;
constexpr double larmor = 100.0 * gamma_total;
constexpr double duty = 0.08;

struct Setup {
    AtomLightModel model;
    StroboConfig strobo;
    TimeGrid grid;
};

Setup setup(double gt, double kappa_scale = 1.0) {
    Setup s;
    s.model = AtomLightModel::from_rates(gamma_total, 1.0, 0.1, duty, larmor);
    s.model.kappa *= kappa_scale;
    s.strobo = make_strobo(duty, larmor);
    s.grid = make_time_grid(s.strobo, larmor, gt / gamma_total);
    return s;
}

// Bins spaced by 2π/T around Ω; periodogram values there are nearly independent.
std::vector<double> independent_bins(const TimeGrid& g, int half) {
    std::vector<double> f;
    for (int k = -half; k <= half; ++k) {
        f.push_back(larmor + k * 2 * pi / g.total_time);
    }
    return f;
}

LightSpectrumInputs light_inputs(const Setup& s) {
    LightSpectrumInputs in;
    in.gamma_total = gamma_total;
    in.epsilon = 1.0;
    in.zeta2 = 0.1;
    in.duty = duty;
    in.time = s.grid.total_time;
    in.larmor = larmor;
    return in;
}

}  // namespace

TEST_CASE("frequency grid layout") {
    const auto f = frequency_grid(larmor, gamma_total);
    REQUIRE(f.size() == 401);
    CHECK(f.front() == doctest::Approx(larmor - 20 * gamma_total));
    CHECK(f.back() == doctest::Approx(larmor + 20 * gamma_total));
    CHECK(f[200] == larmor);
    for (std::size_t i = 1; i < f.size(); ++i) {
        CHECK(f[i] - f[i - 1] == doctest::Approx(0.1 * gamma_total));
    }
    FrequencyGridSpec spec;
    spec.sidebands = 2;
    const auto g = frequency_grid(larmor, gamma_total, spec);
    CHECK(g.size() == 3 * 401);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(std::find(g.begin(), g.end(), 5 * larmor) != g.end());
}

TEST_CASE("periodogram of one record equals the direct transform") {
    const auto s = setup(0.3);
    const auto rec = simulate_trajectory(s.model, s.strobo, s.grid, 17);
    const std::vector<double> freqs{0.0, 0.9 * larmor, larmor, larmor + 2.5 * gamma_total,
                                    3 * larmor};
    const auto est = estimate_spectrum(std::span(&rec, 1), s.strobo, s.grid, freqs);
    const double norm = duty * s.grid.total_time;
    for (std::size_t f = 0; f < freqs.size(); ++f) {
        std::complex<double> y = 0.0;
        for (std::int64_t j = 0; j < s.grid.n_steps; ++j) {
            if (s.grid.pulse_on(j)) {
                const double t = static_cast<double>(j) * s.grid.dt;
                y += rec.light_out[static_cast<std::size_t>(j)][1] *
                     std::polar(1.0, freqs[f] * t) * s.grid.dt;
            }
        }
        CAPTURE(freqs[f]);
        CHECK(est.s_est[f] == doctest::Approx(std::norm(y) / norm).epsilon(1e-9));
    }
    CHECK(est.n_ensemble == 1);
    CHECK_NOTHROW(est.validate());
}

TEST_CASE("spectrum integrates to the time-domain power") {
    // over a full band of N bins spaced 2π/(N dt), Σ S Δω/2π = Σ y² dt/(dT)
    const auto s = setup(0.05);
    const auto rec = simulate_trajectory(s.model, s.strobo, s.grid, 3);
    const auto n = s.grid.n_steps;
    std::vector<double> freqs(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
        freqs[static_cast<std::size_t>(k)] = 2 * pi * static_cast<double>(k) /
                                             (static_cast<double>(n) * s.grid.dt);
    }
    const auto est = estimate_spectrum(std::span(&rec, 1), s.strobo, s.grid, freqs);
    double band = 0.0;
    for (double v : est.s_est) {
        band += v / (static_cast<double>(n) * s.grid.dt);
    }
    double power = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        if (s.grid.pulse_on(j)) {
            const double y = rec.light_out[static_cast<std::size_t>(j)][1];
            power += y * y * s.grid.dt;
        }
    }
    power /= duty * s.grid.total_time;
    CHECK(band == doctest::Approx(power).epsilon(1e-2));
    CHECK(band == doctest::Approx(power).epsilon(1e-9));
}

TEST_CASE("stored and streamed ensembles give the same spectrum") {
    const auto s = setup(0.5);
    const auto freqs = frequency_grid(larmor, gamma_total);
    std::vector<TrajectoryRecord> recs;
    for (std::uint64_t k = 0; k < 64; ++k) {
        recs.push_back(simulate_trajectory(s.model, s.strobo, s.grid, trajectory_seed(8, k)));
    }
    const auto stored = estimate_spectrum(recs, s.strobo, s.grid, freqs);
    const auto streamed = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 64, 8);
    for (std::size_t f = 0; f < freqs.size(); ++f) {
        CHECK(stored.s_est[f] == doctest::Approx(streamed.s_est[f]).epsilon(1e-12));
    }
}

TEST_CASE("spectrum does not depend on the worker count") {
    const auto s = setup(0.5);
    const auto freqs = frequency_grid(larmor, gamma_total);
    const auto a = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 200, 1, {}, 1);
    const auto b = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 200, 1, {}, 8);
    CHECK(a.s_est == b.s_est);
    CHECK(a.stderr_est == b.stderr_est);
}

TEST_CASE("vacuum input gives a flat spectrum at one half") {
    const auto s = setup(1.0, 0.0);
    const auto freqs = frequency_grid(larmor, gamma_total);
    const auto est = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 2000, 4);
    int outliers = 0;
    double mean = 0.0;
    for (std::size_t f = 0; f < est.size(); ++f) {
        outliers += std::abs(est.s_est[f] - 0.5) > 5 * est.stderr_est[f];
        mean += est.s_est[f];
    }
    mean /= static_cast<double>(est.size());
    CHECK(outliers == 0);
    CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("estimator is unbiased on synthetic white noise") {
    // hand-built records: p_out with per-step variance L/dt has spectrum L
    const auto s = setup(0.2);
    const double level = 0.8;
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> normal(0.0, std::sqrt(level / s.grid.dt));
    std::vector<TrajectoryRecord> recs(400);
    const auto n = static_cast<std::size_t>(s.grid.n_steps);
    for (auto& r : recs) {
        r.times.resize(n);
        r.atom.assign(n, {0.0, 0.0});
        r.light_out.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            r.times[j] = static_cast<double>(j) * s.grid.dt;
            r.light_out[j] = {normal(rng), normal(rng)};
        }
    }
    const auto freqs = independent_bins(s.grid, 5);
    const auto est = estimate_spectrum(recs, s.strobo, s.grid, freqs);
    for (std::size_t f = 0; f < freqs.size(); ++f) {
        CAPTURE(freqs[f]);
        CHECK(std::abs(est.s_est[f] - level) < 3 * est.stderr_est[f]);
    }
}

TEST_CASE("shot-noise floor does not depend on the record length") {
    for (double gt : {1.0, 2.0}) {
        const auto s = setup(gt, 0.0);
        const auto est =
            simulate_spectrum(s.model, s.strobo, s.grid, independent_bins(s.grid, 5), 2000, 12);
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t f = 0; f < est.size(); ++f) {
            mean += est.s_est[f];
            var += est.stderr_est[f] * est.stderr_est[f];
        }
        const auto m = static_cast<double>(est.size());
        CAPTURE(gt);
        CHECK(std::abs(mean / m - 0.5) < 3 * std::sqrt(var) / m);
    }
}

TEST_CASE("disjoint half ensembles agree") {
    const auto s = setup(1.0);
    const auto freqs = independent_bins(s.grid, 3);
    const auto a = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 3000, 100);
    const auto b = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 3000, 200);
    for (std::size_t f = 0; f < freqs.size(); ++f) {
        CHECK(std::abs(a.s_est[f] - b.s_est[f]) < 3 * std::hypot(a.stderr_est[f], b.stderr_est[f]));
    }
}

TEST_CASE("record that does not match the grid") {
    const auto s = setup(0.2);
    auto rec = simulate_trajectory(s.model, s.strobo, s.grid, 1);
    rec.light_out.pop_back();
    const std::vector<double> freqs{larmor};
    CHECK_THROWS_AS(estimate_spectrum(std::span(&rec, 1), s.strobo, s.grid, freqs), GridMismatch);
    CHECK_THROWS_AS(estimate_spectrum({}, s.strobo, s.grid, freqs), std::invalid_argument);
}

TEST_CASE("reference fit on a flat spectrum") {
    const auto freqs = frequency_grid(larmor, gamma_total);
    const std::vector<double> flat(freqs.size(), 0.5);
    const auto ref = fit_shot_noise_reference(freqs, flat, larmor, 3 * gamma_total);
    for (double v : ref.curve) {
        CHECK(std::abs(v - 0.5) < 1e-3);
    }

    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> noisy(flat);
    for (auto& v : noisy) {
        v += noise(rng);
    }
    const auto a = fit_shot_noise_reference(freqs, noisy, larmor, 0.0);
    // centred between two bins, a cut narrower than half a bin masks nothing
    const auto b = fit_shot_noise_reference(freqs, noisy, larmor + 0.05 * gamma_total,
                                            0.04 * gamma_total);
    CHECK(a.fit.converged);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        CHECK(std::abs(a.curve[i] - 0.5) < 0.02);
    }
    // every bin enters the residual sum
    for (const auto* r : {&a, &b}) {
        double rss = 0.0;
        for (std::size_t i = 0; i < freqs.size(); ++i) {
            rss += (noisy[i] - r->curve[i]) * (noisy[i] - r->curve[i]);
        }
        CHECK(r->fit.rss == doctest::Approx(rss).epsilon(1e-9));
    }
}

TEST_CASE("reference fit ignores a bump inside the exclusion window") {
    const auto freqs = frequency_grid(larmor, gamma_total);
    std::vector<double> data(freqs.size());
    const std::array truth{0.3, 0.5 * gamma_total, larmor, 0.5};
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        data[i] = fit_models(ModelId::lorentzian, truth, freqs[i]);
    }
    const auto ref = fit_shot_noise_reference(freqs, data, larmor, 3 * gamma_total);
    CHECK(ref.fit.params[3] == doctest::Approx(0.5).epsilon(1e-2));
    CHECK(ref.curve.front() == doctest::Approx(0.5).epsilon(1e-2));
    CHECK(ref.curve.back() == doctest::Approx(0.5).epsilon(1e-2));

    CHECK_THROWS_AS(fit_shot_noise_reference(freqs, data, larmor, 1e9), FitError);
    CHECK_THROWS_AS(fit_shot_noise_reference(std::span(freqs).first(10), data, larmor, 0.0),
                    GridMismatch);
}

TEST_CASE("ratio against itself is one") {
    const auto s = setup(0.5);
    const auto freqs = frequency_grid(larmor, gamma_total);
    const auto est = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 100, 9);
    const auto r = squeezing_ratio(est, est);
    for (double v : r.xi_l2) {
        CHECK(v == 1.0);
    }
    auto other = est;
    other.freqs[3] += 1.0;
    CHECK_THROWS_AS(squeezing_ratio(est, other), GridMismatch);
    CHECK_THROWS_AS(squeezing_ratio(est, std::span(freqs).first(5)), GridMismatch);
}

TEST_CASE("simulated dip matches the closed form") {
    const auto s = setup(1.0);
    const auto freqs = frequency_grid(larmor, gamma_total);
    const auto signal = simulate_spectrum(s.model, s.strobo, s.grid, freqs, 4000, 77);
    const auto ref = shot_noise_reference(s.strobo, s.grid, larmor, freqs, 4000,
                                          default_exclusion_gammas * gamma_total, 78);
    const auto ratio = squeezing_ratio(signal, ref.curve);
    CHECK_NOTHROW(ratio.validate());
    const auto head = headline_squeezing(ratio, larmor, gamma_total);
    const double expected = light_spectrum(larmor, light_inputs(s)).xi_l2;
    CAPTURE(head.xi_l2);
    CAPTURE(head.std_error);
    CHECK(std::abs(head.omega - larmor) <= gamma_total);
    CHECK(head.xi_l2 < 1.0 - 3 * head.std_error);
    CHECK(std::abs(head.xi_l2 - expected) < 4 * head.std_error + 0.02 * expected);
}

TEST_CASE("higher sidebands show shallower dips") {
    const auto s = setup(1.0);
    const std::vector<double> peaks{larmor, 3 * larmor, 5 * larmor};
    const auto signal = simulate_spectrum(s.model, s.strobo, s.grid, peaks, 10000, 21);
    auto vacuum = s.model;
    vacuum.kappa = 0.0;
    const auto ref = simulate_spectrum(vacuum, s.strobo, s.grid, peaks, 10000, 22);
    const auto r = squeezing_ratio(signal, ref);
    CHECK(r.xi_l2[0] < r.xi_l2[1]);
    CHECK(r.xi_l2[1] < r.xi_l2[2]);
    const auto in = light_inputs(s);
    for (int n = 0; n < 3; ++n) {
        const double expected = light_spectrum(peaks[static_cast<std::size_t>(n)], in).xi_l2;
        const double se = std::hypot(r.stderr_xi[static_cast<std::size_t>(n)],
                                     r.xi_l2[static_cast<std::size_t>(n)] *
                                         ref.stderr_est[static_cast<std::size_t>(n)] /
                                         ref.s_est[static_cast<std::size_t>(n)]);
        CAPTURE(n);
        CHECK(std::abs(r.xi_l2[static_cast<std::size_t>(n)] - expected) < 4 * se);
    }
}

TEST_CASE("dip fit on the closed-form spectrum") {
    const auto s = setup(1.0);
    const auto in = light_inputs(s);
    SpectrumResult r;
    r.freqs = frequency_grid(larmor, gamma_total);
    for (double w : r.freqs) {
        const double v = light_spectrum(w, in).s_lss;
        r.s_est.push_back(v);
        r.s_shot.push_back(0.5);
        r.xi_l2.push_back(v / 0.5);
        r.stderr_est.push_back(0.0);
        r.stderr_xi.push_back(0.0);
    }
    const auto f = fit_dip(r, larmor, gamma_total);
    CHECK(f.converged);
    CHECK(f.params[1] == doctest::Approx(gamma_total).epsilon(1e-3));
    CHECK(f.params[2] == doctest::Approx(larmor).epsilon(1e-6));
    CHECK(-f.params[0] == doctest::Approx(sideband_terms(0, in).total()).epsilon(1e-3));
}

TEST_CASE("headline picks the minimum inside the window") {
    SpectrumResult r;
    r.freqs = {0.0, 1.0, 2.0, 3.0, 4.0};
    r.xi_l2 = {0.1, 0.5, 0.4, 0.6, 0.05};
    r.stderr_xi = {1, 2, 3, 4, 5};
    const auto h = headline_squeezing(r, 2.0, 1.0);
    CHECK(h.omega == 2.0);
    CHECK(h.xi_l2 == 0.4);
    CHECK(h.std_error == 3.0);
    CHECK_THROWS_AS(headline_squeezing(r, 10.0, 1.0), GridMismatch);
}

TEST_CASE("spectrum CSV") {
    SpectrumResult r;
    r.freqs = {99900.0, 100000.0};
    r.s_est = {0.5, 1.0 / 7.0};
    r.s_shot = {0.5, 0.5};
    r.xi_l2 = {1.0, 2.0 / 7.0};
    r.stderr_est = {0.01, 0.02};
    r.stderr_xi = {0.02, 0.04};
    std::ostringstream out;
    write_spectrum_csv(out, r);
    std::istringstream in(out.str());
    const auto t = read_csv(in);
    CHECK(t.header == std::vector<std::string>{"omega_rad_s", "s_est", "s_shot", "xi_l2", "stderr"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][t.column("xi_l2")] == 2.0 / 7.0);
    CHECK(t.rows[1][t.column("s_est")] == 1.0 / 7.0);
    CHECK(t.rows[0][t.column("stderr")] == 0.02);

    r.s_shot[1] = 0.0;
    CHECK_THROWS_AS(write_spectrum_csv(out, r), GridMismatch);
}

TEST_CASE("reference curve stays near one half on small ensembles") {
    // short records give smooth, strongly correlated bins that once let a
    // narrow negative line hide inside the exclusion window
    const auto s = setup(0.5, 0.0);
    FrequencyGridSpec spec;
    spec.bin_gammas = 0.5;
    const auto freqs = frequency_grid(larmor, gamma_total, spec);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto ref = shot_noise_reference(s.strobo, s.grid, larmor, freqs, 200,
                                              3 * gamma_total, splitmix64(seed), 1);
        const auto [lo, hi] = std::minmax_element(ref.curve.begin(), ref.curve.end());
        CAPTURE(seed);
        CHECK(*lo > 0.35);
        CHECK(*hi < 0.65);
    }
}

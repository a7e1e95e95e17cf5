#include "strobosq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>

#include "strobosq/csv.hpp"
#include "strobosq/errors.hpp"
#include "strobosq/parallel.hpp"

namespace strobosq {

namespace {

using cplx = std::complex<double>;

constexpr std::size_t traj_block = 32;

// Transform of the pulse-gated samples. Pulse steps come in contiguous runs;
// each run is evaluated by Horner's rule in z = e^{iω dt} and rotated by the
// phasor of its first step, which keeps the cost at one complex multiply per
// sample and frequency without a full phasor table.
class PulseTransform {
public:
    PulseTransform(std::span<const std::int64_t> pulse_steps, double dt,
                   std::span<const double> freqs)
        : dt_(dt), n_freq_(freqs.size()) {
        std::size_t i = 0;
        while (i < pulse_steps.size()) {
            std::size_t j = i + 1;
            while (j < pulse_steps.size() && pulse_steps[j] == pulse_steps[j - 1] + 1) {
                ++j;
            }
            runs_.push_back({i, j - i});
            for (double w : freqs) {
                start_.push_back(std::polar(1.0, w * static_cast<double>(pulse_steps[i]) * dt));
            }
            i = j;
        }
        for (double w : freqs) {
            step_.push_back(std::polar(1.0, w * dt));
        }
    }

    std::size_t n_freq() const { return n_freq_; }

    /// Adds |Y(ω)|² for samples y (one per pulse step) into `power`.
    void power(std::span<const double> y, std::span<double> power) const {
        for (std::size_t f = 0; f < n_freq_; ++f) {
            const cplx z = step_[f];
            cplx total = 0.0;
            for (std::size_t r = 0; r < runs_.size(); ++r) {
                const auto [first, len] = runs_[r];
                cplx acc = 0.0;
                for (std::size_t m = len; m-- > 0;) {
                    acc = acc * z + y[first + m];
                }
                total += start_[r * n_freq_ + f] * acc;
            }
            power[f] = std::norm(total * dt_);
        }
    }

private:
    struct Run {
        std::size_t first;
        std::size_t len;
    };
    double dt_;
    std::size_t n_freq_;
    std::vector<Run> runs_;
    std::vector<cplx> start_;  // [run][freq]
    std::vector<cplx> step_;
};

std::vector<std::int64_t> pulse_steps_of(const TimeGrid& grid) {
    std::vector<std::int64_t> steps;
    for (std::int64_t j = 0; j < grid.n_steps; ++j) {
        if (grid.pulse_on(j)) {
            steps.push_back(j);
        }
    }
    return steps;
}

// Ensemble mean and standard error per bin, computed from per-block sums so
// the reduction order is fixed by trajectory index alone.
template <class FillBlock>
SpectrumResult reduce_blocks(std::span<const double> freqs, std::size_t n_traj, double norm,
                             unsigned workers, FillBlock&& fill_block) {
    const std::size_t n_freq = freqs.size();
    const std::size_t n_blocks = (n_traj + traj_block - 1) / traj_block;
    std::vector<double> sums(n_blocks * n_freq, 0.0);
    std::vector<double> sq(n_blocks * n_freq, 0.0);

    parallel_for(n_blocks, workers, [&](std::size_t b) {
        const std::size_t begin = b * traj_block;
        const std::size_t end = std::min(n_traj, begin + traj_block);
        std::span<double> s(sums.data() + b * n_freq, n_freq);
        std::span<double> q(sq.data() + b * n_freq, n_freq);
        std::vector<double> p(n_freq);
        for (std::size_t k = begin; k < end; ++k) {
            fill_block(k, std::span<double>(p));
            for (std::size_t f = 0; f < n_freq; ++f) {
                const double v = p[f] * norm;
                s[f] += v;
                q[f] += v * v;
            }
        }
    });

    SpectrumResult res;
    res.freqs.assign(freqs.begin(), freqs.end());
    res.n_ensemble = n_traj;
    res.s_est.resize(n_freq);
    res.stderr_est.resize(n_freq);
    std::vector<double> col_s(n_blocks);
    std::vector<double> col_q(n_blocks);
    const double n = static_cast<double>(n_traj);
    for (std::size_t f = 0; f < n_freq; ++f) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            col_s[b] = sums[b * n_freq + f];
            col_q[b] = sq[b * n_freq + f];
        }
        const double mean = pairwise_sum(col_s) / n;
        const double mean_sq = pairwise_sum(col_q) / n;
        const double var = n > 1.0 ? std::max(0.0, mean_sq - mean * mean) * n / (n - 1.0) : 0.0;
        res.s_est[f] = mean;
        res.stderr_est[f] = std::sqrt(var / n);
    }
    res.s_shot.assign(n_freq, 0.5);
    res.xi_l2.resize(n_freq);
    res.stderr_xi.resize(n_freq);
    for (std::size_t f = 0; f < n_freq; ++f) {
        res.xi_l2[f] = res.s_est[f] / res.s_shot[f];
        res.stderr_xi[f] = res.stderr_est[f] / res.s_shot[f];
    }
    return res;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), mid));
    }
    return m;
}

double bin_width(std::span<const double> freqs) {
    double w = INFINITY;
    for (std::size_t i = 1; i < freqs.size(); ++i) {
        const double d = freqs[i] - freqs[i - 1];
        if (d > 0.0) {
            w = std::min(w, d);
        }
    }
    return std::isfinite(w) ? w : 1.0;
}

void check_freqs(std::span<const double> freqs) {
    if (freqs.empty()) {
        throw std::invalid_argument("frequency grid is empty");
    }
    for (double w : freqs) {
        if (!std::isfinite(w)) {
            throw std::invalid_argument("frequency grid contains non-finite values");
        }
    }
}

}  // namespace

std::vector<double> frequency_grid(double larmor, double gamma_total,
                                   const FrequencyGridSpec& spec) {
    if (!(larmor > 0.0) || !(gamma_total > 0.0)) {
        throw std::invalid_argument("larmor frequency and gamma must be positive");
    }
    if (!(spec.half_span_gammas > 0.0) || !(spec.bin_gammas > 0.0) || spec.sidebands < 0) {
        throw std::invalid_argument("invalid frequency grid settings");
    }
    const auto half_bins = static_cast<long>(std::llround(spec.half_span_gammas / spec.bin_gammas));
    const double bin = spec.bin_gammas * gamma_total;
    std::vector<double> freqs;
    for (int n = 0; n <= spec.sidebands; ++n) {
        const double centre = (2.0 * n + 1.0) * larmor;
        for (long k = -half_bins; k <= half_bins; ++k) {
            freqs.push_back(centre + static_cast<double>(k) * bin);
        }
    }
    std::sort(freqs.begin(), freqs.end());
    freqs.erase(std::unique(freqs.begin(), freqs.end()), freqs.end());
    return freqs;
}

void SpectrumResult::validate() const {
    const std::size_t n = freqs.size();
    if (s_est.size() != n || s_shot.size() != n || xi_l2.size() != n ||
        stderr_est.size() != n || stderr_xi.size() != n) {
        throw GridMismatch("spectrum columns have different lengths");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(s_shot[i] > 0.0)) {
            throw GridMismatch("shot-noise reference must be positive");
        }
    }
}

SpectrumResult estimate_spectrum(std::span<const TrajectoryRecord> records,
                                 const StroboConfig& strobo, const TimeGrid& grid,
                                 std::span<const double> freqs) {
    if (records.empty()) {
        throw std::invalid_argument("ensemble is empty");
    }
    check_freqs(freqs);
    strobo.validate();
    const auto n_steps = static_cast<std::size_t>(grid.n_steps);
    for (const auto& r : records) {
        if (r.light_out.size() != n_steps) {
            throw GridMismatch("record length does not match the grid");
        }
    }
    const auto pulse = pulse_steps_of(grid);
    const PulseTransform transform(pulse, grid.dt, freqs);
    const double norm = 1.0 / (grid.effective_duty() * grid.total_time);

    return reduce_blocks(freqs, records.size(), norm, 1, [&](std::size_t k, std::span<double> p) {
        std::vector<double> y(pulse.size());
        for (std::size_t i = 0; i < pulse.size(); ++i) {
            y[i] = records[k].light_out[static_cast<std::size_t>(pulse[i])][1];
        }
        transform.power(y, p);
    });
}

SpectrumResult simulate_spectrum(const AtomLightModel& model, const StroboConfig& strobo,
                                 const TimeGrid& grid, std::span<const double> freqs,
                                 std::size_t n_traj, std::uint64_t base_seed,
                                 const GaussianSpinState& initial, unsigned workers) {
    if (n_traj == 0) {
        throw std::invalid_argument("ensemble is empty");
    }
    check_freqs(freqs);
    const TrajectoryIntegrator integrator(model, strobo, grid);
    const auto pulse = integrator.pulse_steps();
    const PulseTransform transform(pulse, grid.dt, freqs);
    const double norm = 1.0 / (grid.effective_duty() * grid.total_time);

    return reduce_blocks(freqs, n_traj, norm, workers, [&](std::size_t k, std::span<double> p) {
        std::vector<double> y;
        y.reserve(pulse.size());
        integrator.run(trajectory_seed(base_seed, k), initial, {}, LightSteps::pulse_only,
                       [&](std::int64_t, double, double, double, double p_out) {
                           y.push_back(p_out);
                       });
        transform.power(y, p);
    });
}

ShotNoiseFit fit_shot_noise_reference(std::span<const double> freqs,
                                      std::span<const double> values, double centre,
                                      double exclusion_halfwidth,
                                      std::span<const double> weights) {
    if (freqs.size() != values.size() || (!weights.empty() && weights.size() != freqs.size())) {
        throw GridMismatch("reference data and frequency grid differ in length");
    }
    if (!(exclusion_halfwidth >= 0.0)) {
        throw std::invalid_argument("exclusion half-width must be non-negative");
    }
    check_freqs(freqs);

    FitProblem pb;
    pb.model = ModelId::lorentzian;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        if (std::abs(freqs[i] - centre) < exclusion_halfwidth) {
            continue;
        }
        pb.x.push_back(freqs[i]);
        pb.y.push_back(values[i]);
        if (!weights.empty()) {
            pb.weights.push_back(weights[i]);
        }
    }
    if (pb.x.size() < 5) {
        throw FitError("too few bins outside the exclusion window");
    }

    const auto [lo_it, hi_it] = std::minmax_element(freqs.begin(), freqs.end());
    const double span = *hi_it - *lo_it;
    const double bin = bin_width(freqs);
    const double width0 = std::clamp(exclusion_halfwidth > 0.0 ? exclusion_halfwidth : 0.1 * span,
                                     bin, std::max(bin, span));
    // a line narrower than the masked window is not identifiable from the
    // bins outside it, and can dig an arbitrarily deep hole at the centre
    const double min_width = std::min(std::max(bin, exclusion_halfwidth), std::max(bin, span));
    pb.initial = {0.0, std::max(width0, min_width), centre, median(pb.y)};
    pb.lower = {-INFINITY, min_width,
                exclusion_halfwidth > 0.0 ? centre - exclusion_halfwidth : *lo_it, -INFINITY};
    pb.upper = {INFINITY, std::max(bin, span),
                exclusion_halfwidth > 0.0 ? centre + exclusion_halfwidth : *hi_it, INFINITY};

    ShotNoiseFit out;
    out.fit = fit(pb, 1e-10, 500);
    if (!out.fit.converged) {
        throw FitError("shot-noise reference fit did not converge: " + out.fit.message);
    }
    out.curve.resize(freqs.size());
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        out.curve[i] = fit_models(ModelId::lorentzian, out.fit.params, freqs[i]);
    }
    return out;
}

ShotNoiseFit shot_noise_reference(const StroboConfig& strobo, const TimeGrid& grid,
                                  double larmor, std::span<const double> freqs,
                                  std::size_t n_ensemble, double exclusion_halfwidth,
                                  std::uint64_t base_seed, unsigned workers) {
    if (n_ensemble < 100) {
        throw std::invalid_argument("shot-noise reference needs at least 100 trajectories");
    }
    AtomLightModel vacuum;
    vacuum.kappa = 0.0;
    vacuum.zeta2 = 1.0;
    vacuum.gamma_ex = 0.0;
    vacuum.larmor = larmor;
    const auto raw = simulate_spectrum(vacuum, strobo, grid, freqs, n_ensemble, base_seed,
                                       GaussianSpinState::coherent(), workers);
    return fit_shot_noise_reference(freqs, raw.s_est, larmor, exclusion_halfwidth);
}

SpectrumResult squeezing_ratio(const SpectrumResult& signal, std::span<const double> reference) {
    if (reference.size() != signal.size()) {
        throw GridMismatch("reference and signal have different lengths");
    }
    SpectrumResult out = signal;
    out.s_shot.assign(reference.begin(), reference.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out.s_shot[i] > 0.0)) {
            throw GridMismatch("shot-noise reference must be positive");
        }
        out.xi_l2[i] = out.s_est[i] / out.s_shot[i];
        out.stderr_xi[i] = out.stderr_est[i] / out.s_shot[i];
    }
    return out;
}

SpectrumResult squeezing_ratio(const SpectrumResult& signal, const SpectrumResult& reference) {
    if (signal.freqs != reference.freqs) {
        throw GridMismatch("signal and reference frequency grids differ");
    }
    return squeezing_ratio(signal, reference.s_est);
}

HeadlineSqueezing headline_squeezing(const SpectrumResult& result, double centre,
                                     double halfwidth) {
    HeadlineSqueezing best;
    bool found = false;
    for (std::size_t i = 0; i < result.size(); ++i) {
        if (std::abs(result.freqs[i] - centre) > halfwidth) {
            continue;
        }
        if (!found || result.xi_l2[i] < best.xi_l2) {
            best = {result.freqs[i], result.xi_l2[i], result.stderr_xi[i]};
            found = true;
        }
    }
    if (!found) {
        throw GridMismatch("no frequency bin inside the headline window");
    }
    return best;
}

FitResult fit_dip(const SpectrumResult& result, double centre, double gamma_guess) {
    if (result.size() < 5) {
        throw FitError("too few bins to fit the dip");
    }
    const auto [lo_it, hi_it] = std::minmax_element(result.freqs.begin(), result.freqs.end());
    const double span = *hi_it - *lo_it;
    const double bin = bin_width(result.freqs);
    const double floor = median(result.xi_l2);
    const double depth = *std::min_element(result.xi_l2.begin(), result.xi_l2.end()) - floor;

    FitProblem pb;
    pb.model = ModelId::lorentzian;
    pb.x = result.freqs;
    pb.y = result.xi_l2;
    pb.initial = {depth, std::clamp(gamma_guess, bin, span), centre, floor};
    pb.lower = {-INFINITY, bin, centre - 5.0 * gamma_guess, -INFINITY};
    pb.upper = {INFINITY, span, centre + 5.0 * gamma_guess, INFINITY};
    return fit(pb, 1e-12, 500);
}

void write_spectrum_csv(std::ostream& out, const SpectrumResult& result) {
    result.validate();
    out << "omega_rad_s,s_est,s_shot,xi_l2,stderr\n";
    for (std::size_t i = 0; i < result.size(); ++i) {
        out << format_double(result.freqs[i]) << ',' << format_double(result.s_est[i]) << ','
            << format_double(result.s_shot[i]) << ',' << format_double(result.xi_l2[i]) << ','
            << format_double(result.stderr_xi[i]) << '\n';
    }
}

}  // namespace strobosq

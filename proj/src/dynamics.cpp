#include "strobosq/dynamics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "strobosq/errors.hpp"
#include "strobosq/parallel.hpp"

namespace strobosq {

namespace {

constexpr double pi = std::numbers::pi;

std::int64_t floor_mod(std::int64_t a, std::int64_t m) {
    const std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

std::int64_t period_count(double total_time, double period) {
    if (!(total_time >= 0.0) || !std::isfinite(total_time)) {
        throw std::invalid_argument("total time must be non-negative");
    }
    if (total_time == 0.0) {
        return 0;
    }
    return std::max<std::int64_t>(1, std::llround(total_time / period));
}

TimeGrid assemble(const StroboConfig& strobo, std::int64_t periods, int samples, int window) {
    TimeGrid g;
    g.samples_per_period = samples;
    g.window_samples = window;
    g.dt = strobo.period() / samples;
    g.n_steps = periods * samples;
    g.total_time = static_cast<double>(periods) * strobo.period();
    // window centre at phase/ω_m, in samples
    const double centre = strobo.phase / (2.0 * pi) * samples;
    g.window_start = static_cast<int>(
        floor_mod(std::llround(centre - 0.5 * window), static_cast<std::int64_t>(samples)));
    return g;
}

}  // namespace

double snap_total_time(double total_time, double period) {
    return static_cast<double>(period_count(total_time, period)) * period;
}

//===----------------------------------------------------------------------===//
// Model
//===----------------------------------------------------------------------===//

double AtomLightModel::epsilon(double duty) const {
    const double total = gamma_total(duty);
    return total > 0.0 ? gamma_s() * duty / total : 0.0;
}

void AtomLightModel::validate() const {
    if (!std::isfinite(kappa)) {
        throw std::invalid_argument("kappa must be finite");
    }
    if (!(zeta2 > 0.0) || !std::isfinite(zeta2)) {
        throw RegimeError("zeta^2 must be positive");
    }
    if (!(gamma_ex >= 0.0) || !std::isfinite(gamma_ex)) {
        throw std::invalid_argument("gamma_ex must be non-negative");
    }
    if (!(larmor > 0.0) || !std::isfinite(larmor)) {
        throw std::invalid_argument("larmor frequency must be positive");
    }
}

AtomLightModel AtomLightModel::from_params(const PhysicalParams& params, double duty) {
    const auto c = derive_couplings(params, duty);
    AtomLightModel m;
    m.kappa = c.kappa;
    m.zeta2 = c.zeta2;
    m.gamma_ex = params.gamma_ex;
    m.larmor = params.larmor;
    m.validate();
    return m;
}

AtomLightModel AtomLightModel::from_rates(double gamma_total, double epsilon, double zeta2,
                                          double duty, double larmor, double kappa_sign) {
    if (!(gamma_total > 0.0)) {
        throw std::invalid_argument("gamma_total must be positive");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
    if (!(duty > 0.0 && duty <= 1.0)) {
        throw std::invalid_argument("duty cycle must lie in (0, 1]");
    }
    if (!(zeta2 > 0.0)) {
        throw RegimeError("zeta^2 must be positive");
    }
    const double gamma_s = epsilon * gamma_total / duty;
    AtomLightModel m;
    m.kappa = std::copysign(std::sqrt(2.0 * gamma_s / zeta2), kappa_sign);
    m.zeta2 = zeta2;
    m.gamma_ex = (1.0 - epsilon) * gamma_total;
    m.larmor = larmor;
    m.validate();
    return m;
}

//===----------------------------------------------------------------------===//
// Grid
//===----------------------------------------------------------------------===//

bool TimeGrid::pulse_on(std::int64_t step) const {
    return floor_mod(step - window_start, samples_per_period) < window_samples;
}

TimeGrid make_time_grid(const StroboConfig& strobo, double larmor, double total_time) {
    strobo.validate();
    if (!(larmor > 0.0)) {
        throw std::invalid_argument("larmor frequency must be positive");
    }
    const double period = strobo.period();
    const std::int64_t periods = period_count(total_time, period);

    const double d = strobo.duty;
    const int from_larmor = static_cast<int>(
        std::ceil(min_samples_per_larmor * larmor * period / (2.0 * pi) - 1e-9));
    const int from_window = static_cast<int>(std::ceil(min_window_samples / d - 1e-9));
    const int m_min = std::max({100, from_larmor, from_window});

    // smallest M whose window d·M is an even integer; odd integers are the
    // fallback, and failing both the window is rounded to the nearest sample
    auto window_at = [&](int m, bool want_even) -> int {
        const double w = d * m;
        const double r = std::round(w);
        if (std::abs(w - r) > 1e-9 * std::max(1.0, w)) {
            return 0;
        }
        const auto wi = static_cast<int>(r);
        if (want_even && wi % 2 != 0) {
            return 0;
        }
        return wi;
    };
    const int m_limit = 64 * m_min;
    for (const bool want_even : {true, false}) {
        for (int m = m_min; m <= m_limit; ++m) {
            const int w = window_at(m, want_even);
            if (w >= min_window_samples) {
                return assemble(strobo, periods, m, w);
            }
        }
    }
    const int w = std::max(min_window_samples, static_cast<int>(std::lround(d * m_min)));
    return assemble(strobo, periods, m_min, std::min(w, m_min));
}

TimeGrid make_time_grid(const StroboConfig& strobo, double larmor, double total_time,
                        double dt) {
    strobo.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw GridError("time step must be positive");
    }
    const double period = strobo.period();
    const std::int64_t periods = period_count(total_time, period);
    const double ratio = period / dt;
    if (ratio > static_cast<double>(std::numeric_limits<int>::max() / 2)) {
        throw GridError("time step too small");
    }
    const int m = std::max(1, static_cast<int>(std::lround(ratio)));
    const int w = std::min(m, static_cast<int>(std::lround(strobo.duty * m)));
    const TimeGrid g = assemble(strobo, periods, m, w);
    validate_grid(g, strobo, larmor);
    return g;
}

void validate_grid(const TimeGrid& grid, const StroboConfig& strobo, double larmor) {
    const double limit = 2.0 * pi / min_samples_per_larmor;
    if (grid.dt * larmor > limit * (1.0 + 1e-9)) {
        throw GridError("time step too coarse: dt*Omega = " + std::to_string(grid.dt * larmor) +
                        " exceeds 2*pi/" + std::to_string(min_samples_per_larmor));
    }
    if (grid.window_samples < min_window_samples) {
        throw GridError("pulse window resolved by only " + std::to_string(grid.window_samples) +
                        " samples (need " + std::to_string(min_window_samples) + ")");
    }
    const double exact = strobo.duty * strobo.period() / grid.dt;
    if (std::abs(exact - grid.window_samples) > 1.0 + 1e-9) {
        throw GridError("pulse window does not match the duty cycle to one sample");
    }
}

//===----------------------------------------------------------------------===//
// States
//===----------------------------------------------------------------------===//

double Covariance2::quadrature_variance(double quad_angle) const {
    const double c = std::cos(0.5 * quad_angle);
    const double s = std::sin(0.5 * quad_angle);
    return c * c * pp + 2.0 * c * s * xp + s * s * xx;
}

bool GaussianSpinState::is_physical() const {
    return cov.xx >= 0.0 && cov.pp >= 0.0 && cov.det() >= 0.25 - 1e-9;
}

GaussianSpinState GaussianSpinState::coherent(double cov_scale) {
    if (!(cov_scale > 0.0)) {
        throw std::invalid_argument("covariance scale must be positive");
    }
    GaussianSpinState s;
    s.cov = {0.5 * cov_scale, 0.0, 0.5 * cov_scale};
    return s;
}

//===----------------------------------------------------------------------===//
// Trajectories
//===----------------------------------------------------------------------===//

TrajectoryIntegrator::TrajectoryIntegrator(const AtomLightModel& model,
                                           const StroboConfig& strobo, const TimeGrid& grid)
    : model_(model), grid_(grid) {
    model_.validate();
    validate_grid(grid_, strobo, model_.larmor);
    const auto n = static_cast<std::size_t>(grid_.n_steps);
    on_.resize(n);
    cos_.resize(n);
    sin_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto step = static_cast<std::int64_t>(j);
        const double t = static_cast<double>(step) * grid_.dt;
        on_[j] = grid_.pulse_on(step) ? 1 : 0;
        cos_[j] = std::cos(model_.larmor * t);
        sin_[j] = std::sin(model_.larmor * t);
        if (on_[j]) {
            pulse_steps_.push_back(step);
        }
    }
}

TrajectoryRecord simulate_trajectory(const AtomLightModel& model, const StroboConfig& strobo,
                                     const TimeGrid& grid, std::uint64_t seed,
                                     const GaussianSpinState& initial,
                                     const SimulationOptions& options) {
    const TrajectoryIntegrator integrator(model, strobo, grid);
    const auto n = static_cast<std::size_t>(grid.n_steps);
    TrajectoryRecord rec;
    rec.seed = seed;
    rec.times.resize(n);
    rec.atom.resize(n);
    rec.light_out.resize(n);
    rec.final_atom = integrator.run(
        seed, initial, options, LightSteps::all,
        [&](std::int64_t j, double x, double p, double x_out, double p_out) {
            const auto i = static_cast<std::size_t>(j);
            rec.times[i] = static_cast<double>(j) * grid.dt;
            rec.atom[i] = {x, p};
            rec.light_out[i] = {x_out, p_out};
        });
    return rec;
}

std::vector<std::array<double, 2>> ensemble_final_states(
    const AtomLightModel& model, const StroboConfig& strobo, const TimeGrid& grid,
    std::size_t n_traj, std::uint64_t base_seed, const GaussianSpinState& initial,
    unsigned workers) {
    const TrajectoryIntegrator integrator(model, strobo, grid);
    std::vector<std::array<double, 2>> out(n_traj);
    parallel_for(n_traj, workers, [&](std::size_t k) {
        out[k] = integrator.run(trajectory_seed(base_seed, k), initial);
    });
    return out;
}

VarianceEstimate jackknife_variance(std::span<const double> q) {
    const std::size_t n = q.size();
    if (n < 3) {
        throw std::invalid_argument("jackknife needs at least three samples");
    }
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        sq[i] = q[i] * q[i];
    }
    const double s1 = pairwise_sum(q);
    const double s2 = pairwise_sum(sq);
    const double nn = static_cast<double>(n);

    auto variance_of = [](double sum, double sum_sq, double count) {
        const double mean = sum / count;
        return (sum_sq - count * mean * mean) / (count - 1.0);
    };

    VarianceEstimate est;
    est.n = n;
    est.variance = variance_of(s1, s2, nn);

    // leave-one-out variances
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        loo[i] = variance_of(s1 - q[i], s2 - sq[i], nn - 1.0);
    }
    const double loo_mean = pairwise_sum(loo) / nn;
    for (auto& v : loo) {
        v = (v - loo_mean) * (v - loo_mean);
    }
    est.std_error = std::sqrt((nn - 1.0) / nn * pairwise_sum(loo));
    return est;
}

VarianceEstimate ensemble_variance(const AtomLightModel& model, const StroboConfig& strobo,
                                   const TimeGrid& grid, std::size_t n_traj,
                                   std::uint64_t base_seed, double quad_angle,
                                   const GaussianSpinState& initial, unsigned workers) {
    if (n_traj < 100) {
        throw std::invalid_argument("ensemble needs at least 100 trajectories");
    }
    const auto finals = ensemble_final_states(model, strobo, grid, n_traj, base_seed, initial,
                                              workers);
    const double c = std::cos(0.5 * quad_angle);
    const double s = std::sin(0.5 * quad_angle);
    std::vector<double> q(n_traj);
    for (std::size_t k = 0; k < n_traj; ++k) {
        q[k] = finals[k][1] * c + finals[k][0] * s;
    }
    return jackknife_variance(q);
}

//===----------------------------------------------------------------------===//
// Moments
//===----------------------------------------------------------------------===//

std::vector<GaussianSpinState> propagate_moments(const AtomLightModel& model,
                                                 const StroboConfig& strobo,
                                                 const TimeGrid& grid,
                                                 const GaussianSpinState& initial) {
    model.validate();
    validate_grid(grid, strobo, model.larmor);

    const double k2 = model.kappa * model.kappa;
    const double z4 = model.zeta2 * model.zeta2;
    const double omega = model.larmor;
    const double dt = grid.dt;

    // state vector: mean x, mean p, Σxx, Σxp, Σpp
    using Vec = std::array<double, 5>;
    auto rhs = [&](const Vec& y, double t, bool on) {
        const double phi = on ? 1.0 : 0.0;
        const double a = model.gamma_s() * phi + model.gamma_ex;
        const double c = std::cos(omega * t);
        const double s = std::sin(omega * t);
        const double drive = 0.5 * k2 * phi;
        const double d_xx = drive * (c * c + z4 * s * s) + model.gamma_ex;
        const double d_pp = drive * (s * s + z4 * c * c) + model.gamma_ex;
        const double d_xp = drive * (1.0 - z4) * s * c;
        return Vec{-a * y[0], -a * y[1], -2.0 * a * y[2] + d_xx, -2.0 * a * y[3] + d_xp,
                   -2.0 * a * y[4] + d_pp};
    };
    auto axpy = [](const Vec& y, double h, const Vec& k) {
        Vec r;
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = y[i] + h * k[i];
        }
        return r;
    };

    std::vector<GaussianSpinState> out;
    out.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    out.push_back(initial);
    Vec y{initial.mean_x, initial.mean_p, initial.cov.xx, initial.cov.xp, initial.cov.pp};
    for (std::int64_t j = 0; j < grid.n_steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        const bool on = grid.pulse_on(j);
        const Vec k1 = rhs(y, t, on);
        const Vec k2v = rhs(axpy(y, 0.5 * dt, k1), t + 0.5 * dt, on);
        const Vec k3 = rhs(axpy(y, 0.5 * dt, k2v), t + 0.5 * dt, on);
        const Vec k4 = rhs(axpy(y, dt, k3), t + dt, on);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2v[i] + 2.0 * k3[i] + k4[i]);
        }
        GaussianSpinState s;
        s.mean_x = y[0];
        s.mean_p = y[1];
        s.cov = {y[2], y[3], y[4]};
        out.push_back(s);
    }
    return out;
}

}  // namespace strobosq

#pragma once

// Direct integration of the rotating-frame Heisenberg-Langevin equations for
// the collective spin quadratures (x_A, p_A) driven by the stroboscopic probe,
// together with the lab-frame input-output relations for the light.
//
//   dx/dt = -(γ_s φ + γ_ex) x + κφ p_in cos Ωt + ζ²κφ x_in sin Ωt + √(2γ_ex) f_x
//   dp/dt = -(γ_s φ + γ_ex) p + κφ p_in sin Ωt - ζ²κφ x_in cos Ωt + √(2γ_ex) f_p
//   x_out = x_in + κφ (-x sin Ωt + p cos Ωt)
//   p_out = p_in - ζ²κφ ( x cos Ωt + p sin Ωt)
//
// φ is 0 or 1, so φ² = φ. All white noises have correlator δ(t - t')/2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "strobosq/params.hpp"
#include "strobosq/rng.hpp"
#include "strobosq/strobe.hpp"

namespace strobosq {

struct AtomLightModel {
    double kappa = 0.0;     // 1/sqrt(s)
    double zeta2 = 1.0;
    double gamma_ex = 0.0;  // 1/s
    double larmor = 1.0;    // Ω (rad/s)

    double gamma_s() const { return 0.5 * zeta2 * kappa * kappa; }
    double gamma_total(double duty) const { return gamma_s() * duty + gamma_ex; }
    double epsilon(double duty) const;

    void validate() const;

    static AtomLightModel from_params(const PhysicalParams& params, double duty);
    /// Model with prescribed total decay rate γ and efficiency ε at duty d:
    /// γ_s = εγ/d, γ_ex = (1-ε)γ, κ = sign·sqrt(2γ_s/ζ²).
    static AtomLightModel from_rates(double gamma_total, double epsilon, double zeta2,
                                     double duty, double larmor, double kappa_sign = 1.0);
};

/// Integration grid. One stroboscopic period holds `samples_per_period`
/// steps and the pulse window covers exactly `window_samples` of them, so
/// pulse edges always fall on grid points. The total time is a whole number
/// of stroboscopic periods.
struct TimeGrid {
    double dt = 0.0;
    double total_time = 0.0;
    std::int64_t n_steps = 0;
    int samples_per_period = 0;
    int window_samples = 0;
    int window_start = 0;  // offset of the first pulse sample within a period

    double effective_duty() const {
        return static_cast<double>(window_samples) / samples_per_period;
    }
    /// φ on step [j dt, (j+1) dt).
    bool pulse_on(std::int64_t step) const;
};

/// Total time rounded to a whole number of stroboscopic periods: zero stays
/// zero, any positive time becomes at least one period.
double snap_total_time(double total_time, double period);

inline constexpr int min_samples_per_larmor = 200;
inline constexpr int min_window_samples = 20;

/// Picks the coarsest admissible grid whose pulse window is an exact (even)
/// number of samples. `total_time` is rounded to whole stroboscopic periods.
TimeGrid make_time_grid(const StroboConfig& strobo, double larmor, double total_time);

/// Grid from a requested step; dt is adjusted to divide the stroboscopic
/// period and the result is checked with validate_grid.
TimeGrid make_time_grid(const StroboConfig& strobo, double larmor, double total_time,
                        double dt);

/// Throws GridError when dt·Ω > 2π/200, the pulse window holds fewer than 20
/// samples, or the window misses d·period by more than one sample.
void validate_grid(const TimeGrid& grid, const StroboConfig& strobo, double larmor);

struct Covariance2 {
    double xx = 0.5;
    double xp = 0.0;
    double pp = 0.5;

    double det() const { return xx * pp - xp * xp; }
    /// Variance of q = p cos(θ/2) + x sin(θ/2).
    double quadrature_variance(double quad_angle) const;
};

struct GaussianSpinState {
    double mean_x = 0.0;
    double mean_p = 0.0;
    Covariance2 cov;

    /// Symmetric positive semidefinite with det >= 1/4 - 1e-9.
    bool is_physical() const;

    /// Coherent spin state, cov = scale·I/2, zero mean.
    static GaussianSpinState coherent(double cov_scale = 1.0);
};

struct SimulationOptions {
    bool suppress_noise = false;  // zero every noise draw, including the initial one
};

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::vector<double> times;                      // step start times
    std::vector<std::array<double, 2>> atom;        // (x_A, p_A) at step start
    std::vector<std::array<double, 2>> light_out;   // (x_out, p_out) samples on each step
    std::array<double, 2> final_atom{};             // (x_A, p_A) at total_time
};

/// Which steps a trajectory visitor sees.
enum class LightSteps { none, pulse_only, all };

/// Euler-Maruyama integrator shared by the trajectory, ensemble and spectral
/// paths. Construction tabulates φ, cos Ωt and sin Ωt on the grid.
class TrajectoryIntegrator {
public:
    TrajectoryIntegrator(const AtomLightModel& model, const StroboConfig& strobo,
                         const TimeGrid& grid);

    const TimeGrid& grid() const { return grid_; }
    const AtomLightModel& model() const { return model_; }
    std::span<const std::int64_t> pulse_steps() const { return pulse_steps_; }

    /// Integrates one trajectory and returns (x_A, p_A) at total_time.
    /// visit(step, x, p, x_out, p_out) is called per `light` selection with the
    /// atomic state at the start of the step.
    template <class Visitor>
    std::array<double, 2> run(std::uint64_t seed, const GaussianSpinState& initial,
                              const SimulationOptions& options, LightSteps light,
                              Visitor&& visit) const;

    std::array<double, 2> run(std::uint64_t seed, const GaussianSpinState& initial,
                              const SimulationOptions& options = {}) const {
        return run(seed, initial, options, LightSteps::none,
                   [](std::int64_t, double, double, double, double) {});
    }

    static constexpr std::uint64_t initial_state_step = ~std::uint64_t{0};

private:
    AtomLightModel model_;
    TimeGrid grid_;
    std::vector<std::uint8_t> on_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    std::vector<std::int64_t> pulse_steps_;
};

TrajectoryRecord simulate_trajectory(const AtomLightModel& model, const StroboConfig& strobo,
                                     const TimeGrid& grid, std::uint64_t seed,
                                     const GaussianSpinState& initial = GaussianSpinState::coherent(),
                                     const SimulationOptions& options = {});

/// Final (x_A, p_A) of n_traj trajectories; trajectory k uses
/// trajectory_seed(base_seed, k). Output order is the trajectory index.
std::vector<std::array<double, 2>> ensemble_final_states(
    const AtomLightModel& model, const StroboConfig& strobo, const TimeGrid& grid,
    std::size_t n_traj, std::uint64_t base_seed,
    const GaussianSpinState& initial = GaussianSpinState::coherent(), unsigned workers = 0);

struct VarianceEstimate {
    double variance = 0.0;
    double std_error = 0.0;  // jackknife
    std::size_t n = 0;
};

/// Unbiased sample variance with its jackknife standard error.
VarianceEstimate jackknife_variance(std::span<const double> samples);

/// Sample variance of q = p cos(θ/2) + x sin(θ/2) at total_time over n_traj >= 100
/// trajectories.
VarianceEstimate ensemble_variance(const AtomLightModel& model, const StroboConfig& strobo,
                                   const TimeGrid& grid, std::size_t n_traj,
                                   std::uint64_t base_seed, double quad_angle,
                                   const GaussianSpinState& initial = GaussianSpinState::coherent(),
                                   unsigned workers = 0);

/// Mean and covariance at every grid point (n_steps + 1 entries), integrated
/// with RK4 on each step; φ is constant on a step.
std::vector<GaussianSpinState> propagate_moments(const AtomLightModel& model,
                                                 const StroboConfig& strobo,
                                                 const TimeGrid& grid,
                                                 const GaussianSpinState& initial =
                                                     GaussianSpinState::coherent());

//===----------------------------------------------------------------------===//
// Checkpoint files
//===----------------------------------------------------------------------===//

struct EnsembleCheckpoint {
    TimeGrid grid;
    StroboConfig strobo;
    double larmor = 0.0;
    std::uint64_t base_seed = 0;
    std::vector<TrajectoryRecord> records;
};

/// Binary layout, all fields little-endian (see docs/checkpoint_format.md):
///   char[8] "SSQTRJ01", u32 version = 1, u32 reserved = 0,
///   u64 n_records, i64 n_steps, f64 dt, f64 total_time,
///   i32 samples_per_period, i32 window_samples, i32 window_start, i32 reserved,
///   f64 duty, f64 omega_m, f64 phase, f64 larmor, u64 base_seed,
///   then per record: u64 seed, f64 final x_A, f64 final p_A,
///   n_steps × {f64 x_A, f64 p_A, f64 x_out, f64 p_out}.
void write_checkpoint(const std::filesystem::path& path, const EnsembleCheckpoint& data);
EnsembleCheckpoint read_checkpoint(const std::filesystem::path& path);

//===----------------------------------------------------------------------===//

template <class Visitor>
std::array<double, 2> TrajectoryIntegrator::run(std::uint64_t seed,
                                                const GaussianSpinState& initial,
                                                const SimulationOptions& options,
                                                LightSteps light, Visitor&& visit) const {
    const NormalStream noise(seed);
    const bool quiet = options.suppress_noise;

    double x = initial.mean_x;
    double p = initial.mean_p;
    if (!quiet) {
        const auto z = noise.pair(initial_state_step, 0);
        const double l11 = std::sqrt(initial.cov.xx);
        const double l21 = l11 > 0.0 ? initial.cov.xp / l11 : 0.0;
        const double l22 = std::sqrt(std::max(0.0, initial.cov.pp - l21 * l21));
        x += l11 * z[0];
        p += l21 * z[0] + l22 * z[1];
    }

    const double dt = grid_.dt;
    const double sigma = std::sqrt(0.5 / dt);
    const double kappa = model_.kappa;
    const double zk = model_.zeta2 * model_.kappa;
    const double gamma_s = model_.gamma_s();
    const double gamma_ex = model_.gamma_ex;
    const double ex_gain = std::sqrt(2.0 * gamma_ex);
    const bool decoheres = gamma_ex > 0.0;

    auto step = [&](std::int64_t j) {
        const bool on = on_[j] != 0;
        const double c = cos_[j];
        const double s = sin_[j];

        double x_in = 0.0;
        double p_in = 0.0;
        if (!quiet && (on || light == LightSteps::all)) {
            const auto z = noise.pair(static_cast<std::uint64_t>(j), 0);
            x_in = sigma * z[0];
            p_in = sigma * z[1];
        }
        double f_x = 0.0;
        double f_p = 0.0;
        if (!quiet && decoheres) {
            const auto z = noise.pair(static_cast<std::uint64_t>(j), 1);
            f_x = sigma * z[0];
            f_p = sigma * z[1];
        }

        if (light == LightSteps::all || (light == LightSteps::pulse_only && on)) {
            const double k_on = on ? kappa : 0.0;
            const double zk_on = on ? zk : 0.0;
            const double x_out = x_in + k_on * (-x * s + p * c);
            const double p_out = p_in - zk_on * (x * c + p * s);
            visit(j, x, p, x_out, p_out);
        }

        double dx = -gamma_ex * x + ex_gain * f_x;
        double dp = -gamma_ex * p + ex_gain * f_p;
        if (on) {
            dx += -gamma_s * x + kappa * p_in * c + zk * x_in * s;
            dp += -gamma_s * p + kappa * p_in * s - zk * x_in * c;
        }
        x += dx * dt;
        p += dp * dt;
    };

    if (decoheres || light == LightSteps::all) {
        for (std::int64_t j = 0; j < grid_.n_steps; ++j) {
            step(j);
        }
    } else {
        // off-pulse steps are the identity without extra decay
        for (const std::int64_t j : pulse_steps_) {
            step(j);
        }
    }
    return {x, p};
}

}  // namespace strobosq

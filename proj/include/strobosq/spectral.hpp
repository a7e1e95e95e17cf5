#pragma once

// Output-light spectrum estimation and the experimental normalization chain.
//
// For a record, y(t) = φ(t)·p_out(t) and Y(ω) = Σ_k y(t_k) e^{iωt_k} dt. The
// periodogram |Y(ω)|²/(dT), averaged over the ensemble, has the same
// expectation as the double-integral definition of S(ω). Frequencies are
// absolute (rad/s): evaluating the transform near Ω is what the lock-in
// demodulation of the experiment does before its FFT.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "strobosq/dynamics.hpp"
#include "strobosq/fitlab.hpp"

namespace strobosq {

struct FrequencyGridSpec {
    double half_span_gammas = 20.0;  // each window covers centre ± span·γ
    double bin_gammas = 0.1;         // bin width in units of γ
    int sidebands = 0;               // add windows at (2n+1)Ω for n = 1..sidebands
};

/// Sorted grid made of windows centred on (2n+1)Ω, n = 0..sidebands.
std::vector<double> frequency_grid(double larmor, double gamma_total,
                                   const FrequencyGridSpec& spec = {});

struct SpectrumResult {
    std::vector<double> freqs;   // rad/s
    std::vector<double> s_est;
    std::vector<double> s_shot;
    std::vector<double> xi_l2;   // s_est / s_shot
    std::vector<double> stderr_est;  // standard error of s_est
    std::vector<double> stderr_xi;   // standard error of xi_l2, reference held fixed
    std::size_t n_ensemble = 0;

    std::size_t size() const { return freqs.size(); }
    /// Equal lengths, positive reference, xi = s_est/s_shot. Throws GridMismatch.
    void validate() const;
};

/// Ensemble-averaged periodogram of stored records. The reference column is
/// the vacuum level 1/2 until squeezing_ratio supplies a measured one. Throws
/// GridMismatch when a record does not match the grid.
SpectrumResult estimate_spectrum(std::span<const TrajectoryRecord> records,
                                 const StroboConfig& strobo, const TimeGrid& grid,
                                 std::span<const double> freqs);

/// Same estimator, streaming trajectories k = 0..n_traj-1 without storing them.
/// Bit-identical for every worker count.
SpectrumResult simulate_spectrum(const AtomLightModel& model, const StroboConfig& strobo,
                                 const TimeGrid& grid, std::span<const double> freqs,
                                 std::size_t n_traj, std::uint64_t base_seed,
                                 const GaussianSpinState& initial = GaussianSpinState::coherent(),
                                 unsigned workers = 0);

inline constexpr double default_exclusion_gammas = 3.0;

struct ShotNoiseFit {
    std::vector<double> curve;  // fitted reference on every bin
    FitResult fit;              // Lorentzian [A, γw, ω0, C]
};

/// Masks bins with |ω - centre| < exclusion_halfwidth, fits the Lorentzian
/// family to the rest and evaluates it on the full grid. The line width is
/// bounded below by the larger of one bin and the exclusion half-width, and
/// the line centre stays inside the window. Throws FitError when
/// the fit does not converge or too few bins remain.
ShotNoiseFit fit_shot_noise_reference(std::span<const double> freqs,
                                      std::span<const double> values, double centre,
                                      double exclusion_halfwidth,
                                      std::span<const double> weights = {});

/// Atom-free (κ = 0) ensemble through the estimator, followed by
/// fit_shot_noise_reference around Ω.
ShotNoiseFit shot_noise_reference(const StroboConfig& strobo, const TimeGrid& grid,
                                  double larmor, std::span<const double> freqs,
                                  std::size_t n_ensemble, double exclusion_halfwidth,
                                  std::uint64_t base_seed, unsigned workers = 0);

/// Bin-wise ξ_L² = s_est / reference. Throws GridMismatch on a length mismatch.
SpectrumResult squeezing_ratio(const SpectrumResult& signal, std::span<const double> reference);

/// Signal over a reference spectrum; the grids must match exactly.
SpectrumResult squeezing_ratio(const SpectrumResult& signal, const SpectrumResult& reference);

struct HeadlineSqueezing {
    double omega = 0.0;
    double xi_l2 = 0.0;
    double std_error = 0.0;
};

/// Minimum ξ_L² over |ω - centre| <= halfwidth.
HeadlineSqueezing headline_squeezing(const SpectrumResult& result, double centre,
                                     double halfwidth);

/// Lorentzian fit of the ξ_L² dip around `centre`: [A, γw, ω0, C] with A < 0
/// for squeezing. γw is the half-width at half-depth.
FitResult fit_dip(const SpectrumResult& result, double centre, double gamma_guess);

/// CSV with header `omega_rad_s,s_est,s_shot,xi_l2,stderr` (stderr of ξ_L²).
void write_spectrum_csv(std::ostream& out, const SpectrumResult& result);

}  // namespace strobosq

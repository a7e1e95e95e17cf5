#pragma once

// Physical constants of the atom-light system and the couplings derived from
// them. All quantities are SI; angular frequencies are in rad/s.

#include <numbers>

namespace strobosq {

namespace constants {
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

struct PhysicalParams {
    double gamma_natural;  // excited-state decay Γ (rad/s)
    double wavelength;     // probe wavelength λ (m)
    double detuning;       // Δ (rad/s), positive = red
    double delta13;        // F'=1 to F'=3 splitting (rad/s)
    double delta23;        // F'=2 to F'=3 splitting (rad/s)
    double beam_area;      // A (m^2)
    double cell_length;    // L (m)
    double photon_flux;    // Φ (photons/s)
    double atom_number;    // N_A
    double larmor;         // Ω (rad/s)
    double gamma_ex;       // extra transverse decay (1/s)
    double t1;             // longitudinal relaxation (s)

    /// Throws std::invalid_argument when a field is out of its physical range.
    void validate() const;
};

/// Rb-87 D2 parameters of the X1 probe. Photon flux follows from 1.18 mW at
/// 780 nm; atom number and gamma_ex are order-of-magnitude placeholders.
PhysicalParams default_params();

/// Φ = P λ / (2π ħ c).
double photon_flux_from_power(double power_w, double wavelength_m);

struct ACoefficients {
    double a0;
    double a1;
    double a2;
};

inline constexpr double default_pole_tolerance = 1e-9;

/// Scalar, vector and tensor polarizability coefficients of the far-detuned
/// D2 interaction. Throws ZeroDetuning for Δ = 0 and PoleError when Δ sits
/// on Δ13 or Δ23 within `pole_rel_tol` (relative to the splitting).
ACoefficients a_coefficients(double detuning, double delta13, double delta23,
                             double pole_rel_tol = default_pole_tolerance);

struct DerivedCouplings {
    double a0;
    double a1;
    double a2;
    double zeta2;        // ζ² = -6 a2 / a1
    double kappa;        // 1/sqrt(s); sign kept from the formula
    double mu_plus;      // beam-splitter weight κ(ζ²+1)/2
    double mu_minus;     // two-mode-squeezing weight κ(ζ²-1)/2
    double gamma_s;      // ζ²κ²/2 (1/s)
    double gamma_total;  // γ = γ_s d + γ_ex (1/s)
    double epsilon;      // γ_s d / γ
};

/// Every observable downstream depends on κ², so the sign of `kappa` is
/// informational. Throws RegimeError when a1 = 0 or ζ² <= 0.
DerivedCouplings derive_couplings(const PhysicalParams& params, double duty);

}  // namespace strobosq

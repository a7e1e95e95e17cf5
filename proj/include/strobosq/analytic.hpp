#pragma once

// Closed-form spin and light squeezing in the ω_m >> γ regime, and the model
// families used to fit measured squeezing curves.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strobosq {

//===----------------------------------------------------------------------===//
// Spin squeezing
//===----------------------------------------------------------------------===//

struct SpinSqueezingInputs {
    double gamma_total = 1.0;  // γ (1/s)
    double epsilon = 1.0;      // γ_s d / γ
    double duty = 1.0;         // d
    double zeta2 = 1.0;        // ζ²
    double time = 0.0;         // squeezing time T (s)
    std::optional<double> t1;  // enables the Wineland factor e^{2T/T1}
    double quad_angle = 0.0;   // measured quadrature q = p cos(θ/2) + x sin(θ/2)

    void validate() const;
};

/// Back-action factor D_A(θ) = ½(1 - cosθ·sinc(πd))ζ⁻² + ½(1 + cosθ·sinc(πd))ζ².
double back_action_factor(double duty, double zeta2, double quad_angle);

/// Variance of the measured spin quadrature at time T (CSS value 1/2).
double spin_variance(const SpinSqueezingInputs& in);

/// ξ² = 2 Var, times e^{2T/T1} when `t1` is set.
double spin_squeezing_param(const SpinSqueezingInputs& in);

/// -10 log10(ξ²); positive values mean squeezing.
double spin_squeezing_db(const SpinSqueezingInputs& in);

/// Squeezing in dB for a given ξ².
double to_db(double xi2);

//===----------------------------------------------------------------------===//
// Light squeezing
//===----------------------------------------------------------------------===//

struct LightSpectrumInputs {
    double gamma_total = 1.0;
    double epsilon = 1.0;
    double zeta2 = 1.0;
    double duty = 1.0;
    double time = 1.0;     // T (s)
    double larmor = 100.0; // Ω (rad/s)
    int n_max = 0;         // sideband cutoff; 0 selects ceil(10/d)
    std::optional<double> t1;

    void validate() const;
    int cutoff() const;
    /// Ω/γ > 10; the closed form assumes well separated sidebands.
    bool in_validity_regime() const;
};

struct TimeFactors {
    double f1;  // (1 - e^{-γT})² / γT
    double f2;  // 2 - 2(1 - e^{-γT}) / γT
};

TimeFactors time_factors(double gamma_t);

struct SidebandTerms {
    double corr;  // photon-photon correlation (squeezing) term
    double qba;   // back-action of the initial spin noise
    double thermal;  // reservoir noise at ε < 1
    double total() const { return corr - qba - thermal; }
};

/// Weight D_L(n) of the Lorentzian centred at (2n+1)Ω.
SidebandTerms sideband_terms(int n, const LightSpectrumInputs& in);

struct LightSpectrumValue {
    double s_lss;  // output-light spectrum, shot noise = 1/2
    double xi_l2;  // s_lss / (1/2), times e^{2T/T1} when t1 is set
    bool truncation_warning = false;  // |n| = n_max term above 1e-6 relative
    bool regime_warning = false;      // Ω/γ <= 10
};

/// Sideband-resolved spectrum, sum truncated to |n| <= cutoff.
LightSpectrumValue light_spectrum(double omega, const LightSpectrumInputs& in);

/// Isolated-peak squeezing 1 - D_L(n) at the n-th sideband, ω = (2n+1)Ω,
/// without contributions from the neighbouring Lorentzians.
double sideband_squeezing(int n, const LightSpectrumInputs& in);

//===----------------------------------------------------------------------===//
// Fit model families
//===----------------------------------------------------------------------===//

enum class ModelId { time_exp, duty_sinc, angle_cos, sideband_ab, time_f1f2, lorentzian };

/// Throws UnknownModel.
ModelId parse_model_id(std::string_view name);
std::string_view model_name(ModelId id);
int model_parameter_count(ModelId id);
std::vector<std::string> model_parameter_names(ModelId id);

/// Quantities held fixed while fitting.
struct ModelContext {
    std::optional<double> t1;    // Wineland / phenomenological e^{2T/T1}
    int sideband = 0;            // sideband_ab with abscissa d
    std::optional<double> duty;  // sideband_ab with abscissa n at fixed d
};

/// Parameters and abscissa per family:
///   time_exp     [b1, b2, γ]      x = T   (b1 + b2 e^{-2γT}) e^{2T/T1}
///   duty_sinc    [c1, c2]         x = d   c1 + c2 sinc(πd)
///   angle_cos    [d1, d2]         x = θ   d1 + d2 cos θ
///   sideband_ab  [e1, e2]         x = d (or n when ctx.duty is set)
///                                          1 - e1 α(n,d) - e2 β(n,d)
///   time_f1f2    [g1, g2, γ]      x = T   (1 - g1 f1 - g2 f2) e^{2T/T1}
///   lorentzian   [A, γw, ω0, C]   x = ω   A γw²/(γw² + (ω-ω0)²) + C
double fit_models(ModelId id, std::span<const double> params, double x,
                  const ModelContext& ctx = {});

/// Coefficients of each family implied by the closed forms, so that the
/// families reproduce spin_squeezing_param / sideband_squeezing exactly.
struct LinearPair {
    double first;
    double second;
};
LinearPair time_exp_coefficients(const SpinSqueezingInputs& in);   // b1, b2
LinearPair duty_sinc_coefficients(const SpinSqueezingInputs& in);  // c1, c2 (incl. Wineland)
LinearPair angle_cos_coefficients(const SpinSqueezingInputs& in);  // d1, d2 (incl. Wineland)
LinearPair sideband_ab_coefficients(const LightSpectrumInputs& in);  // e1, e2
LinearPair time_f1f2_coefficients(int n, const LightSpectrumInputs& in);  // g1, g2

}  // namespace strobosq

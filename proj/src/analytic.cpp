#include "strobosq/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "strobosq/errors.hpp"
#include "strobosq/strobe.hpp"

namespace strobosq {

namespace {

constexpr double pi = std::numbers::pi;

void check_common(double gamma_total, double epsilon, double duty, double zeta2) {
    if (!(gamma_total > 0.0) || !std::isfinite(gamma_total)) {
        throw std::invalid_argument("gamma_total must be positive");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
    if (!(duty > 0.0 && duty <= 1.0)) {
        throw std::invalid_argument("duty cycle must lie in (0, 1]");
    }
    if (!(zeta2 > 0.0) || !std::isfinite(zeta2)) {
        throw RegimeError("zeta^2 must be positive");
    }
}

double wineland_factor(const std::optional<double>& t1, double time) {
    return t1 ? std::exp(2.0 * time / *t1) : 1.0;
}

}  // namespace

void SpinSqueezingInputs::validate() const {
    check_common(gamma_total, epsilon, duty, zeta2);
    if (!(time >= 0.0)) {
        throw std::invalid_argument("time must be non-negative");
    }
    if (t1 && !(*t1 > 0.0)) {
        throw std::invalid_argument("T1 must be positive");
    }
}

double back_action_factor(double duty, double zeta2, double quad_angle) {
    const double s = std::cos(quad_angle) * sinc(pi * duty);
    return 0.5 * (1.0 - s) / zeta2 + 0.5 * (1.0 + s) * zeta2;
}

double spin_variance(const SpinSqueezingInputs& in) {
    in.validate();
    const double decay = std::exp(-2.0 * in.gamma_total * in.time);
    const double grown = -std::expm1(-2.0 * in.gamma_total * in.time);
    const double back_action = back_action_factor(in.duty, in.zeta2, in.quad_angle);
    const double thermal = (1.0 - in.epsilon) * grown;
    return 0.5 * (decay + in.epsilon * grown * back_action + thermal);
}

double spin_squeezing_param(const SpinSqueezingInputs& in) {
    return 2.0 * spin_variance(in) * wineland_factor(in.t1, in.time);
}

double to_db(double xi2) { return 0.0 - 10.0 * std::log10(xi2); }

double spin_squeezing_db(const SpinSqueezingInputs& in) {
    return to_db(spin_squeezing_param(in));
}

void LightSpectrumInputs::validate() const {
    check_common(gamma_total, epsilon, duty, zeta2);
    if (!(time > 0.0)) {
        throw std::invalid_argument("time must be positive");
    }
    if (!(larmor > 0.0)) {
        throw std::invalid_argument("larmor frequency must be positive");
    }
    if (n_max < 0) {
        throw std::invalid_argument("sideband cutoff must be non-negative");
    }
    if (t1 && !(*t1 > 0.0)) {
        throw std::invalid_argument("T1 must be positive");
    }
}

int LightSpectrumInputs::cutoff() const {
    return n_max > 0 ? n_max : static_cast<int>(std::ceil(10.0 / duty));
}

bool LightSpectrumInputs::in_validity_regime() const { return larmor / gamma_total > 10.0; }

TimeFactors time_factors(double gamma_t) {
    if (gamma_t == 0.0) {
        return {0.0, 0.0};
    }
    const double rise = -std::expm1(-gamma_t);
    return {rise * rise / gamma_t, 2.0 - 2.0 * rise / gamma_t};
}

SidebandTerms sideband_terms(int n, const LightSpectrumInputs& in) {
    const auto [f1, f2] = time_factors(in.gamma_total * in.time);
    const auto [alpha, beta] = alpha_beta(n, in.duty);
    const double eps = in.epsilon;
    const double z2 = in.zeta2;
    const double z4 = z2 * z2;

    SidebandTerms t{};
    t.corr = eps * f2 * alpha;
    t.qba = eps * z2 * f1 * alpha +
            eps * eps * (f2 - f1) * (0.5 * (1.0 + z4) * alpha + (1.0 - z4) * beta);
    t.thermal = eps * (1.0 - eps) * z2 * (f2 - f1) * alpha;
    return t;
}

LightSpectrumValue light_spectrum(double omega, const LightSpectrumInputs& in) {
    in.validate();
    const int cutoff = in.cutoff();
    const double g2 = in.gamma_total * in.gamma_total;

    auto term = [&](int n) {
        const double detune = omega - (2.0 * n + 1.0) * in.larmor;
        return g2 * sideband_terms(n, in).total() / (g2 + detune * detune);
    };

    // outermost sidebands first so the small terms are not swamped
    double sum = 0.0;
    for (int n = cutoff; n >= 1; --n) {
        sum += term(n) + term(-n);
    }
    sum += term(0);
    const double edge = std::max(std::abs(term(cutoff)), std::abs(term(-cutoff)));

    LightSpectrumValue v;
    v.s_lss = 0.5 * (1.0 - sum);
    v.xi_l2 = 2.0 * v.s_lss * wineland_factor(in.t1, in.time);
    v.truncation_warning = sum != 0.0 && edge > 1e-6 * std::abs(sum);
    v.regime_warning = !in.in_validity_regime();
    return v;
}

double sideband_squeezing(int n, const LightSpectrumInputs& in) {
    in.validate();
    if (n < 0) {
        throw std::invalid_argument("sideband index must be non-negative");
    }
    return (1.0 - sideband_terms(n, in).total()) * wineland_factor(in.t1, in.time);
}

LinearPair time_exp_coefficients(const SpinSqueezingInputs& in) {
    in.validate();
    const double da = back_action_factor(in.duty, in.zeta2, in.quad_angle);
    return {in.epsilon * da + 1.0 - in.epsilon, in.epsilon * (1.0 - da)};
}

LinearPair duty_sinc_coefficients(const SpinSqueezingInputs& in) {
    in.validate();
    const double decay = std::exp(-2.0 * in.gamma_total * in.time);
    const double grown = 1.0 - decay;
    const double w = wineland_factor(in.t1, in.time);
    const double inv = 1.0 / in.zeta2;
    const double c1 = decay + (1.0 - in.epsilon) * grown +
                      in.epsilon * grown * 0.5 * (inv + in.zeta2);
    const double c2 = in.epsilon * grown * std::cos(in.quad_angle) * 0.5 * (in.zeta2 - inv);
    return {w * c1, w * c2};
}

LinearPair angle_cos_coefficients(const SpinSqueezingInputs& in) {
    // same constant as the duty family; the cosine carries sinc(πd) instead
    auto at_zero = in;
    at_zero.quad_angle = 0.0;
    const auto c = duty_sinc_coefficients(at_zero);
    return {c.first, c.second * sinc(pi * in.duty)};
}

LinearPair sideband_ab_coefficients(const LightSpectrumInputs& in) {
    in.validate();
    const auto [f1, f2] = time_factors(in.gamma_total * in.time);
    const double eps = in.epsilon;
    const double z2 = in.zeta2;
    const double z4 = z2 * z2;
    const double e1 = eps * f2 - eps * z2 * f1 - eps * eps * (f2 - f1) * 0.5 * (1.0 + z4) -
                      eps * (1.0 - eps) * z2 * (f2 - f1);
    const double e2 = -eps * eps * (f2 - f1) * (1.0 - z4);
    return {e1, e2};
}

LinearPair time_f1f2_coefficients(int n, const LightSpectrumInputs& in) {
    in.validate();
    const auto [alpha, beta] = alpha_beta(n, in.duty);
    const double eps = in.epsilon;
    const double z2 = in.zeta2;
    const double z4 = z2 * z2;
    const double mixed = eps * eps * (0.5 * (1.0 + z4) * alpha + (1.0 - z4) * beta);
    const double thermal = eps * (1.0 - eps) * z2 * alpha;
    const double g2 = eps * alpha - mixed - thermal;
    const double g1 = -eps * z2 * alpha + mixed + thermal;
    return {g1, g2};
}

}  // namespace strobosq

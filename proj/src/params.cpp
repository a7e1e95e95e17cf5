#include "strobosq/params.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "strobosq/errors.hpp"

namespace strobosq {

namespace {

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string(name) + " must be positive and finite");
    }
}

}  // namespace

void PhysicalParams::validate() const {
    require_positive(gamma_natural, "gamma_natural");
    require_positive(wavelength, "wavelength");
    require_positive(beam_area, "beam_area");
    require_positive(cell_length, "cell_length");
    require_positive(photon_flux, "photon_flux");
    require_positive(atom_number, "atom_number");
    require_positive(larmor, "larmor");
    require_positive(t1, "t1");
    if (!(gamma_ex >= 0.0) || !std::isfinite(gamma_ex)) {
        throw std::invalid_argument("gamma_ex must be non-negative and finite");
    }
    if (detuning == 0.0 || std::isnan(detuning)) {
        throw std::invalid_argument("detuning must be nonzero");
    }
}

double photon_flux_from_power(double power_w, double wavelength_m) {
    require_positive(wavelength_m, "wavelength");
    if (!(power_w >= 0.0)) {
        throw std::invalid_argument("optical power must be non-negative");
    }
    return power_w * wavelength_m /
           (constants::two_pi * constants::hbar * constants::speed_of_light);
}

PhysicalParams default_params() {
    using constants::two_pi;
    PhysicalParams p{};
    p.gamma_natural = two_pi * 6.07e6;
    p.wavelength = 780e-9;
    p.detuning = two_pi * 1.66e9;
    p.delta13 = two_pi * 423.60e6;
    p.delta23 = two_pi * 266.65e6;
    p.beam_area = 7e-3 * 7e-3;
    p.cell_length = 20e-3;
    p.photon_flux = photon_flux_from_power(1.18e-3, p.wavelength);
    p.atom_number = 1e11;  // placeholder
    p.larmor = two_pi * 499.60e3;
    p.gamma_ex = 100.0;  // placeholder
    p.t1 = 18e-3;
    return p;
}

ACoefficients a_coefficients(double detuning, double delta13, double delta23,
                             double pole_rel_tol) {
    if (detuning == 0.0) {
        throw ZeroDetuning("detuning is zero");
    }
    auto near_pole = [&](double split) {
        return std::abs(detuning - split) <= pole_rel_tol * std::abs(split);
    };
    if (near_pole(delta13) || near_pole(delta23)) {
        throw PoleError("detuning coincides with an excited-state splitting");
    }

    const double r13 = 1.0 / (1.0 - delta13 / detuning);
    const double r23 = 1.0 / (1.0 - delta23 / detuning);
    constexpr double sqrt2 = std::numbers::sqrt2;

    ACoefficients a{};
    a.a0 = sqrt2 / 20.0 * (r13 + 15.0 * r23 + 24.0);
    a.a1 = sqrt2 / 100.0 * (-15.0 * r13 - 25.0 * r23 + 140.0);
    a.a2 = sqrt2 / 40.0 * (r13 - 5.0 * r23 + 4.0);
    return a;
}

DerivedCouplings derive_couplings(const PhysicalParams& params, double duty) {
    params.validate();
    if (!(duty > 0.0 && duty <= 1.0)) {
        throw std::invalid_argument("duty cycle must lie in (0, 1]");
    }

    const auto a = a_coefficients(params.detuning, params.delta13, params.delta23);
    if (a.a1 == 0.0) {
        throw RegimeError("vector coefficient a1 vanishes at this detuning");
    }

    DerivedCouplings c{};
    c.a0 = a.a0;
    c.a1 = a.a1;
    c.a2 = a.a2;
    c.zeta2 = -6.0 * a.a2 / a.a1;
    if (!(c.zeta2 > 0.0)) {
        throw RegimeError("zeta^2 <= 0: the unbalanced interaction requires red detuning");
    }

    c.kappa = -params.gamma_natural * params.wavelength * params.wavelength * a.a1 *
              std::sqrt(params.photon_flux * params.atom_number) /
              (16.0 * std::numbers::pi * params.beam_area * params.detuning);
    c.mu_plus = c.kappa * (c.zeta2 + 1.0) / 2.0;
    c.mu_minus = c.kappa * (c.zeta2 - 1.0) / 2.0;
    c.gamma_s = c.zeta2 * c.kappa * c.kappa / 2.0;
    c.gamma_total = c.gamma_s * duty + params.gamma_ex;
    c.epsilon = c.gamma_s * duty / c.gamma_total;
    return c;
}

}  // namespace strobosq

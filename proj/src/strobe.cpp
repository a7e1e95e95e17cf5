#include "strobosq/strobe.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace strobosq {

namespace {
constexpr double pi = std::numbers::pi;
constexpr double edge_snap = 1e-12;
}  // namespace

void StroboConfig::validate() const {
    if (!(duty > 0.0 && duty <= 1.0)) {
        throw std::invalid_argument("duty cycle must lie in (0, 1]");
    }
    if (!(omega_m > 0.0) || !std::isfinite(omega_m)) {
        throw std::invalid_argument("stroboscopic frequency must be positive");
    }
    if (n_max < 1) {
        throw std::invalid_argument("harmonic cutoff must be >= 1");
    }
    if (!std::isfinite(phase)) {
        throw std::invalid_argument("phase must be finite");
    }
}

double StroboConfig::period() const { return 2.0 * pi / omega_m; }

StroboConfig make_strobo(double duty, double larmor, double phase, int n_max) {
    StroboConfig cfg;
    cfg.duty = duty;
    cfg.omega_m = 2.0 * larmor;
    cfg.phase = phase;
    cfg.n_max = n_max > 0 ? n_max : static_cast<int>(std::ceil(10.0 / duty));
    cfg.validate();
    return cfg;
}

double profile(double t, const StroboConfig& cfg) {
    if (cfg.duty >= 1.0) {
        return 1.0;
    }
    // offset from the window centre in units of periods, wrapped to [-1/2, 1/2)
    const double cycles = (t - cfg.phase / cfg.omega_m) / cfg.period();
    double u = cycles - std::floor(cycles + 0.5);
    const double half = 0.5 * cfg.duty;
    if (std::abs(u + half) < edge_snap) {
        return 0.0;
    }
    if (std::abs(u - half) < edge_snap) {
        return 1.0;
    }
    return (u > -half && u <= half) ? 1.0 : 0.0;
}

double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

double fourier_coeff(int n, double d) { return d * sinc(pi * n * d); }

AlphaBeta alpha_beta(int n, double d) {
    const double s_n = sinc(pi * n * d);
    const double s_n1 = sinc(pi * (n + 1) * d);
    return {s_n * s_n + s_n1 * s_n1, sinc(pi * d) * s_n * s_n1};
}

double parseval_sum(double d, int n_cut) {
    // symmetric in n, so add the n = 0 term once and the rest twice,
    // smallest terms first
    double tail = 0.0;
    for (int n = n_cut; n >= 1; --n) {
        const double a = fourier_coeff(n, d);
        tail += a * a;
    }
    const double a0 = fourier_coeff(0, d);
    return a0 * a0 + 2.0 * tail;
}

double profile_partial_sum(double t, const StroboConfig& cfg) {
    const double tau = t - cfg.phase / cfg.omega_m;
    double sum = fourier_coeff(0, cfg.duty);
    for (int n = 1; n <= cfg.n_max; ++n) {
        sum += 2.0 * fourier_coeff(n, cfg.duty) * std::cos(n * cfg.omega_m * tau);
    }
    return sum;
}

}  // namespace strobosq

#pragma once

// Rectangular stroboscopic pulse train φ(t) and its Fourier quantities.

namespace strobosq {

struct StroboConfig {
    double duty = 1.0;     // d in (0, 1]
    double omega_m = 1.0;  // stroboscopic angular frequency, 2Ω (rad/s)
    double phase = 0.0;    // window-centre offset within a period (rad)
    int n_max = 1;         // harmonic cutoff for truncated sums

    void validate() const;
    double period() const;
};

/// Stroboscopic configuration locked to twice the Larmor frequency.
StroboConfig make_strobo(double duty, double larmor, double phase = 0.0, int n_max = 0);

/// Pulse window indicator. The window of width d·period is centred on
/// t = phase/ω_m (mod period), which makes every Fourier coefficient real.
/// Points exactly on an edge (to 1e-12 of a period) follow the half-open
/// rule: the leading edge is outside, the trailing edge inside.
double profile(double t, const StroboConfig& cfg);

/// sin(x)/x with sinc(0) = 1.
double sinc(double x);

/// A_n = d·sinc(πnd).
double fourier_coeff(int n, double d);

struct AlphaBeta {
    double alpha;
    double beta;
};

/// α(n) = sinc²(πnd) + sinc²(π(n+1)d),
/// β(n) = sinc(πd)·sinc(πnd)·sinc(π(n+1)d).
AlphaBeta alpha_beta(int n, double d);

/// Σ_{|n|<=n_cut} A_n², which tends to d.
double parseval_sum(double d, int n_cut);

/// Fourier partial sum Σ_{|n|<=n_max} A_n e^{i n ω_m (t - t_c)} (real part).
double profile_partial_sum(double t, const StroboConfig& cfg);

}  // namespace strobosq

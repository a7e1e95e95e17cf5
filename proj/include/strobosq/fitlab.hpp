#pragma once

// Damped least squares (Levenberg) over the model families of analytic.hpp.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "strobosq/analytic.hpp"

namespace strobosq {

struct FitProblem {
    ModelId model = ModelId::lorentzian;
    ModelContext context;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> weights;  // inverse variances; empty means unweighted
    std::vector<double> initial;
    std::vector<double> lower;    // empty means unbounded
    std::vector<double> upper;

    /// Throws std::invalid_argument on mismatched sizes, fewer than
    /// n_params + 1 points, negative weights or a non-finite initial guess.
    void validate() const;
};

struct FitResult {
    std::vector<double> params;
    Eigen::MatrixXd covariance;     // s²·(JᵀWJ)⁺ with s² = RSS/(n - p)
    double rss = 0.0;               // Σ w (y - f)²
    bool converged = false;
    int iterations = 0;
    std::vector<double> rss_history;  // RSS after the initial guess and each accepted step
    std::string message;
};

/// Levenberg iteration with a central-difference Jacobian (relative step
/// 10⁻⁶). The damping term is λ·diag(s²), where s² is the running maximum of
/// diag(JᵀWJ); in those normalized coordinates λ₀ = 10⁻³·max diag = 10⁻³, and
/// λ is multiplied by 10 on a rejected step and divided by 10 on an accepted
/// one. Bounds are enforced by projection. Converges when an accepted step
/// lowers the RSS by a relative amount below `tol`, or when no step can lower
/// it any more. After `max_iter` iterations the best point
/// is returned with converged = false. Throws SingularJacobian when the model
/// produces non-finite values or no parameter influences the residual.
FitResult fit(const FitProblem& problem, double tol = 1e-12, int max_iter = 500);

}  // namespace strobosq

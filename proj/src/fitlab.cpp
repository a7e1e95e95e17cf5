#include "strobosq/fitlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "strobosq/errors.hpp"

namespace strobosq {

namespace {

struct Data {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
};

// Points in a canonical order so that the result does not depend on how the
// caller arranged them.
Data canonical(const FitProblem& pb) {
    const std::size_t n = pb.x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto weight = [&](std::size_t i) { return pb.weights.empty() ? 1.0 : pb.weights[i]; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(pb.x[a], pb.y[a], weight(a)) <
               std::make_tuple(pb.x[b], pb.y[b], weight(b));
    });
    Data d{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = order[k];
        d.x[static_cast<Eigen::Index>(k)] = pb.x[i];
        d.y[static_cast<Eigen::Index>(k)] = pb.y[i];
        d.w[static_cast<Eigen::Index>(k)] = weight(i);
    }
    return d;
}

class Objective {
public:
    Objective(const FitProblem& pb, Data data) : pb_(pb), data_(std::move(data)) {}

    Eigen::Index size() const { return data_.x.size(); }

    Eigen::VectorXd model(const Eigen::VectorXd& p) const {
        Eigen::VectorXd f(size());
        const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < size(); ++i) {
            f[i] = fit_models(pb_.model, ps, data_.x[i], pb_.context);
        }
        return f;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& p) const { return data_.y - model(p); }

    double rss(const Eigen::VectorXd& r) const { return (data_.w.array() * r.array().square()).sum(); }

    // ∂f/∂p by central differences
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
        Eigen::MatrixXd j(size(), p.size());
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double h = p[k] != 0.0 ? 1e-6 * std::abs(p[k]) : 1e-6;
            Eigen::VectorXd hi = p;
            Eigen::VectorXd lo = p;
            hi[k] += h;
            lo[k] -= h;
            j.col(k) = (model(hi) - model(lo)) / (hi[k] - lo[k]);
        }
        if (!j.allFinite()) {
            throw SingularJacobian("model Jacobian is not finite");
        }
        return j;
    }

    const Eigen::VectorXd& weights() const { return data_.w; }

private:
    const FitProblem& pb_;
    Data data_;
};

}  // namespace

void FitProblem::validate() const {
    const auto n_params = static_cast<std::size_t>(model_parameter_count(model));
    if (x.size() != y.size()) {
        throw std::invalid_argument("abscissa and ordinate lengths differ");
    }
    if (!weights.empty() && weights.size() != x.size()) {
        throw std::invalid_argument("weights length differs from data length");
    }
    if (x.size() < n_params + 1) {
        throw std::invalid_argument("need at least n_params + 1 data points");
    }
    if (initial.size() != n_params) {
        throw std::invalid_argument("initial guess has the wrong length");
    }
    for (double v : initial) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("initial guess must be finite");
        }
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("weights must be finite and non-negative");
        }
    }
    if ((!lower.empty() && lower.size() != n_params) ||
        (!upper.empty() && upper.size() != n_params)) {
        throw std::invalid_argument("bounds have the wrong length");
    }
    for (std::size_t k = 0; k < n_params; ++k) {
        const double lo = lower.empty() ? -INFINITY : lower[k];
        const double hi = upper.empty() ? INFINITY : upper[k];
        if (lo > hi) {
            throw std::invalid_argument("lower bound exceeds upper bound");
        }
    }
}

FitResult fit(const FitProblem& problem, double tol, int max_iter) {
    problem.validate();
    if (!(tol > 0.0)) {
        throw std::invalid_argument("tolerance must be positive");
    }
    const Objective obj(problem, canonical(problem));
    const auto n_params = static_cast<Eigen::Index>(problem.initial.size());

    Eigen::VectorXd lower = Eigen::VectorXd::Constant(n_params, -INFINITY);
    Eigen::VectorXd upper = Eigen::VectorXd::Constant(n_params, INFINITY);
    for (Eigen::Index k = 0; k < n_params; ++k) {
        if (!problem.lower.empty()) {
            lower[k] = problem.lower[static_cast<std::size_t>(k)];
        }
        if (!problem.upper.empty()) {
            upper[k] = problem.upper[static_cast<std::size_t>(k)];
        }
    }
    auto project = [&](Eigen::VectorXd p) { return p.cwiseMax(lower).cwiseMin(upper); };

    Eigen::VectorXd p = project(Eigen::Map<const Eigen::VectorXd>(problem.initial.data(), n_params));
    Eigen::VectorXd r = obj.residual(p);
    double rss = obj.rss(r);
    if (!std::isfinite(rss)) {
        throw SingularJacobian("model is not finite at the initial guess");
    }

    FitResult res;
    res.rss_history.push_back(rss);
    const Eigen::VectorXd& w = obj.weights();

    // damping acts in column-normalized coordinates: diag(scale²) holds the
    // running maximum of diag(JᵀWJ), so λ is dimensionless
    double lambda = -1.0;
    Eigen::VectorXd scale2 = Eigen::VectorXd::Zero(n_params);
    Eigen::MatrixXd jtwj;
    bool done = false;
    int iter = 0;
    for (; iter < max_iter && !done; ++iter) {
        const Eigen::MatrixXd j = obj.jacobian(p);
        jtwj = j.transpose() * w.asDiagonal() * j;
        const Eigen::VectorXd grad = j.transpose() * (w.array() * r.array()).matrix();
        const double max_diag = jtwj.diagonal().maxCoeff();
        if (!(max_diag > 0.0)) {
            throw SingularJacobian("no parameter influences the residual");
        }
        if (rss == 0.0) {
            res.converged = true;
            res.message = "exact fit";
            break;
        }
        scale2 = scale2.cwiseMax(jtwj.diagonal());
        const Eigen::VectorXd damping =
            (scale2.array() > 0.0).select(scale2, Eigen::VectorXd::Constant(n_params, max_diag));
        if (lambda < 0.0) {
            // max diagonal of the normalized JᵀWJ is 1
            lambda = 1e-3;
        }
        constexpr double lambda_cap = 1e16;

        // parameters pinned at a bound with the descent pointing outward are
        // held fixed, so the step is solved over the free ones only
        Eigen::VectorXd rhs = grad;
        std::vector<Eigen::Index> pinned;
        for (Eigen::Index k = 0; k < n_params; ++k) {
            if ((p[k] <= lower[k] && grad[k] < 0.0) || (p[k] >= upper[k] && grad[k] > 0.0)) {
                pinned.push_back(k);
                rhs[k] = 0.0;
            }
        }

        // inner loop: raise λ until a step lowers the RSS
        for (;;) {
            Eigen::MatrixXd a = jtwj;
            a.diagonal() += lambda * damping;
            for (Eigen::Index k : pinned) {
                a.row(k).setZero();
                a.col(k).setZero();
                a(k, k) = 1.0;
            }
            const Eigen::VectorXd step = a.ldlt().solve(rhs);
            const Eigen::VectorXd trial = project(p + step);
            const Eigen::VectorXd r_trial = obj.residual(trial);
            const double rss_trial = obj.rss(r_trial);
            if (std::isfinite(rss_trial) && rss_trial < rss) {
                const double decrease = (rss - rss_trial) / rss;
                p = trial;
                r = r_trial;
                rss = rss_trial;
                res.rss_history.push_back(rss);
                lambda /= 10.0;
                if (decrease < tol) {
                    res.converged = true;
                    res.message = "relative RSS decrease below tolerance";
                    done = true;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > lambda_cap || (trial - p).norm() == 0.0) {
                res.converged = true;
                res.message = "no further decrease possible";
                done = true;
                break;
            }
        }
    }
    if (!done && !res.converged) {
        res.message = "maximum iterations reached";
    }

    res.iterations = iter;
    res.params.assign(p.data(), p.data() + p.size());
    res.rss = rss;

    const Eigen::MatrixXd j = obj.jacobian(p);
    jtwj = j.transpose() * w.asDiagonal() * j;
    const auto dof = static_cast<double>(obj.size() - n_params);
    const double s2 = dof > 0.0 ? rss / dof : 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtwj, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? sv[0] * 1e-12 * static_cast<double>(n_params) : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv[k] > cutoff) {
            inv[k] = 1.0 / sv[k];
        }
    }
    Eigen::MatrixXd cov = s2 * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    res.covariance = 0.5 * (cov + cov.transpose());
    return res;
}

}  // namespace strobosq

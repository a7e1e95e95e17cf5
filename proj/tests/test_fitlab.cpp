#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "strobosq/errors.hpp"
#include "strobosq/fitlab.hpp"

using namespace strobosq;

namespace {

FitProblem time_exp_problem(double noise, std::uint64_t seed) {
    FitProblem pb;
    pb.model = ModelId::time_exp;
    const std::array truth{0.15, 0.85, 1000.0};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    for (int i = 0; i < 40; ++i) {
        const double t = 5e-5 * i;
        const double v = fit_models(pb.model, truth, t);
        pb.x.push_back(t);
        pb.y.push_back(v * (1.0 + noise * n01(rng)));
    }
    pb.initial = {0.5, 0.5, 300.0};
    return pb;
}

FitProblem lorentzian_problem() {
    FitProblem pb;
    pb.model = ModelId::lorentzian;
    const std::array truth{-0.3, 1000.0, 1e5, 0.5};
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.005);
    for (int i = -200; i <= 200; ++i) {
        const double w = 1e5 + 100.0 * i;
        pb.x.push_back(w);
        pb.y.push_back(fit_models(pb.model, truth, w) + noise(rng));
    }
    pb.initial = {-0.1, 2000.0, 1e5 + 500.0, 0.45};
    return pb;
}

}  // namespace

TEST_CASE("exact data is recovered") {
    const auto r = fit(time_exp_problem(0.0, 0));
    CHECK(r.converged);
    CHECK(r.params[0] == doctest::Approx(0.15).epsilon(1e-8));
    CHECK(r.params[1] == doctest::Approx(0.85).epsilon(1e-8));
    CHECK(r.params[2] == doctest::Approx(1000.0).epsilon(1e-8));
    CHECK(r.rss < 1e-20);
}

TEST_CASE("rate under one percent noise") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = fit(time_exp_problem(0.01, seed));
        CAPTURE(seed);
        CHECK(r.converged);
        CHECK(r.params[2] == doctest::Approx(1000.0).epsilon(0.05));
    }
}

TEST_CASE("Lorentzian with a floor") {
    const auto r = fit(lorentzian_problem());
    CHECK(r.converged);
    CHECK(r.params[3] == doctest::Approx(0.5).epsilon(0.01));
    CHECK(r.params[1] == doctest::Approx(1000.0).epsilon(0.05));
    CHECK(r.params[2] == doctest::Approx(1e5).epsilon(1e-3));
}

TEST_CASE("RSS history never increases") {
    for (const auto& pb : {time_exp_problem(0.01, 3), lorentzian_problem()}) {
        const auto r = fit(pb);
        REQUIRE(r.rss_history.size() >= 2);
        for (std::size_t i = 1; i < r.rss_history.size(); ++i) {
            CHECK(r.rss_history[i] <= r.rss_history[i - 1]);
        }
        CHECK(r.rss_history.back() == r.rss);
    }
}

TEST_CASE("scaling the data scales the amplitudes") {
    const auto pb = time_exp_problem(0.01, 7);
    const auto base = fit(pb);
    for (double c : {1e-3, 7.0, 1e4}) {
        auto scaled = pb;
        for (auto& v : scaled.y) {
            v *= c;
        }
        scaled.initial[0] *= c;
        scaled.initial[1] *= c;
        const auto r = fit(scaled);
        CAPTURE(c);
        CHECK(r.params[0] == doctest::Approx(c * base.params[0]).epsilon(1e-10));
        CHECK(r.params[1] == doctest::Approx(c * base.params[1]).epsilon(1e-10));
        CHECK(r.params[2] == doctest::Approx(base.params[2]).epsilon(1e-10));
    }
}

TEST_CASE("rescaling time rescales the rate") {
    const auto pb = time_exp_problem(0.01, 8);
    const auto base = fit(pb);
    auto scaled = pb;
    for (auto& t : scaled.x) {
        t *= 1e3;
    }
    scaled.initial[2] /= 1e3;
    const auto r = fit(scaled);
    CHECK(r.params[2] == doctest::Approx(base.params[2] / 1e3).epsilon(1e-8));
    CHECK(r.params[0] == doctest::Approx(base.params[0]).epsilon(1e-8));
}

TEST_CASE("point order does not matter") {
    const auto pb = lorentzian_problem();
    const auto base = fit(pb);
    std::vector<std::size_t> idx(pb.x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), std::mt19937_64(99));
    auto perm = pb;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        perm.x[i] = pb.x[idx[i]];
        perm.y[i] = pb.y[idx[i]];
    }
    const auto r = fit(perm);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(r.params[k] == doctest::Approx(base.params[k]).epsilon(1e-9));
    }
}

TEST_CASE("weights act as inverse variances") {
    // doubling every weight changes neither the optimum nor the covariance
    const auto pb = time_exp_problem(0.01, 4);
    auto w1 = pb;
    w1.weights.assign(pb.x.size(), 1.0);
    auto w2 = pb;
    w2.weights.assign(pb.x.size(), 2.0);
    const auto a = fit(w1);
    const auto b = fit(w2);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(a.params[k] == doctest::Approx(b.params[k]).epsilon(1e-9));
        CHECK(a.covariance(k, k) == doctest::Approx(b.covariance(k, k)).epsilon(1e-6));
    }
    CHECK(b.rss == doctest::Approx(2 * a.rss).epsilon(1e-9));
}

TEST_CASE("covariance is symmetric and positive semidefinite") {
    const auto r = fit(lorentzian_problem());
    REQUIRE(r.covariance.rows() == 4);
    CHECK((r.covariance - r.covariance.transpose()).norm() <= 1e-12 * r.covariance.norm());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.covariance);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * eig.eigenvalues().maxCoeff());
    // the floor is pinned by 401 points with σ = 0.005
    CHECK(std::sqrt(r.covariance(3, 3)) < 5e-3);
}

TEST_CASE("bounds are respected") {
    auto pb = lorentzian_problem();
    pb.lower = {-1.0, 100.0, 1e5 + 2000.0, 0.0};
    pb.upper = {1.0, 1e4, 1e5 + 4000.0, 1.0};
    pb.initial[2] = 1e5 + 3000.0;
    const auto r = fit(pb);
    CHECK(r.params[2] >= 1e5 + 2000.0);
    CHECK(r.params[2] <= 1e5 + 4000.0);
}

TEST_CASE("degenerate problems") {
    auto pb = time_exp_problem(0.0, 0);
    pb.weights.assign(pb.x.size(), 0.0);
    CHECK_THROWS_AS(fit(pb), SingularJacobian);

    auto overflow = time_exp_problem(0.0, 0);
    overflow.x.back() = 1e3;
    overflow.initial[2] = -1e3;
    CHECK_THROWS_AS(fit(overflow), SingularJacobian);
}

TEST_CASE("problem validation") {
    auto pb = time_exp_problem(0.0, 0);
    pb.y.pop_back();
    CHECK_THROWS_AS(fit(pb), std::invalid_argument);

    pb = time_exp_problem(0.0, 0);
    pb.x.resize(3);
    pb.y.resize(3);
    CHECK_THROWS_AS(fit(pb), std::invalid_argument);

    pb = time_exp_problem(0.0, 0);
    pb.weights.assign(pb.x.size(), 1.0);
    pb.weights[2] = -1.0;
    CHECK_THROWS_AS(fit(pb), std::invalid_argument);

    pb = time_exp_problem(0.0, 0);
    pb.initial[0] = NAN;
    CHECK_THROWS_AS(fit(pb), std::invalid_argument);

    pb = time_exp_problem(0.0, 0);
    pb.initial.pop_back();
    CHECK_THROWS_AS(fit(pb), std::invalid_argument);
}

TEST_CASE("iteration cap reports non-convergence") {
    const auto r = fit(lorentzian_problem(), 1e-12, 2);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 2);
    CHECK(r.rss <= r.rss_history.front());
    CHECK_FALSE(r.message.empty());
}

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "strobosq/analytic.hpp"
#include "strobosq/errors.hpp"
#include "strobosq/strobe.hpp"

namespace strobosq {

namespace {

struct ModelInfo {
    ModelId id;
    std::string_view name;
    std::array<std::string_view, 4> params;
    int n_params;
};

constexpr std::array<ModelInfo, 6> models{{
    {ModelId::time_exp, "time_exp", {"b1", "b2", "gamma"}, 3},
    {ModelId::duty_sinc, "duty_sinc", {"c1", "c2"}, 2},
    {ModelId::angle_cos, "angle_cos", {"d1", "d2"}, 2},
    {ModelId::sideband_ab, "sideband_ab", {"e1", "e2"}, 2},
    {ModelId::time_f1f2, "time_f1f2", {"g1", "g2", "gamma"}, 3},
    {ModelId::lorentzian, "lorentzian", {"amplitude", "width", "center", "offset"}, 4},
}};

const ModelInfo& info(ModelId id) {
    for (const auto& m : models) {
        if (m.id == id) {
            return m;
        }
    }
    throw UnknownModel("unknown model id");
}

double decoration(const ModelContext& ctx, double time) {
    return ctx.t1 ? std::exp(2.0 * time / *ctx.t1) : 1.0;
}

}  // namespace

ModelId parse_model_id(std::string_view name) {
    for (const auto& m : models) {
        if (m.name == name) {
            return m.id;
        }
    }
    throw UnknownModel("unknown model '" + std::string(name) + "'");
}

std::string_view model_name(ModelId id) { return info(id).name; }

int model_parameter_count(ModelId id) { return info(id).n_params; }

std::vector<std::string> model_parameter_names(ModelId id) {
    const auto& m = info(id);
    return {m.params.begin(), m.params.begin() + m.n_params};
}

double fit_models(ModelId id, std::span<const double> p, double x, const ModelContext& ctx) {
    if (static_cast<int>(p.size()) != model_parameter_count(id)) {
        throw std::invalid_argument("wrong number of parameters for model " +
                                    std::string(model_name(id)));
    }
    switch (id) {
    case ModelId::time_exp:
        return (p[0] + p[1] * std::exp(-2.0 * p[2] * x)) * decoration(ctx, x);
    case ModelId::duty_sinc:
        return p[0] + p[1] * sinc(std::numbers::pi * x);
    case ModelId::angle_cos:
        return p[0] + p[1] * std::cos(x);
    case ModelId::sideband_ab: {
        const bool n_axis = ctx.duty.has_value();
        const int n = n_axis ? static_cast<int>(std::lround(x)) : ctx.sideband;
        const double d = n_axis ? *ctx.duty : x;
        const auto [alpha, beta] = alpha_beta(n, d);
        return 1.0 - p[0] * alpha - p[1] * beta;
    }
    case ModelId::time_f1f2: {
        const auto [f1, f2] = time_factors(p[2] * x);
        return (1.0 - p[0] * f1 - p[1] * f2) * decoration(ctx, x);
    }
    case ModelId::lorentzian: {
        const double w2 = p[1] * p[1];
        const double dx = x - p[2];
        if (w2 == 0.0) {
            return p[3];
        }
        return p[0] * w2 / (w2 + dx * dx) + p[3];
    }
    }
    throw UnknownModel("unknown model id");
}

}  // namespace strobosq

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "strobosq/analytic.hpp"
#include "strobosq/cli.hpp"
#include "strobosq/config.hpp"
#include "strobosq/csv.hpp"
#include "strobosq/errors.hpp"
#include "strobosq/fitlab.hpp"
#include "strobosq/params.hpp"
#include "strobosq/dynamics.hpp"
#include "strobosq/strobe.hpp"

using namespace strobosq;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name, const std::string& body = "")
        : path(fs::temp_directory_path() / ("strobosq_test_" + name)) {
        std::ofstream(path) << body;
    }
    ~TempFile() { fs::remove(path); }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(int (*cmd)(const RunConfig&, std::ostream&, std::ostream&), const RunConfig& cfg) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cmd(cfg, out, err);
    return {code, out.str(), err.str()};
}

CsvTable table(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
    std::vector<double> v;
    for (const auto& row : t.rows) {
        v.push_back(row[t.column(name)]);
    }
    return v;
}

RunConfig with(std::initializer_list<std::pair<const std::string, std::string>> kv) {
    return apply_keys(RunConfig{}, KeyValues(kv));
}

SpinSqueezingInputs spin_inputs(const RunConfig& cfg) {
    SpinSqueezingInputs in;
    in.gamma_total = cfg.gamma_total;
    in.epsilon = cfg.epsilon;
    in.duty = cfg.duty;
    in.zeta2 = cfg.zeta2;
    const auto strobo = make_strobo(cfg.duty, cfg.larmor_over_gamma * cfg.gamma_total);
    in.time = snap_total_time(cfg.gamma_t / cfg.gamma_total, strobo.period());
    return in;
}

// fits one family to two CSV columns with the library fitter
std::vector<double> fit_columns(ModelId id, const std::vector<double>& x,
                                const std::vector<double>& y, std::vector<double> initial) {
    FitProblem pb;
    pb.model = id;
    pb.x = x;
    pb.y = y;
    pb.initial = std::move(initial);
    const auto r = fit(pb);
    REQUIRE(r.converged);
    return r.params;
}

}  // namespace

TEST_CASE("key = value parsing") {
    std::istringstream in("# comment\n\n  duty = 0.2  \nseed=5 # trailing\naxis = angle\n");
    const auto kv = parse_key_values(in);
    CHECK(kv.size() == 3);
    CHECK(kv.at("duty") == "0.2");
    CHECK(kv.at("seed") == "5");
    CHECK(kv.at("axis") == "angle");

    std::istringstream dup("duty = 0.1\nseed = 1\nduty = 0.2\n");
    try {
        parse_key_values(dup, "run.cfg");
        FAIL("duplicate key accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("run.cfg:3") != std::string::npos);
    }
    std::istringstream bad("duty 0.2\n");
    CHECK_THROWS_AS(parse_key_values(bad), ConfigError);
    std::istringstream empty_key(" = 3\n");
    CHECK_THROWS_AS(parse_key_values(empty_key), ConfigError);
}

TEST_CASE("unknown keys and bad values") {
    CHECK_THROWS_AS(with({{"dutty", "0.2"}}), ConfigError);
    CHECK_THROWS_AS(with({{"duty", "abc"}}), ConfigError);
    CHECK_THROWS_AS(with({{"axis_points", "2.5"}}), ConfigError);
    CHECK_THROWS_AS(with({{"engine", "quantum"}}), ConfigError);
    CHECK_THROWS_AS(with({{"wineland", "maybe"}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config(std::nullopt, std::nullopt, {"duty"}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config(fs::path("/nonexistent/strobosq.cfg"), std::nullopt, {}),
                    ConfigError);
    CHECK_THROWS_AS(resolve_run_config(std::nullopt, std::string("seven"), {}), ConfigError);
    CHECK(with({{"wineland", "yes"}}).wineland);
    CHECK(with({{"sidebands", "0, 2"}}).sidebands == std::vector<int>{0, 2});
}

TEST_CASE("precedence: defaults, file, environment seed, flags") {
    TempFile file("precedence.cfg", "seed = 5\nduty = 0.2\nn_traj = 300\n");
    const RunConfig defaults;
    CHECK(resolve_run_config(std::nullopt, std::nullopt, {}).seed == defaults.seed);

    const auto from_file = resolve_run_config(file.path, std::nullopt, {});
    CHECK(from_file.seed == 5);
    CHECK(from_file.duty == 0.2);
    CHECK(from_file.gamma_total == defaults.gamma_total);

    const auto from_env = resolve_run_config(file.path, std::string("7"), {});
    CHECK(from_env.seed == 7);
    CHECK(from_env.duty == 0.2);

    const auto from_flags = resolve_run_config(file.path, std::string("7"), {"seed=9", "duty=0.3"});
    CHECK(from_flags.seed == 9);
    CHECK(from_flags.duty == 0.3);
    CHECK(from_flags.n_traj == 300);

    // the last of repeated flags wins
    CHECK(resolve_run_config(std::nullopt, std::nullopt, {"duty=0.3", "duty=0.4"}).duty == 0.4);
}

TEST_CASE("run configuration domains") {
    CHECK_THROWS_AS(resolve_run_config(std::nullopt, std::nullopt, {"duty=0"}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config(std::nullopt, std::nullopt, {"axis_points=1"}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config(std::nullopt, std::nullopt, {"axis_min=2", "axis_max=2"}),
                    ConfigError);
    CHECK_THROWS_AS(resolve_run_config(std::nullopt, std::nullopt, {"epsilon=1.5"}), ConfigError);
}

TEST_CASE("coeffs at the configured detuning") {
    const auto r = run(cmd_coeffs, RunConfig{});
    CHECK(r.code == exit_code::ok);
    const auto t = table(r.out);
    CHECK(t.header == std::vector<std::string>{"delta_hz", "a0", "a1", "a2", "ratio_a2_a1", "zeta2"});
    REQUIRE(t.rows.size() == 1);
    const auto p = default_params();
    const auto a = a_coefficients(p.detuning, p.delta13, p.delta23);
    CHECK(column(t, "a0")[0] == a.a0);
    CHECK(column(t, "a1")[0] == a.a1);
    CHECK(column(t, "a2")[0] == a.a2);
    // red detuning
    CHECK(column(t, "zeta2")[0] > 0.0);
    CHECK(column(t, "zeta2")[0] == doctest::Approx(-6.0 * a.a2 / a.a1).epsilon(1e-15));
}

TEST_CASE("coeffs sweep skips poles and crosses the QND point") {
    const auto p = default_params();
    const double d13 = p.delta13 / constants::two_pi;
    auto cfg = with({{"axis", "detuning"}, {"axis_min", "400e6"}, {"axis_max", "700e6"},
                     {"axis_points", "301"}});
    auto r = run(cmd_coeffs, cfg);
    CHECK(r.code == exit_code::ok);
    const auto z = column(table(r.out), "zeta2");
    CHECK(z.size() == 301);
    bool crossed = false;
    for (std::size_t i = 1; i < z.size(); ++i) {
        crossed = crossed || ((z[i - 1] - 1.0) * (z[i] - 1.0) < 0.0 && z[i] > 0.0 && z[i - 1] > 0.0);
    }
    CHECK(crossed);

    cfg.axis_min = d13 - 1e6;
    cfg.axis_max = d13 + 1e6;
    cfg.axis_points = 3;
    r = run(cmd_coeffs, cfg);
    CHECK(table(r.out).rows.size() == 2);
    CHECK(r.err.find("skipping") != std::string::npos);
}

TEST_CASE("spin along the duty axis follows the sinc family") {
    const auto cfg = with({{"axis", "duty"}, {"axis_min", "0.02"}, {"axis_max", "1"},
                           {"axis_points", "25"}});
    const auto r = run(cmd_spin, cfg);
    CHECK(r.code == exit_code::ok);
    const auto t = table(r.out);
    const auto p = fit_columns(ModelId::duty_sinc, column(t, "axis_value"), column(t, "xi_a2"),
                               {0.5, 0.5});
    const auto c = duty_sinc_coefficients(spin_inputs(cfg));
    CHECK(p[0] == doctest::Approx(c.first).epsilon(1e-8));
    CHECK(p[1] == doctest::Approx(c.second).epsilon(1e-8));
}

TEST_CASE("spin along the angle axis follows the cosine family") {
    const auto cfg = with({{"axis", "angle"}, {"axis_min", "0"}, {"axis_max", "1"},
                           {"axis_points", "21"}, {"duty", "0.3"}});
    const auto r = run(cmd_spin, cfg);
    const auto t = table(r.out);
    auto theta = column(t, "axis_value");
    for (auto& v : theta) {
        v *= std::numbers::pi;
    }
    const auto p = fit_columns(ModelId::angle_cos, theta, column(t, "xi_a2"), {0.5, 0.1});
    const auto c = angle_cos_coefficients(spin_inputs(cfg));
    CHECK(p[0] == doctest::Approx(c.first).epsilon(1e-8));
    CHECK(p[1] == doctest::Approx(c.second).epsilon(1e-8));
}

TEST_CASE("spin engines agree") {
    auto cfg = with({{"axis", "time"}, {"axis_min", "0.5"}, {"axis_max", "2"},
                     {"axis_points", "3"}});
    const auto analytic = column(table(run(cmd_spin, cfg).out), "xi_a2");
    cfg.engine = Engine::moments;
    const auto moments = column(table(run(cmd_spin, cfg).out), "xi_a2");
    cfg.engine = Engine::montecarlo;
    cfg.n_traj = 4000;
    const auto mc_t = table(run(cmd_spin, cfg).out);
    const auto mc = column(mc_t, "xi_a2");
    const auto se = column(mc_t, "stderr");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(moments[i] == doctest::Approx(analytic[i]).epsilon(1e-2));
        CHECK(std::abs(mc[i] - moments[i]) < 3 * se[i]);
    }
}

TEST_CASE("QND coupling leaves the spin at the projection noise") {
    for (const char* axis : {"time", "duty", "angle"}) {
        const auto cfg = with({{"zeta2", "1"}, {"axis", axis}, {"axis_min", "0.1"},
                               {"axis_max", "1"}, {"axis_points", "7"}});
        for (double v : column(table(run(cmd_spin, cfg).out), "xi_a2")) {
            CHECK(std::abs(v - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("Wineland factor only changes the dB column") {
    auto cfg = with({{"axis", "time"}, {"axis_min", "0.5"}, {"axis_max", "3"}, {"axis_points", "6"}});
    const auto plain = table(run(cmd_spin, cfg).out);
    cfg.wineland = true;
    const auto corrected = table(run(cmd_spin, cfg).out);
    CHECK(column(plain, "xi_a2") == column(corrected, "xi_a2"));
    const auto x = column(plain, "axis_value");
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = x[i] / cfg.gamma_total;
        const double expected = column(plain, "xi_aw2_db")[i] - 10.0 * std::log10(std::exp(2 * t / cfg.t1_s));
        CHECK(column(corrected, "xi_aw2_db")[i] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("spectrum duty sweep orders the sidebands") {
    const auto cfg = with({{"spectrum_mode", "duty"}, {"axis", "duty"}, {"axis_min", "0.02"},
                           {"axis_max", "0.9"}, {"axis_points", "12"}});
    const auto r = run(cmd_spectrum, cfg);
    CHECK(r.code == exit_code::ok);
    const auto t = table(r.out);
    CHECK(t.header == std::vector<std::string>{"duty", "xi_l2_n0", "xi_l2_n1", "xi_l2_n2"});
    for (const auto& row : t.rows) {
        CHECK(row[1] < row[2]);
        CHECK(row[2] < row[3]);
    }
    CHECK_THROWS_AS(run(cmd_spectrum, with({{"spectrum_mode", "duty"}})), ConfigError);
}

TEST_CASE("analytic spectrum dips at the Larmor frequency") {
    const auto r = run(cmd_spectrum, RunConfig{});
    const auto t = table(r.out);
    CHECK(t.rows.size() == 401);
    const auto xi = column(t, "xi_l2");
    const auto lo = std::min_element(xi.begin(), xi.end());
    CHECK(column(t, "omega_rad_s")[static_cast<std::size_t>(lo - xi.begin())] == 1e5);
    CHECK(*lo < 0.3);
    CHECK(xi.front() > 0.99);
}

TEST_CASE("no coupling gives no squeezing in the simulated spectrum") {
    const auto cfg = with({{"engine", "montecarlo"}, {"epsilon", "0"}, {"n_traj", "600"},
                           {"gamma_t", "0.5"}, {"workers", "1"}});
    const auto r = run(cmd_spectrum, cfg);
    CHECK(r.code == exit_code::ok);
    const auto t = table(r.out);
    const auto xi = column(t, "xi_l2");
    const auto se = column(t, "stderr");
    int outliers = 0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        outliers += std::abs(xi[i] - 1.0) > 5 * se[i];
    }
    CHECK(outliers == 0);
    CHECK(r.err.find("headline") != std::string::npos);
}

TEST_CASE("checkpointed spectrum equals the direct one") {
    TempFile ckpt("spectrum.ckpt");
    auto cfg = with({{"engine", "montecarlo"}, {"n_traj", "100"}, {"gamma_t", "0.3"},
                     {"workers", "1"}, {"bin_gammas", "1"}});
    const auto direct = run(cmd_spectrum, cfg);
    cfg.checkpoint_out = ckpt.path.string();
    const auto written = run(cmd_spectrum, cfg);
    cfg.checkpoint_out.clear();
    cfg.checkpoint_in = ckpt.path.string();
    const auto reread = run(cmd_spectrum, cfg);
    const auto a = column(table(direct.out), "s_est");
    const auto b = column(table(written.out), "s_est");
    const auto c = column(table(reread.out), "s_est");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
        CHECK(c[i] == b[i]);
    }
}

TEST_CASE("validate passes at the defaults") {
    const auto r = run(cmd_validate, with({{"n_traj", "2000"}}));
    CAPTURE(r.out);
    CHECK(r.code == exit_code::ok);
    for (const char* name : {"qnd_neutrality_analytic", "parseval", "oracle_analytic_moments",
                             "oracle_moments_montecarlo", "mean_direction",
                             "estimator_unbiasedness"}) {
        CHECK(r.out.find(name) != std::string::npos);
    }
    CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("a coarse time step is rejected") {
    const auto cfg = with({{"dt", "1e-5"}, {"engine", "moments"}});
    CHECK_THROWS_AS(run(cmd_spin, cfg), GridError);
    const auto r = run(cmd_validate, with({{"dt", "1e-5"}, {"n_traj", "100"}}));
    CHECK(r.code == exit_code::validation_failed);
    CHECK(r.out.find("grid_invariants") != std::string::npos);
    CHECK(r.out.find("validation FAILED") != std::string::npos);
}

TEST_CASE("fit subcommand on spin output") {
    const auto spin = run(cmd_spin, with({{"axis", "time"}, {"axis_min", "0"}, {"axis_max", "4"},
                                          {"axis_points", "30"}}));
    // the time family uses T in seconds
    std::ostringstream csv;
    csv << "t,xi\n";
    const auto t = table(spin.out);
    for (const auto& row : t.rows) {
        csv << format_double(row[0] / 1000.0) << ',' << format_double(row[1]) << '\n';
    }
    TempFile data("fit.csv", csv.str());
    auto cfg = with({{"fit_input", data.path.string()}, {"fit_model", "time_exp"}, {"fit_x", "t"},
                     {"fit_y", "xi"}, {"fit_initial", "0.5, 0.5, 300"}});
    const auto r = run(cmd_fit, cfg);
    CHECK(r.code == exit_code::ok);
    std::map<std::string, double> values;
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "name,value,stderr");
    while (std::getline(lines, line)) {
        const auto comma = line.find(',');
        values[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    const auto c = time_exp_coefficients(spin_inputs(RunConfig{}));
    CHECK(values.at("b1") == doctest::Approx(c.first).epsilon(1e-8));
    CHECK(values.at("b2") == doctest::Approx(c.second).epsilon(1e-8));
    CHECK(values.at("converged") == 1.0);

    cfg.fit_initial = {0.5, 0.5};
    CHECK_THROWS_AS(run(cmd_fit, cfg), ConfigError);
    cfg.fit_initial = {0.5, 0.5, 300};
    cfg.fit_model = "parabola";
    CHECK_THROWS_AS(run(cmd_fit, cfg), ConfigError);
    cfg.fit_model = "time_exp";
    cfg.fit_y = "missing";
    CHECK_THROWS_AS(run(cmd_fit, cfg), FormatError);
    CHECK_THROWS_AS(run(cmd_fit, RunConfig{}), ConfigError);

    cfg.fit_y = "xi";
    cfg.fit_max_iter = 1;
    CHECK(run(cmd_fit, cfg).code == exit_code::validation_failed);
}

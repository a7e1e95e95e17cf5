#include "strobosq/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "strobosq/csv.hpp"
#include "strobosq/errors.hpp"

namespace strobosq {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            parts.push_back(item);
        }
    }
    return parts;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& p : split_list(v)) {
        if (p == "inf" || p == "+inf") {
            out.push_back(INFINITY);
        } else if (p == "-inf") {
            out.push_back(-INFINITY);
        } else {
            out.push_back(parse_double(key, p));
        }
    }
    return out;
}

template <class Enum>
Enum parse_enum(const std::string& key, const std::string& v,
                std::initializer_list<std::pair<std::string_view, Enum>> table) {
    for (const auto& [name, value] : table) {
        if (name == v) {
            return value;
        }
    }
    std::string allowed;
    for (const auto& entry : table) {
        allowed += (allowed.empty() ? "" : ", ") + std::string(entry.first);
    }
    throw ConfigError("key '" + key + "': '" + v + "' is not one of " + allowed);
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
    KeyValues kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string text = trim(line);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        std::string key = trim(std::string_view(text).substr(0, eq));
        std::string value = trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
        }
        if (kv.count(key) != 0) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                              "'");
        }
        kv.emplace(std::move(key), std::move(value));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    return parse_key_values(in, path.string());
}

PhysicalParams params_from_keys(const KeyValues& kv, PhysicalParams p) {
    using constants::two_pi;
    bool have_power = false;
    bool have_flux = false;
    for (const auto& [key, value] : kv) {
        const double v = parse_double(key, value);
        if (key == "gamma_natural_hz") {
            p.gamma_natural = two_pi * v;
        } else if (key == "wavelength_m") {
            p.wavelength = v;
        } else if (key == "detuning_hz") {
            p.detuning = two_pi * v;
        } else if (key == "delta13_hz") {
            p.delta13 = two_pi * v;
        } else if (key == "delta23_hz") {
            p.delta23 = two_pi * v;
        } else if (key == "beam_area_m2") {
            p.beam_area = v;
        } else if (key == "cell_length_m") {
            p.cell_length = v;
        } else if (key == "power_w") {
            have_power = true;
        } else if (key == "photon_flux") {
            p.photon_flux = v;
            have_flux = true;
        } else if (key == "atom_number") {
            p.atom_number = v;
        } else if (key == "larmor_hz") {
            p.larmor = two_pi * v;
        } else if (key == "gamma_ex") {
            p.gamma_ex = v;
        } else if (key == "t1_s") {
            p.t1 = v;
        } else {
            throw ConfigError("unknown parameter key '" + key + "'");
        }
    }
    if (have_power && have_flux) {
        throw ConfigError("give either power_w or photon_flux, not both");
    }
    if (have_power) {
        // after the loop so the wavelength is final
        p.photon_flux = photon_flux_from_power(parse_double("power_w", kv.at("power_w")),
                                               p.wavelength);
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid physical parameters: ") + e.what());
    }
    return p;
}

PhysicalParams load_params_file(const std::filesystem::path& path) {
    return params_from_keys(read_key_values(path));
}

RunConfig apply_keys(RunConfig c, const KeyValues& kv) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](double& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_double(k, v); };
    };
    auto integer = [](int& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) { field = parse_int<int>(k, v); };
    };
    auto text = [](std::string& field) -> Setter {
        return [&field](const std::string&, const std::string& v) { field = v; };
    };
    auto list = [](std::vector<double>& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) {
            field = parse_double_list(k, v);
        };
    };
    auto optional_num = [](std::optional<double>& field) -> Setter {
        return [&field](const std::string& k, const std::string& v) {
            if (v.empty() || v == "none") {
                field.reset();
            } else {
                field = parse_double(k, v);
            }
        };
    };

    const std::map<std::string, Setter> setters{
        {"coupling_mode",
         [&](const std::string& k, const std::string& v) {
             c.coupling_mode = parse_enum<CouplingMode>(
                 k, v, {{"rates", CouplingMode::rates}, {"physical", CouplingMode::physical}});
         }},
        {"params_file", text(c.params_file)},
        {"gamma_total", num(c.gamma_total)},
        {"epsilon", num(c.epsilon)},
        {"zeta2", num(c.zeta2)},
        {"larmor_over_gamma", num(c.larmor_over_gamma)},
        {"t1_s", num(c.t1_s)},
        {"wineland", [&](const std::string& k, const std::string& v) { c.wineland = parse_bool(k, v); }},
        {"duty", num(c.duty)},
        {"phase_pi", num(c.phase_pi)},
        {"n_max", integer(c.n_max)},
        {"dt", num(c.dt)},
        {"gamma_t", num(c.gamma_t)},
        {"time_s", num(c.time_s)},
        {"initial_cov_scale", num(c.initial_cov_scale)},
        {"axis",
         [&](const std::string& k, const std::string& v) {
             c.axis = parse_enum<Axis>(k, v,
                                       {{"time", Axis::time},
                                        {"duty", Axis::duty},
                                        {"angle", Axis::angle},
                                        {"detuning", Axis::detuning},
                                        {"sideband", Axis::sideband}});
         }},
        {"axis_min", num(c.axis_min)},
        {"axis_max", num(c.axis_max)},
        {"axis_points", integer(c.axis_points)},
        {"angle_pi", num(c.angle_pi)},
        {"sideband", integer(c.sideband)},
        {"engine",
         [&](const std::string& k, const std::string& v) {
             c.engine = parse_enum<Engine>(k, v,
                                           {{"analytic", Engine::analytic},
                                            {"moments", Engine::moments},
                                            {"montecarlo", Engine::montecarlo}});
         }},
        {"output", text(c.output)},
        {"seed",
         [&](const std::string& k, const std::string& v) {
             c.seed = parse_int<std::uint64_t>(k, v);
         }},
        {"n_traj",
         [&](const std::string& k, const std::string& v) {
             c.n_traj = parse_int<std::size_t>(k, v);
         }},
        {"workers",
         [&](const std::string& k, const std::string& v) { c.workers = parse_int<unsigned>(k, v); }},
        {"spectrum_mode",
         [&](const std::string& k, const std::string& v) {
             c.spectrum_mode = parse_enum<SpectrumMode>(
                 k, v, {{"frequency", SpectrumMode::frequency}, {"duty", SpectrumMode::duty}});
         }},
        {"sidebands",
         [&](const std::string& k, const std::string& v) {
             c.sidebands.clear();
             for (const auto& p : split_list(v)) {
                 c.sidebands.push_back(parse_int<int>(k, p));
             }
         }},
        {"span_gammas", num(c.span_gammas)},
        {"bin_gammas", num(c.bin_gammas)},
        {"exclusion_gammas", num(c.exclusion_gammas)},
        {"spectrum_sidebands", integer(c.spectrum_sidebands)},
        {"checkpoint_in", text(c.checkpoint_in)},
        {"checkpoint_out", text(c.checkpoint_out)},
        {"fit_input", text(c.fit_input)},
        {"fit_model", text(c.fit_model)},
        {"fit_x", text(c.fit_x)},
        {"fit_y", text(c.fit_y)},
        {"fit_weight", text(c.fit_weight)},
        {"fit_initial", list(c.fit_initial)},
        {"fit_lower", list(c.fit_lower)},
        {"fit_upper", list(c.fit_upper)},
        {"fit_tol", num(c.fit_tol)},
        {"fit_max_iter", integer(c.fit_max_iter)},
        {"fit_t1", optional_num(c.fit_t1)},
        {"fit_duty", optional_num(c.fit_duty)},
    };

    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        it->second(key, value);
    }
    return c;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (!(duty > 0.0 && duty <= 1.0)) {
        fail("duty must lie in (0, 1]");
    }
    if (coupling_mode == CouplingMode::rates) {
        if (!(gamma_total > 0.0)) {
            fail("gamma_total must be positive");
        }
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
            fail("epsilon must lie in [0, 1]");
        }
        if (!(zeta2 > 0.0)) {
            fail("zeta2 must be positive");
        }
        if (!(larmor_over_gamma > 0.0)) {
            fail("larmor_over_gamma must be positive");
        }
    }
    if (!(t1_s > 0.0)) {
        fail("t1_s must be positive");
    }
    if (!(axis_points >= 2)) {
        fail("axis_points must be at least 2");
    }
    if (!(axis_max > axis_min)) {
        fail("sweep range is degenerate: axis_max must exceed axis_min");
    }
    if (dt < 0.0 || gamma_t < 0.0 || time_s < 0.0) {
        fail("dt, gamma_t and time_s must be non-negative");
    }
    if (!(initial_cov_scale > 0.0)) {
        fail("initial_cov_scale must be positive");
    }
    if (n_max < 0 || sideband < 0 || spectrum_sidebands < 0) {
        fail("n_max, sideband and spectrum_sidebands must be non-negative");
    }
    for (int n : sidebands) {
        if (n < 0) {
            fail("sidebands must be non-negative");
        }
    }
    if (!(span_gammas > 0.0) || !(bin_gammas > 0.0) || exclusion_gammas < 0.0) {
        fail("spectrum grid settings must be positive");
    }
    if (!(fit_tol > 0.0) || fit_max_iter < 1) {
        fail("fit_tol must be positive and fit_max_iter at least 1");
    }
}

RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file,
                             const std::optional<std::string>& env_seed,
                             const std::vector<std::string>& overrides) {
    RunConfig c;
    if (config_file) {
        c = apply_keys(c, read_key_values(*config_file));
    }
    if (env_seed) {
        c = apply_keys(c, KeyValues{{"seed", trim(*env_seed)}});
    }
    KeyValues flags;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + o + "'");
        }
        // later flags win over earlier ones
        flags[trim(std::string_view(o).substr(0, eq))] = trim(std::string_view(o).substr(eq + 1));
    }
    c = apply_keys(c, flags);
    c.validate();
    return c;
}

std::string to_string(Engine e) {
    switch (e) {
    case Engine::analytic:
        return "analytic";
    case Engine::moments:
        return "moments";
    case Engine::montecarlo:
        return "montecarlo";
    }
    return "?";
}

std::string to_string(Axis a) {
    switch (a) {
    case Axis::time:
        return "time";
    case Axis::duty:
        return "duty";
    case Axis::angle:
        return "angle";
    case Axis::detuning:
        return "detuning";
    case Axis::sideband:
        return "sideband";
    }
    return "?";
}

//===----------------------------------------------------------------------===//
// CSV reading
//===----------------------------------------------------------------------===//

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw FormatError("CSV has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(trim(cell));
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw FormatError("CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(t.header.size()) + " fields");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = 0.0;
            const auto* end = c.data() + c.size();
            const auto [ptr, ec] = std::from_chars(c.data(), end, v);
            if (ec != std::errc() || ptr != end) {
                throw FormatError("CSV line " + std::to_string(line_no) + ": '" + c +
                                  "' is not a number");
            }
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) {
        throw FormatError("CSV input is empty");
    }
    return t;
}

}  // namespace strobosq

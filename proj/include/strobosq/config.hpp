#pragma once

// Line-oriented `key = value` configuration. '#' starts a comment; blank lines
// are ignored; keys are case-sensitive and unknown keys are errors.
//
// Precedence, lowest to highest: built-in defaults, the config file, the
// STROBO_SEED environment variable (seed only), `--set key=value` flags.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strobosq/params.hpp"

namespace strobosq {

using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError with the line number on malformed lines or duplicate keys.
KeyValues parse_key_values(std::istream& in, const std::string& source = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);

/// Physical parameter file. Keys (all optional, defaults from default_params):
///   gamma_natural_hz, wavelength_m, detuning_hz, delta13_hz, delta23_hz,
///   beam_area_m2, cell_length_m, power_w | photon_flux, atom_number,
///   larmor_hz, gamma_ex, t1_s
/// Frequencies given in Hz are converted to rad/s.
PhysicalParams params_from_keys(const KeyValues& kv, PhysicalParams base = default_params());
PhysicalParams load_params_file(const std::filesystem::path& path);

enum class Engine { analytic, moments, montecarlo };
enum class Axis { time, duty, angle, detuning, sideband };
enum class CouplingMode { rates, physical };
enum class SpectrumMode { frequency, duty };

struct RunConfig {
    // couplings
    CouplingMode coupling_mode = CouplingMode::rates;
    std::string params_file;         // physical mode; empty = built-in defaults
    double gamma_total = 1000.0;     // rates mode, 1/s
    double epsilon = 1.0;
    double zeta2 = 0.1;
    double larmor_over_gamma = 100.0;  // rates mode: Ω = ratio·γ
    double t1_s = 18e-3;             // rates mode T1
    bool wineland = false;

    // stroboscopy and grid
    double duty = 0.08;
    double phase_pi = 0.0;           // window-centre phase in units of π
    int n_max = 0;                   // 0 = ceil(10/d)
    double dt = 0.0;                 // 0 = automatic
    double gamma_t = 1.0;            // T = gamma_t/γ unless time_s is set
    double time_s = 0.0;
    double initial_cov_scale = 1.0;

    // sweep
    Axis axis = Axis::time;
    double axis_min = 0.0;
    double axis_max = 5.0;
    int axis_points = 51;
    double angle_pi = 0.0;           // θ/π when the angle is not swept
    int sideband = 0;

    // engine and output
    Engine engine = Engine::analytic;
    std::string output = "-";
    std::uint64_t seed = 20240917;
    std::size_t n_traj = 10000;
    unsigned workers = 0;

    // spectrum
    SpectrumMode spectrum_mode = SpectrumMode::frequency;
    std::vector<int> sidebands{0, 1, 2};
    double span_gammas = 20.0;
    double bin_gammas = 0.1;
    double exclusion_gammas = 3.0;
    int spectrum_sidebands = 0;
    std::string checkpoint_in;
    std::string checkpoint_out;

    // fit subcommand
    std::string fit_input;
    std::string fit_model = "time_exp";
    std::string fit_x = "x";
    std::string fit_y = "y";
    std::string fit_weight;          // empty = unweighted
    std::vector<double> fit_initial;
    std::vector<double> fit_lower;
    std::vector<double> fit_upper;
    double fit_tol = 1e-12;
    int fit_max_iter = 500;
    std::optional<double> fit_t1;
    std::optional<double> fit_duty;

    /// Sweep range nondegenerate, point count >= 2 and the usual domains.
    void validate() const;
};

/// Applies key/value pairs on top of `base`; unknown keys and unparsable
/// values throw ConfigError.
RunConfig apply_keys(RunConfig base, const KeyValues& kv);

/// Builds the effective configuration in precedence order. `env_seed` is the
/// raw STROBO_SEED value when set; `overrides` are `key=value` strings.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file,
                             const std::optional<std::string>& env_seed,
                             const std::vector<std::string>& overrides);

std::string to_string(Engine e);
std::string to_string(Axis a);

}  // namespace strobosq

#pragma once

// Subcommands of the strobosq tool. Each writes CSV (or a report) to `out`,
// notes to `err`, and returns the process exit code.

#include <iosfwd>

#include "strobosq/config.hpp"

namespace strobosq {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation_failed = 1;
inline constexpr int config_error = 2;
}  // namespace exit_code

/// `delta_hz,a0,a1,a2,ratio_a2_a1,zeta2` over the detuning axis (Hz), or one
/// row at the configured detuning when another axis is selected.
int cmd_coeffs(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// `axis_value,xi_a2,xi_aw2_db[,stderr]` over a time (γT), duty or angle (θ/π) axis.
/// T is snapped to whole Larmor half-periods; on the time axis the snapped γT
/// is reported.
int cmd_spin(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Frequency-resolved spectrum (`omega_rad_s,s_est,s_shot,xi_l2,stderr`) or a
/// duty sweep of ξ_L² at the configured sidebands (`duty,xi_l2_n0,...`).
int cmd_spectrum(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Invariant suite; one report line per check; exit 1 on any failure.
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Least-squares fit of a model family to columns of a CSV file.
int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace strobosq

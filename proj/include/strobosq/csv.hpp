#pragma once

// Minimal CSV helpers: full-precision number formatting and a numeric table
// reader for the fit subcommand.

#include <cstdio>
#include <istream>
#include <string>
#include <vector>

namespace strobosq {

/// Shortest form with 17 significant digits, locale independent for the
/// "C" locale the tools run under.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a named column; throws FormatError when absent.
    std::size_t column(const std::string& name) const;
};

/// Reads a header line followed by numeric rows. Blank lines and lines
/// starting with '#' are skipped. Throws FormatError on ragged or
/// non-numeric rows.
CsvTable read_csv(std::istream& in);

}  // namespace strobosq

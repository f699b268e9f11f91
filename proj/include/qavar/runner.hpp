// Executes a RunConfig and renders deterministic CSV.
#pragma once

#include <string>
#include <vector>

#include "qavar/run_config.hpp"

namespace qavar {

inline constexpr const char *kVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_skipped = 3, exit_numerical = 4 };

struct RunOutcome {
    int exit_code = exit_ok;
    std::string csv;
    std::vector<std::string> summary; ///< one line per tau
};

/// Shortest round-trip decimal form of x ("nan", "inf", "-inf" for non-finite).
std::string format_number(double x);

/// Runs the configuration; per-tau work is spread over `threads` workers
/// (0: hardware concurrency) and rows are written in tau order.
RunOutcome run(const RunConfig &config, unsigned threads = 1);

} // namespace qavar

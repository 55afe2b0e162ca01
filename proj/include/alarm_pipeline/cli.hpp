#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace alarm_pipeline::cli {

enum ExitCode : int {
    kOk = 0,
    kParseError = 1,
    kInfeasible = 2,
};

/// Runs one subcommand (evaluate, sweep, tune, offsets, synth, folds).
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count from ALARM_PIPELINE_THREADS, else hardware concurrency.
unsigned thread_budget();

} // namespace alarm_pipeline::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fwfm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs `fwfm <subcommand> ...`. args excludes the program name.
// Subcommands: train, analyze, synth, sweep.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fwfm::cli

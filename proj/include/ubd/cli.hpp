#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ubd/synthetic.hpp"

namespace ubd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. args[0] is the program name. Errors go to err as "E_CODE: message".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Benchmark description as JSON. Unknown keys are rejected; missing keys keep the defaults.
[[nodiscard]] std::string benchmark_spec_to_json(const BenchmarkSpec& spec);
[[nodiscard]] BenchmarkSpec benchmark_spec_from_json(const std::string& text);

}  // namespace ubd::cli

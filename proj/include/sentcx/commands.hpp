#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sentcx::cli {

inline constexpr std::string_view kToolVersion = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUpstream = 2;
inline constexpr int kExitInternal = 3;

// Entry point; args[0] is the program name. Returns the process exit code.
//   sentcx <command> --config <path> [--force] [--workers N]
// Commands: ingest, featurize, index, train-baseline, pseudolabel,
// train-ensemble, evaluate, predict (--input, --output), verify.
int run(const std::vector<std::string>& args);

}  // namespace sentcx::cli

#pragma once

#include <iosfwd>
#include <string>

namespace inflect::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataFailure = 2, kNumericFailure = 3 };

// Entry point of the `inflect` tool. Progress and diagnostics go to `err`;
// `out` only receives help and version text.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// "data/eng.trn" -> "eng"
std::string language_from_path(const std::string& path);

}  // namespace inflect::cli

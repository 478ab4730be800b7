#pragma once

#include <string>
#include <vector>

namespace gradflip::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDivergence = 3;

// Entry point of the `gradflip` executable: gen-data, train, probe, eval.
int run(int argc, const char* const* argv);

// Same, without the program name.
int run(const std::vector<std::string>& args);

}  // namespace gradflip::cli

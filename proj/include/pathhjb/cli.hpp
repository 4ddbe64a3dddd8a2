#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace pathhjb {

inline constexpr int kOutputVersion = 1;

// Sorted keys, no whitespace, doubles with 17 significant digits (always
// carrying a decimal point or exponent), non-finite numbers as null.
std::string canonical_dump(const nlohmann::json& j);

// Runs one command line (args[0] is the subcommand). Exit status: 0 success,
// 2 a check failed, 1 error (message on `err`).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pathhjb

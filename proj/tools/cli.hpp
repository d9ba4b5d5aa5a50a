#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fewshot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Runs one subcommand (gen, train, eval, episodes, analyze). args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fewshot::cli

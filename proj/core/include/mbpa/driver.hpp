#pragma once

#include <string>
#include <vector>

#include "mbpa/run_config.hpp"

namespace mbpa {

struct RunOutcome {
  std::string headline;  // final summary line for stdout
  double headline_value = 0.0;
  std::vector<std::string> notes;  // per-repeat or per-sweep-point lines
};

// Executes the configured regime and writes metrics files plus the resolved
// config under cfg.out_dir. Deterministic: the same config and seed produce
// byte-identical metrics files, independent of thread count.
RunOutcome execute_run(const RunConfig& cfg);

}  // namespace mbpa

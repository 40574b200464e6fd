#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mbpa {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string comparator = "<";  // how `measured` relates to `threshold` on a pass
  std::string detail;
  double seconds = 0.0;
};

// Test-only fault hooks: mutation sanity for the verification suite itself.
struct FaultInjection {
  bool flip_adaptation_gradient_sign = false;
  bool knn_off_by_one = false;
};

// Analytic adaptation gradient vs central finite differences over seeded
// random (net, context) instances.
CheckResult check_gradient_oracle(std::uint64_t seed, FaultInjection faults = {});

// fit_logits converges to the kernel-weighted class histogram.
CheckResult check_attention_equivalence(std::uint64_t seed);

// lookup agrees with the independent brute-force oracle: identical
// neighbour sequences, weights within 1e-12.
CheckResult check_knn_exactness(std::uint64_t seed, FaultInjection faults = {});

// FIFO eviction for capacities 1..8 against an index-list simulation.
CheckResult check_fifo_eviction();

// T=0 and alpha=0 predictions are bit-identical to the parametric path, and
// the base parameters survive many adapted predictions untouched.
CheckResult check_identity_isolation(std::uint64_t seed);

// The adaptation correction shrinks as the parametric model fits the data
// behind the memory.
CheckResult check_self_regulation(std::uint64_t seed);

// Converged |delta| <= |grad NLL at theta| / beta (10% slack).
CheckResult check_beta_contraction(std::uint64_t seed);

// Trapezoidal AUC arithmetic on hand-computed values.
CheckResult check_auc_arithmetic();

// Desk-scale continual regime: parametric forgetting, MbPA recovery, and
// the random-replay comparison.
CheckResult check_continual_recovery(std::uint64_t seed, int threads);

// Novel-split ordering mbpa > mixture > parametric at the earliest
// checkpoint (majority over three seeds), plus exact mixture endpoints.
CheckResult check_incremental_ordering(std::uint64_t seed, int threads);

// Starved-class ordering at the final checkpoint (majority over three seeds).
CheckResult check_unbalanced_ordering(std::uint64_t seed, int threads);

// Byte-identical metrics files across invocations and thread counts {1, 4}.
CheckResult check_determinism(std::uint64_t seed);

// The fast subset (everything without a full regime run); < 60 s.
std::vector<CheckResult> run_fast_checks(std::uint64_t seed, int threads);

// All checks, ordered by acceptance criterion.
std::vector<CheckResult> run_all_checks(std::uint64_t seed, int threads);

std::string format_check(const CheckResult& r);

}  // namespace mbpa

// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Run via ctest or directly:
//   ./mbpa_acceptance [seed] [threads]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "mbpa/verify.hpp"

namespace {

struct Criterion {
  int number;
  const char* title;
  std::vector<mbpa::CheckResult> parts;
  bool pass() const {
    for (const auto& p : parts)
      if (!p.pass) return false;
    return true;
  }
};

}  // namespace

int main(int argc, char** argv) {
  std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  int threads = argc > 2 ? std::atoi(argv[2]) : 0;

  using namespace mbpa;
  std::vector<Criterion> criteria;
  criteria.push_back({1, "gradient oracle", {check_gradient_oracle(seed)}});
  criteria.push_back({2, "attention as a special case", {check_attention_equivalence(seed)}});
  criteria.push_back({3, "kNN exactness and FIFO eviction",
                      {check_knn_exactness(seed), check_fifo_eviction()}});
  criteria.push_back({4, "identity and isolation", {check_identity_isolation(seed)}});
  criteria.push_back({5, "self-regulation", {check_self_regulation(seed)}});
  criteria.push_back({6, "continual drop and recovery",
                      {check_continual_recovery(seed, threads)}});
  criteria.push_back({7, "incremental ordering", {check_incremental_ordering(seed, threads)}});
  criteria.push_back({8, "unbalanced ordering", {check_unbalanced_ordering(seed, threads)}});
  criteria.push_back({9, "beta contraction", {check_beta_contraction(seed)}});
  criteria.push_back({10, "AUC arithmetic", {check_auc_arithmetic()}});
  criteria.push_back({11, "end-to-end determinism", {check_determinism(seed)}});

  int failures = 0;
  for (const auto& c : criteria) {
    bool ok = c.pass();
    failures += ok ? 0 : 1;
    std::printf("[%2d/11] %s: %s\n", c.number, ok ? "PASS" : "FAIL", c.title);
    for (const auto& p : c.parts) std::printf("        %s\n", format_check(p).c_str());
  }
  std::printf("%d/11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}

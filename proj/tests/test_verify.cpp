#include <doctest.h>

#include "mbpa/verify.hpp"

using namespace mbpa;

TEST_SUITE("verify") {

TEST_CASE("fast checks pass on a fresh state") {
  for (const auto& c : run_fast_checks(1, 2)) {
    INFO(format_check(c));
    CHECK(c.pass);
  }
}

TEST_CASE("a sign flip in the adaptation gradient breaks the gradient check") {
  FaultInjection fault;
  fault.flip_adaptation_gradient_sign = true;
  CheckResult r = check_gradient_oracle(1, fault);
  CHECK_FALSE(r.pass);
}

TEST_CASE("a kNN off-by-one breaks the oracle agreement check") {
  FaultInjection fault;
  fault.knn_off_by_one = true;
  CheckResult r = check_knn_exactness(1, fault);
  CHECK_FALSE(r.pass);
}

TEST_CASE("check results format into one line each") {
  CheckResult r{.name = "demo", .pass = true, .measured = 0.5, .threshold = 1.0,
                .comparator = "<", .detail = "example", .seconds = 0.1};
  std::string line = format_check(r);
  CHECK(line.find("PASS demo") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}

}  // TEST_SUITE

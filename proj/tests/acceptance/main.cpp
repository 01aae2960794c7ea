#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "acceptance.hpp"

namespace {

struct Criterion {
  std::string label;
  std::function<void()> run;
  double budget_sec;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1. metric oracle suite", acceptance::metric_oracle_suite, 1.0},
      {"2. symmetric-loss closed forms", acceptance::symmetric_loss_closed_forms, 1.0},
      {"3. gradient checks vs central differences", acceptance::gradient_checks, 30.0},
      {"4. beam-search exactness vs enumeration", acceptance::beam_search_exactness, 30.0},
      {"5a. learning sanity: retrieval cluster task", acceptance::learning_sanity_retrieval, 300.0},
      {"5b. learning sanity: generation copy task", acceptance::learning_sanity_generation, 300.0},
      {"6. pipeline fidelity vs recount oracle", acceptance::pipeline_fidelity, 10.0},
      {"7. protocol conformance", acceptance::protocol_conformance, 30.0},
      {"8. determinism: byte-identical reports", acceptance::determinism, 300.0},
      {"9. setting isolation", acceptance::setting_isolation, 60.0},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty() && sec > c.budget_sec) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "exceeded %.0fs budget", c.budget_sec);
      error = buf;
    }
    if (error.empty()) {
      std::printf("[PASS] %s (%.2fs)\n", c.label.c_str(), sec);
    } else {
      std::printf("[FAIL] %s (%.2fs): %s\n", c.label.c_str(), sec, error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}

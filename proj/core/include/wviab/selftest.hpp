#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wviab {

struct SelftestResult {
  int failures = 0;
  std::vector<std::string> lines;  // one "[PASS]/[FAIL] criterion k: ..." each
};

/// Runs the acceptance battery (nine numbered criteria) and writes the
/// deterministic artifact set into out_dir, creating it if needed. The
/// artifact bytes depend only on the seed; the report lines may carry
/// measured runtimes.
SelftestResult run_selftest(const std::string& out_dir, std::uint64_t seed = 1);

}  // namespace wviab

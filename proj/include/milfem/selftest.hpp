#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace milfem {

struct SelftestResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Fast property suites: projector idempotence/contraction, discrete negative
// norm, discrete smoothing, Gronwall checker, Spijker brute-force oracle,
// Nemytskii derivative checks, RNG reproducibility across worker counts.
std::vector<SelftestResult> run_selftest(std::uint64_t seed = 20240901,
                                         const std::function<void(const SelftestResult&)>&
                                             on_result = nullptr);

} // namespace milfem

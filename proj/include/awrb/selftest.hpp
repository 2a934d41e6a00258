#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace awrb {

struct SelftestCheck {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured deviation (or quantity)
  double tolerance = 0.0;  // pass threshold for value
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  std::uint64_t seed = 7;
  std::vector<std::string> suites;  // empty: all of wavelet, multitree, affine, offline-online
  std::function<void(const SelftestCheck&)> on_check;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  double seconds = 0.0;
  bool passed() const;
};

// Invariant suites on desk-scale instances with dense oracles.
SelftestReport run_selftest(const SelftestOptions& opt = {});

}  // namespace awrb

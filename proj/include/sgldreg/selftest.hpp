#pragma once

#include <functional>
#include <string>
#include <vector>

namespace sgldreg {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Gradient checks, noise statistics, warp oracles and the Adam trajectory
// oracle. `report` is called after each check.
std::vector<SelftestCheck> run_selftest(const std::function<void(const SelftestCheck&)>& report = {});

}  // namespace sgldreg

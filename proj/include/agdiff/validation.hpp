#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace agdiff {

struct Check {
  std::string name;
  bool passed = true;
  std::optional<double> witness; // sample point that violated the check
  std::string detail;
};

/// Pass/fail outcome per structural assumption. Failures are data, not errors.
struct ValidationReport {
  std::vector<Check> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool passed(const std::string& name) const {
    const Check* c = find(name);
    return c != nullptr && c->passed;
  }
};

} // namespace agdiff

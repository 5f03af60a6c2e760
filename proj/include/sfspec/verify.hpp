#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sfspec {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyCheck> checks;
  bool passed() const;
};

struct VerifyOptions {
  /// Growth-eigenvalue formula under test; swap in a mutant to check that the
  /// eigen suite catches it.
  std::function<double(double, double, double)> growth_formula;
  std::uint64_t seed = 12345;
};

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"polar", "averaging", "lemma1", "lemma2",
                                                 "eigen", "bound",     "gradcheck"};
  return names;
}

/// Runs one suite, or every suite for "all". Throws ConfigError for an
/// unknown suite name.
VerifyReport verify(const std::string& suite, const VerifyOptions& opts = {});

std::string report_json(const VerifyReport& r);

}  // namespace sfspec

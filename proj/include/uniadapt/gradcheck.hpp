#ifndef UNIADAPT_GRADCHECK_HPP
#define UNIADAPT_GRADCHECK_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace uniadapt::gradcheck {

struct CheckOptions {
  std::size_t draws_per_loss = 100;
  double step = 1e-5;       // central-difference half-width
  double tolerance = 1e-4;  // max allowed relative error
  std::uint64_t seed = 0;
  // Test hook: added to one analytic gradient entry so the negative-control
  // path (a deliberately wrong gradient must fail) is exercisable end to end.
  double perturbation = 0.0;
};

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t draws = 0;
  bool passed = false;
};

struct CheckReport {
  std::vector<CheckResult> results;  // the five loss terms, then the composite
  bool all_passed() const;
};

// Compares every analytic gradient against central finite differences on
// float64, across random networks, batches, and class counts K in
// {2, 3, 5, 10}. Losses with a non-differentiable seam (the hard negative
// max, the margin band edges, the multi-class argmax) are checked away from
// the seam: draws landing too close are redrawn, since no gradient test is
// meaningful where the one-sided derivatives disagree. Relative error uses
// |a - fd| / max(|a|, |fd|, 1e-3).
CheckReport run(const CheckOptions& options);

void print_report(const CheckReport& report, const CheckOptions& options, std::FILE* out);

}  // namespace uniadapt::gradcheck

#endif

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prefopt::acceptance {

struct Options {
  // Negative-control hook: corrupts the curvature closed form checked by
  // criterion 6 so the suite demonstrably fails when a constant is wrong.
  bool inject_bad_curvature = false;
};

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs the full acceptance suite on built-in instances; one result per
// criterion. When live is non-null a PASS/FAIL line is streamed per criterion
// as it completes.
std::vector<CriterionResult> run_all(const Options& options = {}, std::ostream* live = nullptr);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace prefopt::acceptance

// Recomputes the frozen censoring constants: for each study and each
// published target rate, bisect the constant until the empirical
// censoring fraction at n=10000 hits the target. Prints the table that
// lives in censoring_constant() so the values can be checked or
// refreshed after a design change.

#include <cstdio>

#include "censdr/simgen.hpp"

int main() {
  using censdr::StudyId;
  const StudyId studies[] = {StudyId::s1, StudyId::s2, StudyId::s3,
                             StudyId::s4, StudyId::s5};
  const double targets[] = {0.20, 0.40};
  std::printf("%-6s %-7s %-12s %-10s\n", "study", "target", "constant",
              "achieved");
  for (StudyId id : studies) {
    for (double target : targets) {
      const double c = censdr::calibrate_censoring(id, target);
      const double got = censdr::empirical_censoring_rate(id, c, 10000, 20259);
      std::printf("%-6s %-7.2f %-22.15g %-10.4f\n",
                  censdr::study_name(id).c_str(), target, c, got);
      std::printf("      {StudyId::%s, %.2f, %.17g},\n",
                  censdr::study_name(id).c_str(), target, c);
    }
  }
  return 0;
}

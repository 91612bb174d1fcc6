#pragma once

#include <string>
#include <vector>

#include "core/ico_group.hpp"

namespace i2i {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Individual invariant checks. They take the group as an argument so a test
// can hand in a deliberately corrupted copy and watch the check fail.
CheckResult check_group_axioms(const IcoGroup& group);
CheckResult check_quotient(const IcoGroup& group);
CheckResult check_oracle_equivalence(const IcoGroup& group);
CheckResult check_layer_equivariance(const IcoGroup& group);
CheckResult check_encoder_c4();
CheckResult check_end_to_end_180(const IcoGroup& group);
CheckResult check_gradients(const IcoGroup& group);
CheckResult check_rotation_contracts(const IcoGroup& group);
CheckResult check_quantization_stats(const IcoGroup& group, int samples = 1000000);

// The full suite in order; report() renders one line per check plus the
// measured oracle constants.
std::vector<CheckResult> run_verification(const IcoGroup& group, int mc_samples = 1000000);
std::string verification_report(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace i2i

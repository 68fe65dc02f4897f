#ifndef TILTWISE_VALIDATE_HPP
#define TILTWISE_VALIDATE_HPP

#include <string>
#include <vector>

namespace tiltwise {

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;   // the observed discrepancy
    double threshold = 0.0;  // what it must stay below
    std::string detail;
};

// Built-in consistency suite run by `tiltwise validate`: tilt identities, the
// base-case collapse against independently coded estimators, outcome-model /
// augmented agreement under saturated nuisances, selection moment residuals
// with the dr collapse, the odds-of-selection probe, and simulation oracle
// consistency. `quick` shrinks the sample sizes.
std::vector<CheckResult> run_builtin_checks(bool quick);

}  // namespace tiltwise

#endif

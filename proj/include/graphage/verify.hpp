#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace graphage {

struct GradCheckCase {
    std::string name;
    double rel_err = 0.0;
    double tolerance = 0.0;
    bool ok() const { return rel_err <= tolerance; }
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    bool all_ok() const;
    const GradCheckCase& worst() const;  // largest rel_err / tolerance ratio
};

// Finite-difference verification of every differentiable op, the encoder for
// each conv variant, and the end-to-end objective on a small graph.
GradCheckReport run_gradcheck_suite();

void print_report(const GradCheckReport& report, std::ostream& os);

}  // namespace graphage

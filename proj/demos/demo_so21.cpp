// Walkthrough on the built-in so(2,1) system: bracket relations of the
// integral map, hypothesis checks, and fiber classification.

#include <iostream>

#include "ncint/ncint.hpp"

int main() {
    using namespace ncint;

    // The system: chart (r, y, gamma, x1), canonical two-block
    // bivector, integrals forming the hyperbolic momentum map.
    SystemDefinition sys = builtin_so21();
    std::cout << "system definition in canonical form:\n\n"
              << serialize_system(sys) << "\n";

    // Bracket relations of the integrals, printed symbolically.
    std::cout << "bracket relations {H_i, H_j}:\n";
    for (int i = 0; i < sys.k; ++i)
        for (int j = i + 1; j < sys.k; ++j) {
            Expr b = bracket(sys.integrals[static_cast<size_t>(i)],
                             sys.integrals[static_cast<size_t>(j)], sys.bivector());
            std::cout << "  {H" << i + 1 << ", H" << j + 1 << "} = " << to_string(b) << "\n";
        }

    // The Lie-Poisson image: same relations, linear coordinates.
    SystemDefinition target = builtin_so21_coalgebra();
    std::cout << "\ncoalgebra bracket {x1, x2} = "
              << to_string(bracket(Expr::var("x1"), Expr::var("x2"), target.bivector()))
              << "\n";

    // Hypothesis checks at seeded sample points.
    HypothesisReport report = run_hypothesis_checks(sys);
    std::cout << "\nhypothesis checks (seed " << report.seed << ", " << report.points_used
              << " points):\n";
    for (const CheckResult& c : report.checks)
        std::cout << "  " << (c.pass ? "pass" : "FAIL") << "  " << c.name
                  << (c.applicable ? "" : " (not applicable)") << "\n";
    std::cout << "overall: " << (report.pass ? "pass" : "FAIL") << "\n";

    // Classify the invariant fiber through a chart point.
    std::vector<double> x0 = {1.5, 0.0, 0.25, 0.25};
    TopologyReport topo = classify_fiber(sys, x0, 20.0, 1e-4);
    std::cout << "\nfiber through (1.5, 0, 0.25, 0.25): " << topo.classification << "\n";
    return report.pass ? 0 : 1;
}

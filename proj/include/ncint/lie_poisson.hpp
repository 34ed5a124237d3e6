#pragma once

// Lie-Poisson structures on coalgebra charts: linear bivectors built
// from structure constants, coadjoint action fields, and statistical
// Casimir verification.
//
// Coalgebra coordinates are named x1..xk.  Public element indices are
// 1-based, matching the external file syntax (H<i>, C<i>, W[i,j]).

#include <string>
#include <vector>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"
#include "ncint/poisson.hpp"

namespace ncint {

/// Ordered sample points, one vector of values per point, aligned with
/// the coordinate order of the structure being checked.
using PointList = std::vector<std::vector<double>>;

/// Finite-dimensional Lie algebra given by structure constants
/// c_ij^h with [e_i, e_j] = sum_h c_ij^h e_h.
class LieAlgebra {
public:
    explicit LieAlgebra(int k) : k_(k), c_(static_cast<size_t>(k) * k * k, 0.0) {
        if (k < 1) throw ValidationError("Lie algebra dimension must be positive");
    }

    int dim() const { return k_; }

    /// Set c_ij^h (0-based) and its antisymmetric partner c_ji^h = -c_ij^h.
    void set(int i, int j, int h, double v) {
        check(i); check(j); check(h);
        if (i == j && v != 0.0)
            throw InvalidStructureConstants("c_ii^h must vanish");
        at(i, j, h) = v;
        at(j, i, h) = -v;
    }

    double c(int i, int j, int h) const {
        check(i); check(j); check(h);
        return c_[index(i, j, h)];
    }

    /// Build from a dense tensor t[i][j][h]; validates antisymmetry and
    /// the Jacobi identity of the constants (tolerance 1e-12).
    static LieAlgebra from_tensor(int k, const std::vector<double>& t) {
        if (t.size() != static_cast<size_t>(k) * k * k)
            throw InvalidStructureConstants("tensor size must be k^3");
        LieAlgebra a(k);
        a.c_ = t;
        a.validate();
        return a;
    }

    /// Throws InvalidStructureConstants on antisymmetry or Jacobi failure.
    void validate() const {
        for (int i = 0; i < k_; ++i)
            for (int j = 0; j < k_; ++j)
                for (int h = 0; h < k_; ++h)
                    if (std::abs(c(i, j, h) + c(j, i, h)) > 1e-12)
                        throw InvalidStructureConstants(
                            "structure constants are not antisymmetric in the lower indices");
        for (int i = 0; i < k_; ++i)
            for (int j = i + 1; j < k_; ++j)
                for (int l = j + 1; l < k_; ++l)
                    for (int m = 0; m < k_; ++m) {
                        double s = 0.0;
                        for (int h = 0; h < k_; ++h)
                            s += c(i, j, h) * c(h, l, m) + c(j, l, h) * c(h, i, m) +
                                 c(l, i, h) * c(h, j, m);
                        if (std::abs(s) > 1e-12)
                            throw InvalidStructureConstants(
                                "structure constants violate the Jacobi identity");
                    }
    }

    /// Coalgebra chart coordinate names x1..xk.
    std::vector<std::string> coordinates() const {
        std::vector<std::string> names;
        names.reserve(static_cast<size_t>(k_));
        for (int i = 1; i <= k_; ++i) names.push_back("x" + std::to_string(i));
        return names;
    }

private:
    void check(int i) const {
        if (i < 0 || i >= k_) throw IndexOutOfRange("structure constant index out of range");
    }
    size_t index(int i, int j, int h) const {
        return (static_cast<size_t>(i) * k_ + j) * k_ + h;
    }
    double& at(int i, int j, int h) { return c_[index(i, j, h)]; }

    int k_;
    std::vector<double> c_;
};

/// Linear bivector W^{ij} = sum_h c_ij^h x_h on the coalgebra chart.
/// Coordinate brackets then satisfy {x_i, x_j} = sum_h c_ij^h x_h.
inline PoissonStructure lie_poisson_bivector(const LieAlgebra& a) {
    const int k = a.dim();
    auto coords = a.coordinates();
    PoissonStructure w(coords);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            Expr acc(0.0);
            for (int h = 0; h < k; ++h)
                if (a.c(i, j, h) != 0.0)
                    acc = detail::s_add(acc, detail::s_mul(Expr(a.c(i, j, h)),
                                                           Expr::var(coords[h])));
            w.set_upper(i, j, acc);
        }
    return w;
}

/// Coadjoint action field of the i-th basis element (1-based): the
/// j-th component is eps_i(x_j) = sum_h c_ij^h x_h.  Coincides with the
/// Hamiltonian field of x_i under the Lie-Poisson bivector.
inline VectorField coadjoint_action(const LieAlgebra& a, int i_one_based) {
    const int k = a.dim();
    if (i_one_based < 1 || i_one_based > k)
        throw IndexOutOfRange("coadjoint_action: basis index out of range");
    const int i = i_one_based - 1;
    auto coords = a.coordinates();
    std::vector<Expr> comps(static_cast<size_t>(k), Expr(0.0));
    for (int j = 0; j < k; ++j) {
        Expr acc(0.0);
        for (int h = 0; h < k; ++h)
            if (a.c(i, j, h) != 0.0)
                acc = detail::s_add(acc, detail::s_mul(Expr(a.c(i, j, h)),
                                                       Expr::var(coords[h])));
        comps[static_cast<size_t>(j)] = acc;
    }
    return VectorField(coords, std::move(comps));
}

/// Statistical Casimir check: max |{C, x_j}| over sampled points.
struct CasimirReport {
    bool pass = false;
    double max_residual = 0.0;
    std::vector<size_t> excised; // points where C or the bracket was undefined
    double tolerance = 0.0;
};

/// Verify that C brackets to ~0 with every coordinate function at the
/// sampled points.  Points outside the domain of C are excised and
/// listed; the check fails if no point survives.
inline CasimirReport verify_casimir(const Expr& c, const PoissonStructure& w,
                                    const PointList& points, double tol = 1e-9) {
    CasimirReport report;
    report.tolerance = tol;
    const auto& coords = w.coordinates();
    std::vector<Expr> brackets;
    brackets.reserve(coords.size());
    for (const std::string& name : coords)
        brackets.push_back(bracket(c, Expr::var(name), w));
    size_t survivors = 0;
    for (size_t p = 0; p < points.size(); ++p) {
        try {
            double worst = 0.0;
            for (const Expr& b : brackets)
                worst = std::max(worst, std::abs(evaluate_at(b, coords, points[p])));
            report.max_residual = std::max(report.max_residual, worst);
            ++survivors;
        } catch (const DomainError&) {
            report.excised.push_back(p);
        }
    }
    report.pass = survivors > 0 && report.max_residual < tol;
    return report;
}

/// so(2,1) basis: c_12^3 = -1, c_23^1 = 1, c_31^2 = 1.
inline LieAlgebra make_so21() {
    LieAlgebra a(3);
    a.set(0, 1, 2, -1.0);
    a.set(1, 2, 0, 1.0);
    a.set(2, 0, 1, 1.0);
    return a;
}

/// so(3) basis: c_ij^h is the Levi-Civita symbol.
inline LieAlgebra make_so3() {
    LieAlgebra a(3);
    a.set(0, 1, 2, 1.0);
    a.set(1, 2, 0, 1.0);
    a.set(2, 0, 1, 1.0);
    return a;
}

/// Abelian algebra: all constants vanish.
inline LieAlgebra make_abelian(int k) { return LieAlgebra(k); }

} // namespace ncint

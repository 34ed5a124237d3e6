#pragma once

// Poisson bivectors, symplectic forms, and the bracket calculus on a
// single coordinate chart.
//
// Global orientation convention, used everywhere in this library:
//   * a wedge term  a * d/dx_i ^ d/dx_j  contributes W^{ij} = +a,
//   * {f, g} = sum_{i,j} W^{ij} (df/dx_i) (dg/dx_j),
//   * the Hamiltonian vector field of H has components
//       theta_H^i = sum_j W^{ji} dH/dx_j,  so  theta_H(f) = {H, f},
//     and time evolution along theta_H is  df/dt = {H, f}.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <span>
#include <string>
#include <vector>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"

namespace ncint {

namespace detail {

inline size_t upper_index(int d, int i, int j) {
    // strict upper triangle, row-major: (0,1), (0,2), ..., (d-2,d-1)
    return static_cast<size_t>(i) * d - static_cast<size_t>(i) * (i + 1) / 2 +
           static_cast<size_t>(j - i - 1);
}

/// Numeric rank via SVD with a relative threshold on singular values.
inline int numeric_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-9) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    double top = sv.size() ? sv(0) : 0.0;
    if (top == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * top) ++rank;
    return rank;
}

} // namespace detail

/// Antisymmetric bivector with expression entries.  Only the strict
/// upper triangle is stored, so antisymmetry holds by construction.
class PoissonStructure {
public:
    explicit PoissonStructure(std::vector<std::string> coords)
        : coords_(std::move(coords)),
          upper_(coords_.size() * (coords_.size() - 1) / 2) {
        if (coords_.empty()) throw ValidationError("structure needs at least one coordinate");
    }

    int dim() const { return static_cast<int>(coords_.size()); }
    const std::vector<std::string>& coordinates() const { return coords_; }

    /// Set W^{ij} for 0-based i < j.
    void set_upper(int i, int j, Expr e) {
        check_upper(i, j);
        upper_[detail::upper_index(dim(), i, j)] = std::move(e);
    }

    const Expr& upper(int i, int j) const {
        check_upper(i, j);
        return upper_[detail::upper_index(dim(), i, j)];
    }

    /// Signed entry W^{ij} for any i, j.
    Expr component(int i, int j) const {
        if (i < 0 || j < 0 || i >= dim() || j >= dim())
            throw IndexOutOfRange("bivector index out of range");
        if (i == j) return Expr(0.0);
        if (i < j) return upper(i, j);
        return detail::s_neg(upper(j, i));
    }

    /// W^{ij}(p) as a dense antisymmetric matrix.
    Eigen::MatrixXd matrix_at(std::span<const double> values) const {
        const int d = dim();
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                double v = evaluate_at(upper(i, j), coords_, values);
                w(i, j) = v;
                w(j, i) = -v;
            }
        return w;
    }

private:
    void check_upper(int i, int j) const {
        if (i < 0 || j >= dim() || i >= j)
            throw IndexOutOfRange("bivector upper-triangle index out of range");
    }
    std::vector<std::string> coords_;
    std::vector<Expr> upper_;
};

/// Antisymmetric 2-form with expression entries on an even-dimensional
/// chart.  Storage mirrors PoissonStructure.  Nondegeneracy is checked
/// where an inverse is taken, not at construction.
class SymplecticForm {
public:
    explicit SymplecticForm(std::vector<std::string> coords)
        : coords_(std::move(coords)),
          upper_(coords_.size() * (coords_.size() - 1) / 2) {
        if (coords_.empty() || coords_.size() % 2 != 0)
            throw ValidationError("symplectic form needs an even-dimensional chart");
    }

    int dim() const { return static_cast<int>(coords_.size()); }
    const std::vector<std::string>& coordinates() const { return coords_; }

    void set_upper(int i, int j, Expr e) {
        if (i < 0 || j >= dim() || i >= j)
            throw IndexOutOfRange("form upper-triangle index out of range");
        upper_[detail::upper_index(dim(), i, j)] = std::move(e);
    }
    const Expr& upper(int i, int j) const {
        if (i < 0 || j >= dim() || i >= j)
            throw IndexOutOfRange("form upper-triangle index out of range");
        return upper_[detail::upper_index(dim(), i, j)];
    }
    Expr component(int i, int j) const {
        if (i < 0 || j < 0 || i >= dim() || j >= dim())
            throw IndexOutOfRange("form index out of range");
        if (i == j) return Expr(0.0);
        if (i < j) return upper(i, j);
        return detail::s_neg(upper(j, i));
    }

    Eigen::MatrixXd matrix_at(std::span<const double> values) const {
        const int d = dim();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                double v = evaluate_at(upper(i, j), coords_, values);
                m(i, j) = v;
                m(j, i) = -v;
            }
        return m;
    }

private:
    std::vector<std::string> coords_;
    std::vector<Expr> upper_;
};

/// First-order differential operator: one expression per coordinate.
struct VectorField {
    std::vector<std::string> coords;
    std::vector<Expr> components;

    VectorField(std::vector<std::string> coords_, std::vector<Expr> components_)
        : coords(std::move(coords_)), components(std::move(components_)) {
        if (coords.size() != components.size())
            throw ValidationError("vector field needs one component per coordinate");
    }
};

/// theta(f) = sum_i V^i df/dx_i as an expression.
inline Expr directional_derivative(const VectorField& v, const Expr& f) {
    Expr acc(0.0);
    for (size_t i = 0; i < v.coords.size(); ++i)
        acc = detail::s_add(acc, detail::s_mul(v.components[i],
                                               differentiate(f, v.coords[i])));
    return acc;
}

/// Vector field compiled against its own coordinate order.
class CompiledVectorField {
public:
    explicit CompiledVectorField(const VectorField& v) : dim_(static_cast<int>(v.coords.size())) {
        comps_.reserve(v.components.size());
        for (const Expr& e : v.components)
            comps_.push_back(compile(e, v.coords));
    }
    int dim() const { return dim_; }
    void operator()(std::span<const double> x, std::span<double> dxdt) const {
        for (size_t i = 0; i < comps_.size(); ++i) dxdt[i] = comps_[i](x);
    }

private:
    int dim_;
    std::vector<CompiledExpr> comps_;
};

namespace detail {

inline void require_vars_in_chart(const Expr& e, const std::vector<std::string>& coords,
                                  const char* what) {
    for (const std::string& v : variables(e))
        if (std::find(coords.begin(), coords.end(), v) == coords.end())
            throw UnboundVariable(std::string(what) + " references " + v +
                                  ", which is not a chart coordinate");
}

} // namespace detail

/// {f, g} under W, folded.  Structurally equal arguments yield the
/// exact zero expression (antisymmetry).
inline Expr bracket(const Expr& f, const Expr& g, const PoissonStructure& w) {
    const auto& coords = w.coordinates();
    detail::require_vars_in_chart(f, coords, "bracket argument");
    detail::require_vars_in_chart(g, coords, "bracket argument");
    if (equal(f, g)) return Expr(0.0);
    const int d = w.dim();
    std::vector<Expr> df(d), dg(d);
    for (int i = 0; i < d; ++i) {
        df[i] = differentiate(f, coords[i]);
        dg[i] = differentiate(g, coords[i]);
    }
    Expr acc(0.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            Expr anti = detail::s_sub(detail::s_mul(df[i], dg[j]),
                                      detail::s_mul(df[j], dg[i]));
            acc = detail::s_add(acc, detail::s_mul(w.upper(i, j), anti));
        }
    return fold_constants(acc);
}

/// theta_H with components theta^i = sum_j W^{ji} dH/dx_j, so that
/// theta_H(f) = {H, f}.
inline VectorField hamiltonian_vector_field(const Expr& h, const PoissonStructure& w) {
    const auto& coords = w.coordinates();
    detail::require_vars_in_chart(h, coords, "Hamiltonian");
    const int d = w.dim();
    std::vector<Expr> dh(d);
    for (int j = 0; j < d; ++j) dh[j] = differentiate(h, coords[j]);
    std::vector<Expr> comps(d, Expr(0.0));
    for (int i = 0; i < d; ++i) {
        Expr acc(0.0);
        for (int j = 0; j < d; ++j)
            acc = detail::s_add(acc, detail::s_mul(w.component(j, i), dh[j]));
        comps[i] = fold_constants(acc);
    }
    return VectorField(coords, std::move(comps));
}

/// Cyclic Jacobi sum {f,{g,h}} + {g,{h,f}} + {h,{f,g}} evaluated at a
/// point.  Zero (to roundoff) for every valid Poisson structure.
inline double jacobi_residual(const PoissonStructure& w, const Expr& f, const Expr& g,
                              const Expr& h, std::span<const double> values) {
    Expr sum = detail::s_add(
        detail::s_add(bracket(f, bracket(g, h, w), w), bracket(g, bracket(h, f, w), w)),
        bracket(h, bracket(f, g, w), w));
    return evaluate_at(sum, w.coordinates(), values);
}

namespace detail {

inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m, const char* what) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (std::abs(lu.determinant()) < 1e-12)
        throw DegenerateForm(std::string(what) + ": |det| < 1e-12 at evaluation point");
    return lu.inverse();
}

} // namespace detail

/// Pointwise matrix inverse of the form: the bivector W = Omega^{-1}.
/// Under the global convention the canonical block Omega = dp ^ dq maps
/// to W^{qp} = +1 (the classical {q, p} = 1).
inline Eigen::MatrixXd invert_symplectic(const SymplecticForm& s,
                                         std::span<const double> values) {
    return detail::checked_inverse(s.matrix_at(values), "invert_symplectic");
}

/// Pointwise inverse of the bivector: the 2-form Omega = W^{-1}.
inline Eigen::MatrixXd invert_bivector(const PoissonStructure& w,
                                       std::span<const double> values) {
    return detail::checked_inverse(w.matrix_at(values), "invert_bivector");
}

/// Push W forward through the chart map u = chart(x) at one point:
/// W'^{ab} = sum_{ij} (du_a/dx_i) W^{ij} (du_b/dx_j).  The chart
/// Jacobian must have full rank at the point (SingularChart otherwise).
inline Eigen::MatrixXd pushforward_bivector(const PoissonStructure& w,
                                            const std::vector<Expr>& chart,
                                            std::span<const double> values) {
    const auto& coords = w.coordinates();
    const int d = w.dim();
    const int dn = static_cast<int>(chart.size());
    if (dn == 0) throw ValidationError("pushforward needs at least one chart component");
    for (const Expr& c : chart) detail::require_vars_in_chart(c, coords, "chart component");
    Eigen::MatrixXd jac(dn, d);
    for (int a = 0; a < dn; ++a)
        for (int i = 0; i < d; ++i)
            jac(a, i) = evaluate_at(differentiate(chart[a], coords[i]), coords, values);
    if (detail::numeric_rank(jac) < std::min(dn, d))
        throw SingularChart("pushforward_bivector: chart Jacobian lost rank at point");
    return jac * w.matrix_at(values) * jac.transpose();
}

/// Symbolic W = Omega^{-1} via adjugate over determinant, folded.  For
/// the canonical constant forms this collapses to a constant bivector;
/// general entries stay exact but grow.  Degeneracy surfaces as a
/// division by zero at evaluation time.
inline PoissonStructure invert_symplectic_symbolic(const SymplecticForm& s) {
    const int d = s.dim();
    if (d > 8) throw ValidationError("symbolic inversion supported up to dimension 8");
    std::vector<std::vector<Expr>> m(d, std::vector<Expr>(d, Expr(0.0)));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m[i][j] = s.component(i, j);

    auto minor_det = [&](auto&& self, const std::vector<int>& rows,
                         const std::vector<int>& cols) -> Expr {
        if (rows.size() == 1) return m[rows[0]][cols[0]];
        Expr acc(0.0);
        std::vector<int> sub_rows(rows.begin() + 1, rows.end());
        for (size_t c = 0; c < cols.size(); ++c) {
            const Expr& pivot = m[rows[0]][cols[c]];
            if (pivot.is_constant(0.0)) continue;
            std::vector<int> sub_cols;
            for (size_t k = 0; k < cols.size(); ++k)
                if (k != c) sub_cols.push_back(cols[k]);
            Expr term = detail::s_mul(pivot, self(self, sub_rows, sub_cols));
            acc = (c % 2 == 0) ? detail::s_add(acc, term) : detail::s_sub(acc, term);
        }
        return acc;
    };

    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;
    Expr det = fold_constants(minor_det(minor_det, all, all));
    if (det.is_constant(0.0))
        throw DegenerateForm("invert_symplectic_symbolic: identically singular form");

    PoissonStructure w(s.coordinates());
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            // inverse(i,j) = (-1)^{i+j} * minor with row j, column i removed / det
            std::vector<int> rows, cols;
            for (int r = 0; r < d; ++r)
                if (r != j) rows.push_back(r);
            for (int c = 0; c < d; ++c)
                if (c != i) cols.push_back(c);
            Expr cof = minor_det(minor_det, rows, cols);
            if ((i + j) % 2 != 0) cof = detail::s_neg(cof);
            w.set_upper(i, j, fold_constants(detail::s_div(cof, det)));
        }
    return w;
}

} // namespace ncint

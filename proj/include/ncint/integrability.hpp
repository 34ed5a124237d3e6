#pragma once

// Hypothesis checks for noncommutative integrability on a chart:
//   * the structure satisfies the Jacobi identity,
//   * the integral map is a submersion,
//   * pairwise brackets of the integrals are constant along the fibers
//     of the integral map (closure),
//   * the bracket matrix of the integrals has the right corank,
//   * the Casimir pullback directions span an isotropic subspace,
//   * pulled-back Casimirs commute with every integral.
// Plus an advisory completeness probe and the invariant-manifold
// classifier built on top of the sampling machinery in flows.hpp.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"
#include "ncint/flows.hpp"
#include "ncint/poisson.hpp"
#include "ncint/systems.hpp"

namespace ncint {

struct CheckConfig {
    std::uint64_t seed = 12345;
    int points = 50;
    double tol_jacobi = 1e-8;
    double tol_closure = 1e-6;
    double tol_isotropy = 1e-8;
    double tol_coinduced = 1e-8;
    double tol_flow = 1e-10;
    std::vector<double> closure_times = {0.5, 1.0, 2.0, 5.0};
    double advisory_horizon = 5.0;
    int advisory_points = 5;
};

struct CheckResult {
    std::string name;
    bool applicable = true; // false: structurally void on this system (never gates)
    bool gates = true;      // false: advisory only
    bool pass = false;
    double metric = 0.0;    // worst observed value (residual, drift, ...)
    double tolerance = 0.0;
    std::vector<std::string> notes;
};

struct HypothesisReport {
    std::string system;
    bool pass = false;
    int points_used = 0;
    std::uint64_t seed = 0;
    std::vector<CheckResult> checks;

    const CheckResult& check(const std::string& name) const {
        for (const CheckResult& c : checks)
            if (c.name == name) return c;
        throw ValidationError("no check named " + name);
    }
};

// ---------------------------------------------------------------------------
// Symbolic building blocks
// ---------------------------------------------------------------------------

/// Upper triangle of the bracket matrix s_ij = {H_i, H_j}, row-major.
inline std::vector<Expr> structure_matrix_entries(const SystemDefinition& sys) {
    std::vector<Expr> entries;
    const int k = sys.k;
    entries.reserve(static_cast<size_t>(k * (k - 1) / 2));
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            entries.push_back(bracket(sys.integrals[static_cast<size_t>(i)],
                                      sys.integrals[static_cast<size_t>(j)], sys.bivector()));
    return entries;
}

/// Bracket matrix evaluated at a chart point.
inline Eigen::MatrixXd structure_matrix_at(const SystemDefinition& sys,
                                           std::span<const double> point) {
    std::vector<Expr> entries = structure_matrix_entries(sys);
    const int k = sys.k;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
    size_t idx = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j, ++idx) {
            double v = evaluate_at(entries[idx], sys.coords, point);
            s(i, j) = v;
            s(j, i) = -v;
        }
    return s;
}

/// Casimirs composed with the integral map: C_lambda(H1..Hk) as chart
/// expressions.  Throws MissingCasimirs when the system declares none.
inline std::vector<Expr> pullback_casimirs(const SystemDefinition& sys) {
    if (sys.casimirs.empty())
        throw MissingCasimirs("system " + sys.name + " declares no Casimirs");
    std::map<std::string, Expr> repl;
    auto xnames = sys.coalgebra_coordinates();
    for (size_t i = 0; i < xnames.size(); ++i) repl.emplace(xnames[i], sys.integrals[i]);
    std::vector<Expr> pulled;
    pulled.reserve(sys.casimirs.size());
    for (const Expr& c : sys.casimirs) pulled.push_back(fold_constants(substitute(c, repl)));
    return pulled;
}

/// Fiber-direction fields: for each Casimir C_lambda, the combination
///   sum_i (dC_lambda/dx_i)(H(x)) * X_{H_i}
/// of the integral Hamiltonian fields.  These are tangent to the fibers
/// of the integral map whenever the hypotheses hold.
inline std::vector<VectorField> casimir_pullback_fields(const SystemDefinition& sys) {
    if (sys.casimirs.empty())
        throw MissingCasimirs("system " + sys.name + " declares no Casimirs");
    std::map<std::string, Expr> repl;
    auto xnames = sys.coalgebra_coordinates();
    for (size_t i = 0; i < xnames.size(); ++i) repl.emplace(xnames[i], sys.integrals[i]);

    std::vector<VectorField> integral_fields;
    integral_fields.reserve(sys.integrals.size());
    for (const Expr& h : sys.integrals)
        integral_fields.push_back(hamiltonian_vector_field(h, sys.bivector()));

    std::vector<VectorField> fields;
    const int d = sys.dim();
    for (const Expr& c : sys.casimirs) {
        VectorField combo(sys.coords, std::vector<Expr>(static_cast<size_t>(d), Expr(0.0)));
        for (int i = 0; i < sys.k; ++i) {
            Expr coeff = fold_constants(
                substitute(differentiate(c, xnames[static_cast<size_t>(i)]), repl));
            if (coeff.is_constant(0.0)) continue;
            for (int a = 0; a < d; ++a)
                combo.components[static_cast<size_t>(a)] = fold_constants(
                    combo.components[static_cast<size_t>(a)] +
                    coeff * integral_fields[static_cast<size_t>(i)].components[static_cast<size_t>(a)]);
        }
        fields.push_back(std::move(combo));
    }
    return fields;
}

// ---------------------------------------------------------------------------
// Individual checks
// ---------------------------------------------------------------------------

namespace detail {

/// Evaluate `fn` at every point; DomainError points are excised and
/// listed in `notes`.  Returns the number of surviving points.
template <typename Fn>
inline int for_valid_points(const PointList& points, std::vector<std::string>& notes,
                            const char* what, Fn&& fn) {
    int used = 0;
    int excised = 0;
    for (size_t idx = 0; idx < points.size(); ++idx) {
        try {
            fn(points[idx]);
            ++used;
        } catch (const DomainError&) {
            ++excised;
        }
    }
    if (excised > 0)
        notes.push_back(std::string(what) + ": excised " + std::to_string(excised) +
                        " of " + std::to_string(points.size()) +
                        " sample points outside the expression domain");
    return used;
}

} // namespace detail

/// Jacobi identity of the chart structure on all coordinate triples.
inline CheckResult check_jacobi(const SystemDefinition& sys, const PointList& points,
                                double tol = 1e-8) {
    CheckResult result;
    result.name = "jacobi";
    result.tolerance = tol;
    const int d = sys.dim();
    if (d < 3) {
        result.pass = true;
        result.notes.push_back("chart dimension < 3: identity holds trivially");
        return result;
    }
    std::vector<Expr> coord_exprs;
    for (const std::string& c : sys.coords) coord_exprs.push_back(Expr::var(c));
    int used = detail::for_valid_points(points, result.notes, "jacobi", [&](const auto& p) {
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j)
                for (int h = j + 1; h < d; ++h) {
                    double r = jacobi_residual(sys.bivector(), coord_exprs[static_cast<size_t>(i)],
                                               coord_exprs[static_cast<size_t>(j)],
                                               coord_exprs[static_cast<size_t>(h)], p);
                    result.metric = std::max(result.metric, std::abs(r));
                }
    });
    result.pass = used > 0 && result.metric < tol;
    if (used == 0) result.notes.push_back("jacobi: no valid sample points");
    return result;
}

/// Rank of the integral map differential at the sampled points.
inline CheckResult check_submersion(const SystemDefinition& sys, const PointList& points) {
    CheckResult result;
    result.name = "submersion";
    result.tolerance = 0.0;
    const int d = sys.dim();
    const int k = sys.k;
    std::vector<CompiledExpr> jac;
    jac.reserve(static_cast<size_t>(k * d));
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < d; ++a)
            jac.push_back(compile(differentiate(sys.integrals[static_cast<size_t>(i)],
                                                sys.coords[static_cast<size_t>(a)]),
                                  sys.coords));
    int min_rank = k;
    int used = detail::for_valid_points(points, result.notes, "submersion", [&](const auto& p) {
        Eigen::MatrixXd J(k, d);
        for (int i = 0; i < k; ++i)
            for (int a = 0; a < d; ++a)
                J(i, a) = jac[static_cast<size_t>(i * d + a)](p);
        min_rank = std::min(min_rank, detail::numeric_rank(J));
    });
    result.metric = static_cast<double>(min_rank);
    result.pass = used > 0 && min_rank == k;
    if (used == 0) result.notes.push_back("submersion: no valid sample points");
    else if (min_rank < k)
        result.notes.push_back("submersion: differential rank drops to " +
                               std::to_string(min_rank) + " (need " + std::to_string(k) + ")");
    return result;
}

/// Drift of every bracket entry {H_i, H_j} along the Casimir pullback
/// directions: the entries must be constant along the fibers of the
/// integral map.
inline CheckResult check_closure(const SystemDefinition& sys, const PointList& points,
                                 const CheckConfig& config) {
    CheckResult result;
    result.name = "closure";
    result.tolerance = config.tol_closure;
    if (sys.m == 0) {
        result.applicable = false;
        result.pass = true;
        result.notes.push_back("closure: k = 2n leaves zero-dimensional fibers; "
                               "every bracket factors through the integral map");
        return result;
    }
    if (sys.casimirs.empty()) {
        result.pass = false;
        result.notes.push_back("closure: Casimirs are required to probe the fibers");
        return result;
    }
    std::vector<Expr> entries = structure_matrix_entries(sys);
    if (entries.empty()) {
        result.pass = true;
        result.notes.push_back("closure: single integral, nothing to bracket");
        return result;
    }
    std::vector<double> horizons = config.closure_times;
    std::sort(horizons.begin(), horizons.end());
    if (horizons.empty()) horizons.push_back(1.0);
    // Short probe milestones in front of the requested horizons: genuine
    // misclosure shows up at small times, and a fiber direction that
    // stalls at a singular set still yields a measured segment.
    std::vector<double> schedule = {horizons.back() / 500.0, horizons.back() / 50.0};
    schedule.insert(schedule.end(), horizons.begin(), horizons.end());

    std::vector<NumericField> fields;
    for (const VectorField& f : casimir_pullback_fields(sys)) fields.push_back(numeric_field(f));
    std::vector<CompiledExpr> compiled;
    compiled.reserve(entries.size());
    for (const Expr& e : entries) compiled.push_back(compile(e, sys.coords));
    // drift this far beyond the tolerance is conclusive; stop flowing
    const double conclusive = 1000.0 * config.tol_closure;

    int evaluated = 0;
    int ended_early = 0;
    int skipped = 0;
    for (size_t pi = 0; pi < points.size(); ++pi) {
        std::vector<double> base(compiled.size());
        bool base_ok = true;
        for (size_t e = 0; e < compiled.size(); ++e) {
            try {
                base[e] = compiled[e](points[pi]);
            } catch (const DomainError&) {
                base_ok = false;
                break;
            }
        }
        if (!base_ok) {
            skipped += static_cast<int>(fields.size());
            continue;
        }
        for (size_t fi = 0; fi < fields.size(); ++fi) {
            std::vector<double> x = points[pi];
            double t_done = 0.0;
            double local_max = 0.0;
            bool measured = false;
            bool stopped = false;
            for (double milestone : schedule) {
                double dt = milestone - t_done;
                if (dt <= 0.0) continue;
                FlowOptions fo;
                fo.tol = config.tol_flow;
                fo.max_steps = 200'000;
                fo.on_limit = StepLimitPolicy::Truncate;
                FlowTrajectory traj;
                try {
                    traj = integrate_flow(fields[fi], x, dt, fo);
                } catch (const FlowEscapedChart&) {
                    stopped = true; // measured up to the previous milestone
                    break;
                } catch (const DomainError&) {
                    stopped = true;
                    break;
                }
                bool sample_ok = true;
                for (size_t s = 1; s < traj.states.size() && sample_ok; ++s) {
                    for (size_t e = 0; e < compiled.size(); ++e) {
                        double v;
                        try {
                            v = compiled[e](traj.states[s]);
                        } catch (const DomainError&) {
                            sample_ok = false;
                            break;
                        }
                        local_max = std::max(local_max, std::abs(v - base[e]));
                    }
                }
                if (traj.states.size() > 1) measured = true;
                bool full = !traj.times.empty() &&
                            traj.times.back() >= dt - 1e-9 * std::max(1.0, dt);
                t_done += traj.times.empty() ? 0.0 : traj.times.back();
                x = traj.states.back();
                if (!full || !sample_ok) {
                    stopped = true;
                    break;
                }
                if (local_max > conclusive) break;
            }
            result.metric = std::max(result.metric, local_max);
            if (measured) ++evaluated;
            else ++skipped;
            if (stopped && measured) ++ended_early;
        }
    }
    if (ended_early > 0)
        result.notes.push_back("closure: " + std::to_string(ended_early) + " of " +
                               std::to_string(evaluated + skipped) +
                               " fiber segments ended before the last horizon (chart exit or "
                               "singular set); drift was measured on the covered parts");
    if (skipped > 0)
        result.notes.push_back("closure: " + std::to_string(skipped) +
                               " fiber segments could not be flowed inside the chart; skipped");
    result.pass = evaluated > 0 && result.metric < config.tol_closure;
    if (evaluated == 0) result.notes.push_back("closure: no fiber segment could be evaluated");
    return result;
}

/// Corank of the bracket matrix at generic sample points; must equal
/// 2n - k.
inline CheckResult check_corank(const SystemDefinition& sys, const PointList& points) {
    CheckResult result;
    result.name = "corank";
    const int expected = 2 * sys.n - sys.k;
    result.tolerance = static_cast<double>(expected);
    std::vector<Expr> entries = structure_matrix_entries(sys);
    std::vector<CompiledExpr> compiled;
    compiled.reserve(entries.size());
    for (const Expr& e : entries) compiled.push_back(compile(e, sys.coords));

    const int k = sys.k;
    std::vector<int> ranks;
    int used = detail::for_valid_points(points, result.notes, "corank", [&](const auto& p) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
        size_t idx = 0;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j, ++idx) {
                double v = compiled[idx](p);
                s(i, j) = v;
                s(j, i) = -v;
            }
        ranks.push_back(detail::numeric_rank(s));
    });
    if (used == 0) {
        result.notes.push_back("corank: no valid sample points");
        return result;
    }
    int generic = *std::max_element(ranks.begin(), ranks.end());
    int degenerate = static_cast<int>(std::count_if(
        ranks.begin(), ranks.end(), [generic](int r) { return r < generic; }));
    if (degenerate > 0)
        result.notes.push_back("corank: " + std::to_string(degenerate) +
                               " sample points below the generic rank were excluded");
    int computed = k - generic;
    result.metric = static_cast<double>(computed);
    result.pass = computed == expected;
    if (!result.pass)
        result.notes.push_back("corank: bracket matrix corank " + std::to_string(computed) +
                               " but 2n - k = " + std::to_string(expected));
    if (computed != sys.m)
        result.notes.push_back("corank: declared m = " + std::to_string(sys.m) +
                               " disagrees with computed corank " + std::to_string(computed));
    return result;
}

/// Pairwise symplectic products of the Casimir pullback directions.
/// Only defined where the structure is invertible; odd-dimensional
/// charts skip it structurally.
inline CheckResult check_isotropy(const SystemDefinition& sys, const PointList& points,
                                  double tol = 1e-8) {
    CheckResult result;
    result.name = "isotropy";
    result.tolerance = tol;
    if (sys.dim() % 2 != 0) {
        result.applicable = false;
        result.pass = true;
        result.notes.push_back("isotropy: odd-dimensional chart carries no symplectic form; "
                               "skipped structurally");
        return result;
    }
    if (sys.m == 0) {
        result.applicable = false;
        result.pass = true;
        result.notes.push_back("isotropy: no fiber directions (m = 0)");
        return result;
    }
    if (sys.casimirs.empty()) {
        result.pass = false;
        result.notes.push_back("isotropy: Casimirs are required to span the fiber directions");
        return result;
    }
    std::vector<VectorField> fields = casimir_pullback_fields(sys);
    if (fields.size() < 2) {
        result.pass = true;
        result.notes.push_back("isotropy: single fiber direction is trivially isotropic");
        return result;
    }
    std::vector<CompiledVectorField> compiled;
    for (const VectorField& f : fields) compiled.emplace_back(f);

    const int d = sys.dim();
    bool degenerate_point = false;
    int used = detail::for_valid_points(points, result.notes, "isotropy", [&](const auto& p) {
        Eigen::MatrixXd omega;
        try {
            omega = invert_bivector(sys.bivector(), p);
        } catch (const DegenerateForm&) {
            degenerate_point = true;
            return;
        }
        std::vector<Eigen::VectorXd> u;
        std::vector<double> comp(static_cast<size_t>(d));
        for (const CompiledVectorField& f : compiled) {
            f(p, comp);
            Eigen::VectorXd v(d);
            for (int a = 0; a < d; ++a) v(a) = comp[static_cast<size_t>(a)];
            u.push_back(std::move(v));
        }
        for (size_t a = 0; a < u.size(); ++a)
            for (size_t b = a + 1; b < u.size(); ++b)
                result.metric = std::max(result.metric, std::abs(u[a].dot(omega * u[b])));
    });
    if (degenerate_point) {
        result.pass = false;
        result.notes.push_back("isotropy: structure degenerate at a sample point of an "
                               "even-dimensional chart");
        return result;
    }
    result.pass = used > 0 && result.metric < tol;
    if (used == 0) result.notes.push_back("isotropy: no valid sample points");
    return result;
}

/// Brackets of pulled-back Casimirs with every integral must vanish:
/// the Casimirs are conserved by each integral flow.
inline CheckResult check_coinduced_casimirs(const SystemDefinition& sys, const PointList& points,
                                            double tol = 1e-8) {
    CheckResult result;
    result.name = "coinduced-casimirs";
    result.tolerance = tol;
    if (sys.m == 0) {
        result.applicable = false;
        result.pass = true;
        result.notes.push_back("coinduced-casimirs: no Casimirs expected (m = 0)");
        return result;
    }
    if (sys.casimirs.empty()) {
        result.pass = false;
        result.notes.push_back("coinduced-casimirs: Casimirs are required");
        return result;
    }
    std::vector<Expr> pulled = pullback_casimirs(sys);
    std::vector<CompiledExpr> compiled;
    for (const Expr& c : pulled)
        for (const Expr& h : sys.integrals)
            compiled.push_back(compile(bracket(c, h, sys.bivector()), sys.coords));
    int used = detail::for_valid_points(points, result.notes, "coinduced-casimirs",
                                        [&](const auto& p) {
                                            for (const CompiledExpr& e : compiled)
                                                result.metric =
                                                    std::max(result.metric, std::abs(e(p)));
                                        });
    result.pass = used > 0 && result.metric < tol;
    if (used == 0) result.notes.push_back("coinduced-casimirs: no valid sample points");
    return result;
}

/// Advisory probe: integrate each integral field for the advisory
/// horizon and report chart exits or step failures.  Never gates.
inline CheckResult check_completeness_advisory(const SystemDefinition& sys,
                                               const PointList& points,
                                               const CheckConfig& config) {
    CheckResult result;
    result.name = "completeness-advisory";
    result.gates = false;
    result.pass = true;
    result.tolerance = config.advisory_horizon;
    std::vector<NumericField> fields;
    for (const Expr& h : sys.integrals)
        fields.push_back(numeric_field(hamiltonian_vector_field(h, sys.bivector())));
    const size_t limit = std::min(points.size(), static_cast<size_t>(config.advisory_points));
    int exits = 0;
    for (size_t pi = 0; pi < limit; ++pi) {
        for (size_t fi = 0; fi < fields.size(); ++fi) {
            try {
                FlowOptions fo;
                fo.tol = config.tol_flow;
                fo.max_steps = 200'000;
                integrate_flow(fields[fi], points[pi], config.advisory_horizon, fo);
            } catch (const FlowEscapedChart& e) {
                ++exits;
                result.notes.push_back("completeness: integral field " + std::to_string(fi + 1) +
                                       " from point " + std::to_string(pi) + ": " + e.what());
            } catch (const StepUnderflow& e) {
                ++exits;
                result.notes.push_back("completeness: integral field " + std::to_string(fi + 1) +
                                       " from point " + std::to_string(pi) + ": " + e.what());
            } catch (const DomainError&) {
                // point outside some expression's domain: nothing to probe
            }
        }
    }
    result.metric = static_cast<double>(exits);
    if (exits > 0)
        result.notes.push_back("completeness: " + std::to_string(exits) +
                               " flow(s) left the chart before the advisory horizon; "
                               "conclusions about global fiber topology need a larger chart");
    return result;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

/// Run every hypothesis check on seeded sample points.  `pass` is the
/// conjunction of the gating checks; advisory results are attached but
/// never gate.
inline HypothesisReport run_hypothesis_checks(const SystemDefinition& sys,
                                              const CheckConfig& config = {}) {
    HypothesisReport report;
    report.system = sys.name;
    report.seed = config.seed;
    PointList points = sample_points(sys, config.seed, config.points);
    report.points_used = static_cast<int>(points.size());

    report.checks.push_back(check_jacobi(sys, points, config.tol_jacobi));
    report.checks.push_back(check_submersion(sys, points));
    report.checks.push_back(check_closure(sys, points, config));
    report.checks.push_back(check_corank(sys, points));
    report.checks.push_back(check_isotropy(sys, points, config.tol_isotropy));
    report.checks.push_back(check_coinduced_casimirs(sys, points, config.tol_coinduced));
    report.checks.push_back(check_completeness_advisory(sys, points, config));

    report.pass = true;
    for (const CheckResult& c : report.checks)
        if (c.gates && c.applicable && !c.pass) report.pass = false;
    return report;
}

/// Classify the invariant fiber through x0 by probing the Casimir
/// pullback directions and their small integer combinations.
inline TopologyReport classify_fiber(const SystemDefinition& sys, const std::vector<double>& x0,
                                     double t_max = 100.0, double eps = 1e-4,
                                     const FlowOptions& options = {}) {
    std::vector<NumericField> fields;
    for (const VectorField& f : casimir_pullback_fields(sys)) fields.push_back(numeric_field(f));
    return classify_directions(fields, x0, t_max, eps, sys.metric(), 2, options);
}

} // namespace ncint

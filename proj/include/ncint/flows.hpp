#pragma once

// Trajectory machinery: an adaptive embedded Runge-Kutta 4(5) pair
// (Dormand-Prince coefficients, FSAL), invariant drift along recorded
// trajectories, recurrence/period detection with bracketed refinement,
// and the direction-classification core used for fiber topology.
//
// Every recorded sample is a genuine accepted step state: the step
// size is capped by the requested maximum sample spacing instead of
// interpolating, so drift checks see solver-accurate states only.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"
#include "ncint/poisson.hpp"

namespace ncint {

/// Right-hand side of an autonomous ODE on a chart.  `eval` writes the
/// field value at `x` into `dxdt` (same length `dim`).
struct NumericField {
    int dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> eval;
};

/// Wrap a symbolic vector field for integration (compiles once).
inline NumericField numeric_field(const VectorField& v) {
    auto compiled = std::make_shared<CompiledVectorField>(v);
    return NumericField{compiled->dim(),
                        [compiled](std::span<const double> x, std::span<double> out) {
                            (*compiled)(x, out);
                        }};
}

/// Pointwise integer linear combination of fields on a common chart.
inline NumericField combine_fields(std::vector<NumericField> fields,
                                   std::vector<int> coeff) {
    if (fields.empty() || fields.size() != coeff.size())
        throw ValidationError("combine_fields: one coefficient per field required");
    const int dim = fields[0].dim;
    for (const NumericField& f : fields)
        if (f.dim != dim) throw ValidationError("combine_fields: dimension mismatch");
    auto fs = std::make_shared<std::vector<NumericField>>(std::move(fields));
    auto cs = std::make_shared<std::vector<int>>(std::move(coeff));
    return NumericField{dim, [fs, cs, dim](std::span<const double> x, std::span<double> out) {
                            std::vector<double> tmp(static_cast<size_t>(dim));
                            for (int i = 0; i < dim; ++i) out[i] = 0.0;
                            for (size_t k = 0; k < fs->size(); ++k) {
                                if ((*cs)[k] == 0) continue;
                                (*fs)[k].eval(x, tmp);
                                for (int i = 0; i < dim; ++i)
                                    out[i] += (*cs)[k] * tmp[static_cast<size_t>(i)];
                            }
                        }};
}

struct IntegratorStats {
    std::int64_t accepted = 0;
    std::int64_t rejected = 0;
    double max_error_estimate = 0.0; // scaled local error of accepted steps
};

/// Recorded trajectory: states[i] is the chart point at times[i];
/// states[0] is the initial condition at t = 0.
struct FlowTrajectory {
    std::vector<std::string> coords; // empty when integrated from a bare field
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    IntegratorStats stats;
};

/// What integrate_flow does when the step size collapses or the step
/// budget runs out: throw StepUnderflow, or return the partial
/// trajectory covered so far (recognizable by times.back() < t_end).
enum class StepLimitPolicy { Throw, Truncate };

struct FlowOptions {
    double tol = 1e-10;            // shared absolute/relative local error tolerance
    double max_dt = 0.0;           // max inter-sample spacing; 0 -> 0.01 * t_end
    std::int64_t max_steps = 0;    // step budget; 0 -> 2,000,000
    StepLimitPolicy on_limit = StepLimitPolicy::Throw;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double a2[1] = {1.0 / 5};
    static constexpr double a3[2] = {3.0 / 40, 9.0 / 40};
    static constexpr double a4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
    static constexpr double a5[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561,
                                     -212.0 / 729};
    static constexpr double a6[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247,
                                     49.0 / 176, -5103.0 / 18656};
    static constexpr double b5[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                                     -2187.0 / 6784, 11.0 / 84, 0.0};
    static constexpr double b4[7] = {5179.0 / 57600, 0.0, 7571.0 / 16695, 393.0 / 640,
                                     -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
};

} // namespace detail

/// Integrate dx/dt = V(x) from x0 over [0, t_end], t_end > 0.  Records
/// every accepted step; step size never exceeds options.max_dt.
/// Throws FlowEscapedChart when the field raises a DomainError,
/// StepUnderflow when the adaptive step collapses below 1e-14 or the
/// step budget runs out (both mean the flow is stuck at a singular set).
inline FlowTrajectory integrate_flow(const NumericField& field, std::span<const double> x0,
                                     double t_end, FlowOptions options = {}) {
    if (!(t_end > 0.0)) throw ValidationError("integrate_flow: t_end must be positive");
    if (field.dim != static_cast<int>(x0.size()))
        throw ValidationError("integrate_flow: initial state has wrong dimension");
    const double tol = options.tol > 0.0 ? options.tol : 1e-10;
    const double max_dt = options.max_dt > 0.0 ? options.max_dt : 0.01 * t_end;
    const size_t n = x0.size();
    using detail::Dopri5;

    FlowTrajectory traj;
    traj.times.push_back(0.0);
    traj.states.emplace_back(x0.begin(), x0.end());

    std::vector<double> y(x0.begin(), x0.end());
    std::vector<double> k[7];
    for (auto& ki : k) ki.assign(n, 0.0);
    std::vector<double> ytmp(n), y5(n), y4(n);

    double t = 0.0;
    auto eval = [&](std::span<const double> at, std::vector<double>& out) {
        try {
            field.eval(at, out);
        } catch (const DomainError& e) {
            throw FlowEscapedChart(std::string("flow left the chart: ") + e.what(), t);
        }
    };

    eval(y, k[0]);
    double h = std::min(max_dt, t_end);
    const std::int64_t step_limit = options.max_steps > 0 ? options.max_steps : 2'000'000;
    // completion margin: remaining time within roundoff of t_end counts as done
    const double t_eps = 1e-12 * std::max(1.0, std::abs(t_end));

    while (t < t_end) {
        double remaining = t_end - t;
        if (remaining <= t_eps) break;
        if (traj.stats.accepted + traj.stats.rejected >= step_limit) {
            if (options.on_limit == StepLimitPolicy::Truncate) return traj;
            throw StepUnderflow("integrate_flow: step budget exhausted before t_end "
                                "(the flow is grinding near a singular set)");
        }
        if (h < 1e-14) {
            if (options.on_limit == StepLimitPolicy::Truncate) return traj;
            throw StepUnderflow("integrate_flow: step size underflow");
        }
        h = std::min({h, max_dt, remaining});

        auto stage = [&](const double* coeffs, int m, std::vector<double>& out) {
            for (size_t i = 0; i < n; ++i) {
                double acc = y[i];
                for (int s = 0; s < m; ++s) acc += h * coeffs[s] * k[s][i];
                ytmp[i] = acc;
            }
            eval(ytmp, out);
        };
        stage(Dopri5::a2, 1, k[1]);
        stage(Dopri5::a3, 2, k[2]);
        stage(Dopri5::a4, 3, k[3]);
        stage(Dopri5::a5, 4, k[4]);
        stage(Dopri5::a6, 5, k[5]);
        for (size_t i = 0; i < n; ++i) {
            double acc = y[i];
            for (int s = 0; s < 6; ++s) acc += h * Dopri5::b5[s] * k[s][i];
            y5[i] = acc;
        }
        eval(y5, k[6]); // FSAL stage, also the error stage
        double err = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double acc = y[i];
            for (int s = 0; s < 7; ++s) acc += h * Dopri5::b4[s] * (s == 6 ? k[6][i] : k[s][i]);
            y4[i] = acc;
            double sc = tol + tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            double d = (y5[i] - y4[i]) / sc;
            err += d * d;
        }
        err = std::sqrt(err / static_cast<double>(n));

        if (!(err <= 1.0)) { // NaN rejects too
            ++traj.stats.rejected;
            double factor = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
            h *= factor;
            continue;
        }
        ++traj.stats.accepted;
        traj.stats.max_error_estimate = std::max(traj.stats.max_error_estimate, err);
        t += h;
        y = y5;
        k[0] = k[6];
        traj.times.push_back(t);
        traj.states.push_back(y);
        double factor = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
        h *= factor;
    }
    return traj;
}

/// Convenience overload: integrate a symbolic field and carry its
/// coordinate names on the trajectory.
inline FlowTrajectory integrate_flow(const VectorField& v, std::span<const double> x0,
                                     double t_end, FlowOptions options = {}) {
    FlowTrajectory traj = integrate_flow(numeric_field(v), x0, t_end, options);
    traj.coords = v.coords;
    return traj;
}

/// max_t |f(x(t)) - f(x(0))| for each function, over recorded samples.
/// A DomainError at a sample is rethrown with the sample time attached.
inline std::vector<double> invariant_drift(const FlowTrajectory& traj,
                                           const std::vector<Expr>& fns) {
    if (traj.coords.empty())
        throw ValidationError("invariant_drift: trajectory carries no coordinate names");
    if (traj.states.empty()) throw ValidationError("invariant_drift: empty trajectory");
    std::vector<CompiledExpr> compiled;
    compiled.reserve(fns.size());
    for (const Expr& f : fns) compiled.push_back(compile(f, traj.coords));
    std::vector<double> drift(fns.size(), 0.0);
    std::vector<double> base(fns.size());
    for (size_t s = 0; s < traj.states.size(); ++s) {
        for (size_t i = 0; i < compiled.size(); ++i) {
            double v;
            try {
                v = compiled[i](traj.states[s]);
            } catch (const DomainError& e) {
                throw DomainError(std::string(e.what()) + " at trajectory time t = " +
                                  detail::format_double(traj.times[s]));
            }
            if (s == 0) base[i] = v;
            else drift[i] = std::max(drift[i], std::abs(v - base[i]));
        }
    }
    return drift;
}

/// Distance on a chart where some coordinates are angles: angular
/// differences are wrapped to [-pi, pi] before the Euclidean norm.
struct RecurrenceMetric {
    std::vector<bool> angular; // empty = all linear

    double operator()(std::span<const double> a, std::span<const double> b) const {
        double acc = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
            double d = a[i] - b[i];
            if (i < angular.size() && angular[i]) {
                constexpr double two_pi = 6.283185307179586476925286766559;
                d = std::remainder(d, two_pi);
            }
            acc += d * d;
        }
        return std::sqrt(acc);
    }
};

struct PeriodResult {
    double period = 0.0;
    double recurrence_distance = 0.0;
};

/// Scan/refinement evidence for one flow direction.
struct DirectionEvidence {
    std::vector<int> coefficients;     // combination of the probed fields
    bool periodic = false;
    double period = 0.0;
    double recurrence_distance = 0.0;  // refined distance at the period
    double min_distance = 0.0;         // best post-departure distance seen
    bool monotone_escape = false;      // distance never decreased after departure
    std::string note;
};

namespace detail {

/// Shared scan: integrate to t_max, arm once the recurrence distance
/// exceeds max(4 eps, ...), refine every armed local minimum of the
/// sampled distance by golden-section search on re-integrated segments,
/// and report the first refined minimum below eps as the period.
inline DirectionEvidence scan_for_recurrence(const NumericField& field,
                                             std::span<const double> x0, double t_max,
                                             double eps, const RecurrenceMetric& metric,
                                             const FlowOptions& options) {
    DirectionEvidence ev;
    std::vector<double> v0(x0.size());
    field.eval(x0, v0);
    double speed = 0.0;
    for (double c : v0) speed += c * c;
    if (std::sqrt(speed) <= 1e-10)
        throw FixedPoint("detect_period: |V(x0)| <= 1e-10, initial point is an equilibrium");

    FlowTrajectory traj = integrate_flow(field, x0, t_max, options);
    const size_t count = traj.states.size();
    std::vector<double> dist(count);
    for (size_t i = 0; i < count; ++i) dist[i] = metric(traj.states[i], x0);

    const double depart = 4.0 * eps;
    bool armed = false;
    bool monotone = true;
    double min_after = -1.0;

    auto refine = [&](size_t i) -> PeriodResult {
        // minimize metric(x(t), x0) for t in [times[i-1], times[i+1]]
        const size_t lo_idx = i - 1;
        const double t_lo = traj.times[lo_idx];
        const double t_hi = traj.times[std::min(i + 1, count - 1)];
        auto phi = [&](double t) {
            if (t <= t_lo) return dist[lo_idx];
            FlowOptions sub = options;
            sub.max_dt = std::max(t - t_lo, 1e-12);
            FlowTrajectory seg = integrate_flow(field, traj.states[lo_idx], t - t_lo, sub);
            return metric(seg.states.back(), x0);
        };
        constexpr double inv_phi = 0.6180339887498948482;
        double a = t_lo, b = t_hi;
        double c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
        double f1 = phi(c1), f2 = phi(c2);
        for (int iter = 0; iter < 90 && (b - a) > 1e-10 * std::max(1.0, b); ++iter) {
            if (f1 < f2) {
                b = c2; c2 = c1; f2 = f1;
                c1 = b - inv_phi * (b - a);
                f1 = phi(c1);
            } else {
                a = c1; c1 = c2; f1 = f2;
                c2 = a + inv_phi * (b - a);
                f2 = phi(c2);
            }
        }
        double t_star = f1 < f2 ? c1 : c2;
        return PeriodResult{t_star, std::min(f1, f2)};
    };

    for (size_t i = 1; i < count; ++i) {
        if (!armed) {
            if (dist[i] > depart) armed = true;
            continue;
        }
        if (min_after < 0.0 || dist[i] < min_after) min_after = dist[i];
        if (dist[i] < dist[i - 1] - 1e-9 * std::max(1.0, dist[i - 1])) monotone = false;
        const bool local_min =
            dist[i] <= dist[i - 1] && (i + 1 >= count || dist[i] <= dist[i + 1]);
        if (!local_min) continue;
        PeriodResult res = refine(i);
        if (res.recurrence_distance < min_after || min_after < 0.0)
            min_after = res.recurrence_distance;
        if (res.recurrence_distance < eps) {
            ev.periodic = true;
            ev.period = res.period;
            ev.recurrence_distance = res.recurrence_distance;
            ev.min_distance = res.recurrence_distance;
            ev.monotone_escape = false;
            return ev;
        }
    }
    ev.periodic = false;
    ev.min_distance = min_after < 0.0 ? dist.back() : min_after;
    ev.monotone_escape = monotone;
    if (!armed) ev.note = "trajectory never left the eps-neighborhood of x0";
    return ev;
}

} // namespace detail

/// Smallest t* in (0, t_max] with metric(x(t*), x0) < eps, refined to
/// the local minimum of the recurrence distance.  Returns nullopt when
/// no recurrence is found.  Throws FixedPoint when |V(x0)| <= 1e-10.
inline std::optional<PeriodResult> detect_period(const NumericField& field,
                                                 std::span<const double> x0, double t_max,
                                                 double eps,
                                                 const RecurrenceMetric& metric = {},
                                                 FlowOptions options = {}) {
    if (options.max_dt <= 0.0) options.max_dt = 0.01 * t_max;
    DirectionEvidence ev = detail::scan_for_recurrence(field, x0, t_max, eps, metric, options);
    if (!ev.periodic) return std::nullopt;
    return PeriodResult{ev.period, ev.recurrence_distance};
}

inline std::optional<PeriodResult> detect_period(const VectorField& v,
                                                 std::span<const double> x0, double t_max,
                                                 double eps,
                                                 const RecurrenceMetric& metric = {},
                                                 FlowOptions options = {}) {
    return detect_period(numeric_field(v), x0, t_max, eps, metric, options);
}

/// Invariant-manifold classification evidence.  The classification is a
/// sampling heuristic over the probed directions, not a proof.
struct TopologyReport {
    int m = 0;                 // number of probed independent directions
    int r = 0;                 // rank of the periodic directions found
    std::string classification; // "R^{m-r} x T^r" in canonical spelling
    std::vector<DirectionEvidence> directions;
    double t_max = 0.0;
    double eps = 0.0;
    std::string note = "sampling heuristic, not a proof";
};

inline std::string classification_label(int m, int r) {
    if (m == 0) return "point";
    if (r == 0) return "R^" + std::to_string(m);
    if (r == m) return "T^" + std::to_string(r);
    return "R^" + std::to_string(m - r) + " x T^" + std::to_string(r);
}

/// Probe each field and the primitive integer combinations with
/// coefficients in [-bound, bound]; r is the rank of the integer span
/// of the combinations that came back periodic.
inline TopologyReport classify_directions(const std::vector<NumericField>& fields,
                                          std::span<const double> x0, double t_max,
                                          double eps, const RecurrenceMetric& metric = {},
                                          int bound = 2, FlowOptions options = {}) {
    if (fields.empty()) throw ValidationError("classify_directions: no fields given");
    if (options.max_dt <= 0.0) options.max_dt = 0.01 * t_max;
    const int m = static_cast<int>(fields.size());
    TopologyReport report;
    report.m = m;
    report.t_max = t_max;
    report.eps = eps;

    // Unit directions first, then the remaining primitive combinations
    // (gcd 1, first nonzero coefficient positive) in lexicographic order.
    std::vector<std::vector<int>> combos;
    for (int i = 0; i < m; ++i) {
        std::vector<int> unit(static_cast<size_t>(m), 0);
        unit[static_cast<size_t>(i)] = 1;
        combos.push_back(std::move(unit));
    }
    std::vector<int> cur(static_cast<size_t>(m), -bound);
    for (;;) {
        int g = 0, first = 0;
        for (int v : cur) {
            g = std::gcd(g, std::abs(v));
            if (first == 0) first = v;
        }
        bool unit = false;
        if (g == 1 && first > 0) {
            int nonzero = 0;
            for (int v : cur) nonzero += v != 0;
            unit = nonzero == 1;
            if (!unit) combos.push_back(cur);
        }
        int pos = m - 1;
        while (pos >= 0 && cur[static_cast<size_t>(pos)] == bound) {
            cur[static_cast<size_t>(pos)] = -bound;
            --pos;
        }
        if (pos < 0) break;
        ++cur[static_cast<size_t>(pos)];
    }

    std::vector<std::vector<int>> periodic;
    for (const std::vector<int>& c : combos) {
        DirectionEvidence ev;
        try {
            ev = detail::scan_for_recurrence(combine_fields(fields, c), x0, t_max, eps,
                                             metric, options);
        } catch (const FixedPoint& e) {
            ev.note = e.what();
        } catch (const FlowEscapedChart& e) {
            ev.note = e.what();
            ev.monotone_escape = false;
        }
        ev.coefficients = c;
        if (ev.periodic) periodic.push_back(c);
        report.directions.push_back(std::move(ev));
    }

    if (!periodic.empty()) {
        Eigen::MatrixXd rows(static_cast<Eigen::Index>(periodic.size()), m);
        for (size_t i = 0; i < periodic.size(); ++i)
            for (int j = 0; j < m; ++j)
                rows(static_cast<Eigen::Index>(i), j) = periodic[i][static_cast<size_t>(j)];
        report.r = detail::numeric_rank(rows);
    }
    report.classification = classification_label(m, report.r);
    return report;
}

} // namespace ncint

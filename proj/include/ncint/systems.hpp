#pragma once

// System definitions: a named coordinate chart, one structure (bivector
// or symplectic form), the integral map H, optional Casimirs of the
// target coalgebra, and a sampling box.  Includes the text file format
// (parse + canonical serialize), the built-in systems, Darboux chart
// verification, and the action-Hamiltonian flow check.

#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"
#include "ncint/flows.hpp"
#include "ncint/lie_poisson.hpp"
#include "ncint/parse.hpp"
#include "ncint/poisson.hpp"

namespace ncint {

enum class CoordKind { Linear, Angle };
enum class StructureKind { Bivector, Symplectic };

struct SamplingRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// A verified-input system on a single chart.  `bivector()` is always
/// available after validation: symplectic-kind systems carry the
/// symbolically inverted form alongside the original.
struct SystemDefinition {
    std::string name;
    std::vector<std::string> coords;
    std::vector<CoordKind> kinds;
    StructureKind kind = StructureKind::Bivector;
    std::optional<PoissonStructure> w;
    std::optional<SymplecticForm> form;
    std::vector<Expr> integrals; // H1..Hk over the chart coordinates
    std::vector<Expr> casimirs;  // C1..Cm over x1..xk
    std::vector<SamplingRange> box;
    int n = 0; // half the symplectic dimension of the realized manifold
    int k = 0; // number of integrals
    int m = 0; // declared corank (number of Casimirs when present)

    int dim() const { return static_cast<int>(coords.size()); }

    const PoissonStructure& bivector() const {
        if (!w) throw ValidationError("system has no finalized bivector (validate first)");
        return *w;
    }

    /// Coalgebra coordinate names x1..xk used by Casimir expressions.
    std::vector<std::string> coalgebra_coordinates() const {
        std::vector<std::string> names;
        names.reserve(static_cast<size_t>(k));
        for (int i = 1; i <= k; ++i) names.push_back("x" + std::to_string(i));
        return names;
    }

    /// Recurrence metric wrapping the chart's angle coordinates.
    RecurrenceMetric metric() const {
        RecurrenceMetric metric;
        metric.angular.reserve(kinds.size());
        for (CoordKind kd : kinds) metric.angular.push_back(kd == CoordKind::Angle);
        return metric;
    }
};

/// Validation: unique coordinates, exactly one structure of the
/// declared kind, k <= 2n, one integral per index, Casimir count equal
/// to m when present, expressions confined to their charts, full
/// sampling box.  Symplectic-kind systems get a derived bivector.
inline void validate_and_finalize(SystemDefinition& sys) {
    if (sys.coords.empty()) throw ValidationError("system declares no coordinates");
    for (size_t i = 0; i < sys.coords.size(); ++i)
        for (size_t j = i + 1; j < sys.coords.size(); ++j)
            if (sys.coords[i] == sys.coords[j])
                throw ValidationError("duplicate coordinate name: " + sys.coords[i]);
    if (sys.kinds.size() != sys.coords.size())
        throw ValidationError("every coordinate needs a linear/angle kind");
    if (sys.n < 1) throw ValidationError("n must be at least 1");
    if (sys.k < 1) throw ValidationError("k must be at least 1");
    if (sys.m < 0) throw ValidationError("m must be non-negative");
    if (sys.k > 2 * sys.n)
        throw ValidationError("k = " + std::to_string(sys.k) + " exceeds 2n = " +
                              std::to_string(2 * sys.n));

    if (sys.kind == StructureKind::Bivector) {
        if (!sys.w || sys.form)
            throw ValidationError("bivector-kind system must define exactly the bivector");
        if (sys.w->dim() != sys.dim())
            throw ValidationError("structure dimension does not match the chart");
    } else {
        if (!sys.form || sys.w)
            throw ValidationError("symplectic-kind system must define exactly the 2-form");
        if (sys.form->dim() != sys.dim())
            throw ValidationError("structure dimension does not match the chart");
        if (sys.dim() != 2 * sys.n)
            throw ValidationError("symplectic chart dimension must equal 2n");
        sys.w = invert_symplectic_symbolic(*sys.form);
    }

    auto check_chart_vars = [&](const Expr& e, const std::vector<std::string>& chart,
                                const std::string& what) {
        for (const std::string& v : variables(e))
            if (std::find(chart.begin(), chart.end(), v) == chart.end())
                throw ValidationError(what + " references unknown coordinate " + v);
    };
    const int d = sys.dim();
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            check_chart_vars(sys.w->upper(i, j), sys.coords, "structure entry");
            if (sys.form) check_chart_vars(sys.form->upper(i, j), sys.coords, "structure entry");
        }

    if (static_cast<int>(sys.integrals.size()) != sys.k)
        throw ValidationError("expected " + std::to_string(sys.k) + " integrals, got " +
                              std::to_string(sys.integrals.size()));
    for (size_t i = 0; i < sys.integrals.size(); ++i)
        check_chart_vars(sys.integrals[i], sys.coords, "H" + std::to_string(i + 1));

    if (!sys.casimirs.empty() && static_cast<int>(sys.casimirs.size()) != sys.m)
        throw ValidationError("declared m = " + std::to_string(sys.m) + " but " +
                              std::to_string(sys.casimirs.size()) + " Casimirs given");
    auto xnames = sys.coalgebra_coordinates();
    for (size_t i = 0; i < sys.casimirs.size(); ++i)
        check_chart_vars(sys.casimirs[i], xnames, "C" + std::to_string(i + 1));

    if (sys.box.size() != sys.coords.size())
        throw ValidationError("every coordinate needs a sampling range");
    for (size_t i = 0; i < sys.box.size(); ++i)
        if (!(sys.box[i].lo < sys.box[i].hi))
            throw ValidationError("empty sampling range for " + sys.coords[i]);
}

/// Uniform points in the sampling box.  Deterministic for a given seed
/// on every platform: values are built from raw mt19937_64 output.
inline PointList sample_points(const SystemDefinition& sys, std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    auto unit = [&rng]() {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    PointList points;
    points.reserve(static_cast<size_t>(count));
    for (int p = 0; p < count; ++p) {
        std::vector<double> x(sys.coords.size());
        for (size_t i = 0; i < x.size(); ++i)
            x[i] = sys.box[i].lo + unit() * (sys.box[i].hi - sys.box[i].lo);
        points.push_back(std::move(x));
    }
    return points;
}

// ---------------------------------------------------------------------------
// Built-in systems
// ---------------------------------------------------------------------------

/// so(2,1) system in the action-angle-side chart (r, y, gamma, x1) with
/// the canonical block bivector and the hyperbolic integral map.
inline SystemDefinition builtin_so21() {
    SystemDefinition sys;
    sys.name = "so21";
    sys.coords = {"r", "y", "gamma", "x1"};
    sys.kinds = {CoordKind::Linear, CoordKind::Linear, CoordKind::Linear, CoordKind::Linear};
    sys.kind = StructureKind::Bivector;
    PoissonStructure w(sys.coords);
    w.set_upper(0, 1, Expr(1.0));
    w.set_upper(2, 3, Expr(1.0));
    sys.w = std::move(w);
    Expr r = Expr::var("r"), gamma = Expr::var("gamma"), x1 = Expr::var("x1");
    Expr rho = sqrt(pow(r, 2.0) - pow(x1, 2.0));
    sys.integrals = {x1, rho * cosh(gamma), rho * sinh(gamma)};
    Expr cx1 = Expr::var("x1"), cx2 = Expr::var("x2"), cx3 = Expr::var("x3");
    sys.casimirs = {sqrt(pow(cx1, 2.0) + pow(cx2, 2.0) - pow(cx3, 2.0))};
    sys.box = {{1.0, 3.0}, {-1.0, 1.0}, {-1.0, 1.0}, {-0.5, 0.5}};
    sys.n = 2;
    sys.k = 3;
    sys.m = 1;
    validate_and_finalize(sys);
    return sys;
}

/// so(2,1) Lie-Poisson system on the coalgebra chart (x1, x2, x3).
/// The chart is odd-dimensional: bracket-side checks apply, the
/// symplectic-side ones (isotropy) do not.
inline SystemDefinition builtin_so21_coalgebra() {
    SystemDefinition sys;
    sys.name = "so21-coalgebra";
    sys.coords = {"x1", "x2", "x3"};
    sys.kinds = {CoordKind::Linear, CoordKind::Linear, CoordKind::Linear};
    sys.kind = StructureKind::Bivector;
    sys.w = lie_poisson_bivector(make_so21());
    sys.integrals = {Expr::var("x1"), Expr::var("x2"), Expr::var("x3")};
    Expr cx1 = Expr::var("x1"), cx2 = Expr::var("x2"), cx3 = Expr::var("x3");
    sys.casimirs = {sqrt(pow(cx1, 2.0) + pow(cx2, 2.0) - pow(cx3, 2.0))};
    // x2 - |x3| >= 1 on the box: safely inside the chart where the
    // Casimir is defined and the gamma chart of the orbit is regular.
    sys.box = {{-0.5, 0.5}, {2.0, 3.0}, {-1.0, 1.0}};
    sys.n = 2;
    sys.k = 3;
    sys.m = 1;
    validate_and_finalize(sys);
    return sys;
}

/// 1-DOF harmonic oscillator treated as an abelian system with k = n = 1
/// and the identity Casimir.
inline SystemDefinition builtin_oscillator() {
    SystemDefinition sys;
    sys.name = "oscillator";
    sys.coords = {"q", "p"};
    sys.kinds = {CoordKind::Linear, CoordKind::Linear};
    sys.kind = StructureKind::Bivector;
    PoissonStructure w(sys.coords);
    w.set_upper(0, 1, Expr(1.0));
    sys.w = std::move(w);
    Expr q = Expr::var("q"), p = Expr::var("p");
    sys.integrals = {Expr(0.5) * (pow(q, 2.0) + pow(p, 2.0))};
    sys.casimirs = {Expr::var("x1")};
    sys.box = {{0.5, 1.5}, {0.5, 1.5}};
    sys.n = 1;
    sys.k = 1;
    sys.m = 1;
    validate_and_finalize(sys);
    return sys;
}

/// Product of the oscillator and a free particle: k = n = 2, m = 2,
/// mixed cylinder fiber topology.
inline SystemDefinition builtin_oscillator_free() {
    SystemDefinition sys;
    sys.name = "oscillator-free";
    sys.coords = {"q1", "p1", "q2", "p2"};
    sys.kinds = {CoordKind::Linear, CoordKind::Linear, CoordKind::Linear, CoordKind::Linear};
    sys.kind = StructureKind::Bivector;
    PoissonStructure w(sys.coords);
    w.set_upper(0, 1, Expr(1.0));
    w.set_upper(2, 3, Expr(1.0));
    sys.w = std::move(w);
    Expr q1 = Expr::var("q1"), p1 = Expr::var("p1"), p2 = Expr::var("p2");
    sys.integrals = {Expr(0.5) * (pow(q1, 2.0) + pow(p1, 2.0)), p2};
    sys.casimirs = {Expr::var("x1"), Expr::var("x2")};
    sys.box = {{0.5, 1.5}, {0.5, 1.5}, {-1.0, 1.0}, {0.5, 1.5}};
    sys.n = 2;
    sys.k = 2;
    sys.m = 2;
    validate_and_finalize(sys);
    return sys;
}

inline std::vector<std::string> builtin_names() {
    return {"so21", "so21-coalgebra", "oscillator", "oscillator-free"};
}

inline SystemDefinition builtin_system(const std::string& name) {
    if (name == "so21") return builtin_so21();
    if (name == "so21-coalgebra") return builtin_so21_coalgebra();
    if (name == "oscillator") return builtin_oscillator();
    if (name == "oscillator-free") return builtin_oscillator_free();
    throw ValidationError("unknown built-in system: " + name);
}

// ---------------------------------------------------------------------------
// Darboux charts
// ---------------------------------------------------------------------------

enum class Role { Action, Angle, Position, Momentum };

/// Candidate generalized action-angle chart: new coordinates given as
/// expressions of the system chart, each tagged with its role.  The
/// lambda-th action pairs with the lambda-th angle (in order of
/// appearance), likewise positions with momenta.
struct DarbouxChart {
    std::vector<std::string> names;
    std::vector<Role> roles;
    std::vector<Expr> forward;
};

namespace detail {

inline void check_chart_shape(const SystemDefinition& sys, const DarbouxChart& chart) {
    if (chart.names.size() != chart.roles.size() || chart.names.size() != chart.forward.size())
        throw ValidationError("Darboux chart: names, roles, and maps must align");
    if (static_cast<int>(chart.names.size()) != sys.dim())
        throw ValidationError("Darboux chart must have the chart dimension of the system");
    int actions = 0, angles = 0, positions = 0, momenta = 0;
    for (Role role : chart.roles) {
        switch (role) {
            case Role::Action: ++actions; break;
            case Role::Angle: ++angles; break;
            case Role::Position: ++positions; break;
            case Role::Momentum: ++momenta; break;
        }
    }
    if (actions != angles || positions != momenta)
        throw ValidationError("Darboux chart: actions/angles and positions/momenta must pair");
}

/// Canonical bivector implied by the role tags: W^{J_l, y^l} = +1 and
/// W^{q^A, p_A} = +1, everything else zero.
inline Eigen::MatrixXd canonical_target(const DarbouxChart& chart) {
    const int d = static_cast<int>(chart.names.size());
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(d, d);
    std::vector<int> actions, angles, positions, momenta;
    for (int i = 0; i < d; ++i) {
        switch (chart.roles[static_cast<size_t>(i)]) {
            case Role::Action: actions.push_back(i); break;
            case Role::Angle: angles.push_back(i); break;
            case Role::Position: positions.push_back(i); break;
            case Role::Momentum: momenta.push_back(i); break;
        }
    }
    for (size_t l = 0; l < actions.size(); ++l) {
        target(actions[l], angles[l]) = 1.0;
        target(angles[l], actions[l]) = -1.0;
    }
    for (size_t a = 0; a < positions.size(); ++a) {
        target(positions[a], momenta[a]) = 1.0;
        target(momenta[a], positions[a]) = -1.0;
    }
    return target;
}

} // namespace detail

/// Max entrywise deviation, over the points, between the pushforward of
/// the system bivector through the chart and the canonical bivector
/// implied by the role tags.  Exactly 0 for constant canonical
/// bivectors under identity charts.
inline double verify_darboux(const SystemDefinition& sys, const DarbouxChart& chart,
                             const PointList& points) {
    detail::check_chart_shape(sys, chart);
    Eigen::MatrixXd target = detail::canonical_target(chart);
    double worst = 0.0;
    for (const auto& p : points) {
        Eigen::MatrixXd pushed = pushforward_bivector(sys.bivector(), chart.forward, p);
        worst = std::max(worst, (pushed - target).cwiseAbs().maxCoeff());
    }
    return worst;
}

/// Identity chart over the system's own coordinates with given roles.
inline DarbouxChart identity_chart(const SystemDefinition& sys, std::vector<Role> roles) {
    DarbouxChart chart;
    chart.names = sys.coords;
    chart.roles = std::move(roles);
    for (const std::string& c : sys.coords) chart.forward.push_back(Expr::var(c));
    return chart;
}

// ---------------------------------------------------------------------------
// Action-Hamiltonian flow check
// ---------------------------------------------------------------------------

struct ActionAngleCheck {
    bool pass = false;
    double max_integral_drift = 0.0;   // drift of every H_i along the flow
    double max_conserved_drift = 0.0;  // drift of action/position/momentum observables
    double max_angle_residual = 0.0;   // worst deviation from a linear fit
    std::vector<std::vector<double>> angle_slopes; // per point, per angle observable
    std::vector<std::string> notes;
};

/// Flow the Hamiltonian field of Hfn(H1..Hk) from each point for
/// `horizon` time units.  In a Darboux chart only the angle observables
/// may move, and they must advance linearly in t.
inline ActionAngleCheck action_hamiltonian_check(const SystemDefinition& sys, const Expr& hfn,
                                                 const DarbouxChart& chart,
                                                 const PointList& points, double horizon,
                                                 double tol = 1e-8) {
    detail::check_chart_shape(sys, chart);
    std::map<std::string, Expr> repl;
    auto xnames = sys.coalgebra_coordinates();
    for (size_t i = 0; i < xnames.size(); ++i) repl.emplace(xnames[i], sys.integrals[i]);
    Expr h = fold_constants(substitute(hfn, repl));
    VectorField field = hamiltonian_vector_field(h, sys.bivector());

    ActionAngleCheck report;
    report.pass = true;
    for (const auto& p : points) {
        FlowTrajectory traj;
        try {
            traj = integrate_flow(field, p, horizon, FlowOptions{1e-10, 0.0});
        } catch (const FlowEscapedChart& e) {
            report.notes.push_back(e.what());
            report.pass = false;
            continue;
        } catch (const StepUnderflow& e) {
            report.notes.push_back(e.what());
            report.pass = false;
            continue;
        }
        std::vector<double> drift = invariant_drift(traj, sys.integrals);
        for (double d : drift)
            report.max_integral_drift = std::max(report.max_integral_drift, d);

        std::vector<double> slopes;
        for (size_t c = 0; c < chart.forward.size(); ++c) {
            CompiledExpr obs = compile(chart.forward[c], sys.coords);
            std::vector<double> values(traj.states.size());
            for (size_t s = 0; s < traj.states.size(); ++s) values[s] = obs(traj.states[s]);
            if (chart.roles[c] != Role::Angle) {
                for (double v : values)
                    report.max_conserved_drift =
                        std::max(report.max_conserved_drift, std::abs(v - values[0]));
                continue;
            }
            // unwrap 2*pi jumps, then least-squares fit a + b t
            constexpr double pi = 3.14159265358979323846;
            double shift = 0.0;
            for (size_t s = 1; s < values.size(); ++s) {
                double prev = values[s - 1];
                values[s] += shift;
                while (values[s] - prev > pi) { values[s] -= 2 * pi; shift -= 2 * pi; }
                while (values[s] - prev < -pi) { values[s] += 2 * pi; shift += 2 * pi; }
            }
            const size_t count = values.size();
            double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
            for (size_t s = 0; s < count; ++s) {
                st += traj.times[s];
                sv += values[s];
                stt += traj.times[s] * traj.times[s];
                stv += traj.times[s] * values[s];
            }
            double denom = count * stt - st * st;
            double slope = denom != 0.0 ? (count * stv - st * sv) / denom : 0.0;
            double intercept = (sv - slope * st) / static_cast<double>(count);
            for (size_t s = 0; s < count; ++s)
                report.max_angle_residual =
                    std::max(report.max_angle_residual,
                             std::abs(values[s] - (intercept + slope * traj.times[s])));
            slopes.push_back(slope);
        }
        report.angle_slopes.push_back(std::move(slopes));
    }
    report.pass = report.pass && report.max_integral_drift < tol &&
                  report.max_conserved_drift < tol && report.max_angle_residual < tol;
    return report;
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

namespace detail {

struct RawLine {
    int number = 0;
    std::string text;
};

inline std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_range_number(std::string_view text, int line, int col) {
    double v = 0.0;
    std::string t = trim(text);
    if (t.empty()) throw SyntaxError("expected a number", line, col);
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw SyntaxError("malformed number '" + t + "'", line, col);
    return v;
}

} // namespace detail

/// Parse the line-oriented system format.  Sections: [system],
/// [coordinates], [structure], [integrals], [casimirs], [sampling].
/// '#' starts a comment.  Throws SyntaxError (with 1-based positions)
/// for malformed text and ValidationError for inconsistent content.
inline SystemDefinition parse_system_file(std::string_view text) {
    using detail::RawLine;
    std::map<std::string, std::vector<RawLine>> sections;
    std::string current;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        std::string stripped = detail::trim(raw.substr(0, raw.find('#')));
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw SyntaxError("malformed section header", line_no, 1);
            current = stripped.substr(1, stripped.size() - 2);
            if (current != "system" && current != "coordinates" && current != "structure" &&
                current != "integrals" && current != "casimirs" && current != "sampling")
                throw SyntaxError("unknown section [" + current + "]", line_no, 1);
            sections.try_emplace(current);
            continue;
        }
        if (current.empty())
            throw SyntaxError("content before the first section header", line_no, 1);
        sections[current].push_back({line_no, stripped});
    }

    auto split_eq = [](const RawLine& l) -> std::pair<std::string, std::string> {
        size_t eq = l.text.find('=');
        if (eq == std::string::npos)
            throw SyntaxError("expected key = value", l.number, 1);
        return {detail::trim(l.text.substr(0, eq)), detail::trim(l.text.substr(eq + 1))};
    };
    auto rhs_column = [](const RawLine& l) {
        size_t eq = l.text.find('=');
        size_t start = l.text.find_first_not_of(" \t", eq + 1);
        return static_cast<int>(start == std::string::npos ? eq + 2 : start + 1);
    };

    SystemDefinition sys;

    if (!sections.count("system"))
        throw ValidationError("missing [system] section");
    for (const RawLine& l : sections["system"]) {
        auto [key, value] = split_eq(l);
        if (key == "name") {
            sys.name = value;
        } else if (key == "n" || key == "k" || key == "m") {
            int v = 0;
            auto res = std::from_chars(value.data(), value.data() + value.size(), v);
            if (res.ec != std::errc() || res.ptr != value.data() + value.size())
                throw SyntaxError("malformed integer '" + value + "'", l.number, rhs_column(l));
            (key == "n" ? sys.n : key == "k" ? sys.k : sys.m) = v;
        } else {
            throw SyntaxError("unknown [system] key '" + key + "'", l.number, 1);
        }
    }

    if (!sections.count("coordinates"))
        throw ValidationError("missing [coordinates] section");
    for (const RawLine& l : sections["coordinates"]) {
        size_t colon = l.text.find(':');
        if (colon == std::string::npos)
            throw SyntaxError("expected '<name> : linear|angle'", l.number, 1);
        std::string name = detail::trim(l.text.substr(0, colon));
        std::string kind = detail::trim(l.text.substr(colon + 1));
        if (name.empty())
            throw SyntaxError("missing coordinate name", l.number, 1);
        if (kind == "linear") sys.kinds.push_back(CoordKind::Linear);
        else if (kind == "angle") sys.kinds.push_back(CoordKind::Angle);
        else throw SyntaxError("coordinate kind must be linear or angle", l.number,
                               static_cast<int>(colon) + 2);
        sys.coords.push_back(name);
    }

    if (!sections.count("structure"))
        throw ValidationError("missing [structure] section");
    std::optional<StructureKind> kind;
    std::vector<std::tuple<int, int, Expr>> entries;
    for (const RawLine& l : sections["structure"]) {
        auto [key, value] = split_eq(l);
        if (key == "kind") {
            if (value == "bivector") kind = StructureKind::Bivector;
            else if (value == "symplectic") kind = StructureKind::Symplectic;
            else throw SyntaxError("kind must be bivector or symplectic", l.number,
                                   rhs_column(l));
            continue;
        }
        if (key.size() < 6 || key.substr(0, 2) != "W[" || key.back() != ']')
            throw SyntaxError("expected kind = ... or W[i,j] = ...", l.number, 1);
        std::string inner = key.substr(2, key.size() - 3);
        size_t comma = inner.find(',');
        if (comma == std::string::npos)
            throw SyntaxError("expected W[i,j]", l.number, 1);
        int i = 0, j = 0;
        std::string si = detail::trim(inner.substr(0, comma));
        std::string sj = detail::trim(inner.substr(comma + 1));
        auto ri = std::from_chars(si.data(), si.data() + si.size(), i);
        auto rj = std::from_chars(sj.data(), sj.data() + sj.size(), j);
        if (ri.ec != std::errc() || rj.ec != std::errc() ||
            ri.ptr != si.data() + si.size() || rj.ptr != sj.data() + sj.size())
            throw SyntaxError("malformed structure indices", l.number, 1);
        if (i < 1 || j <= i)
            throw SyntaxError("structure entries use the strict upper triangle: W[i,j] "
                              "with 1 <= i < j", l.number, 1);
        entries.emplace_back(i, j, parse_expression(value, l.number, rhs_column(l)));
    }
    if (!kind) throw ValidationError("[structure] must declare kind = bivector|symplectic");
    sys.kind = *kind;
    const int d = static_cast<int>(sys.coords.size());
    if (sys.kind == StructureKind::Bivector) {
        PoissonStructure w(sys.coords);
        for (auto& [i, j, e] : entries) {
            if (j > d) throw ValidationError("structure index exceeds chart dimension");
            w.set_upper(i - 1, j - 1, e);
        }
        sys.w = std::move(w);
    } else {
        SymplecticForm form(sys.coords);
        for (auto& [i, j, e] : entries) {
            if (j > d) throw ValidationError("structure index exceeds chart dimension");
            form.set_upper(i - 1, j - 1, e);
        }
        sys.form = std::move(form);
    }

    if (!sections.count("integrals"))
        throw ValidationError("missing [integrals] section");
    std::map<int, Expr> integrals;
    for (const RawLine& l : sections["integrals"]) {
        auto [key, value] = split_eq(l);
        if (key.size() < 2 || key[0] != 'H')
            throw SyntaxError("expected H<i> = <expression>", l.number, 1);
        int idx = 0;
        auto res = std::from_chars(key.data() + 1, key.data() + key.size(), idx);
        if (res.ec != std::errc() || res.ptr != key.data() + key.size() || idx < 1)
            throw SyntaxError("malformed integral index", l.number, 1);
        if (integrals.count(idx))
            throw ValidationError("duplicate integral H" + std::to_string(idx));
        integrals.emplace(idx, parse_expression(value, l.number, rhs_column(l)));
    }
    for (int i = 1; i <= static_cast<int>(integrals.size()); ++i) {
        auto it = integrals.find(i);
        if (it == integrals.end())
            throw ValidationError("integral indices must be contiguous from H1");
        sys.integrals.push_back(it->second);
    }

    if (sections.count("casimirs")) {
        std::map<int, Expr> casimirs;
        for (const RawLine& l : sections["casimirs"]) {
            auto [key, value] = split_eq(l);
            if (key.size() < 2 || key[0] != 'C')
                throw SyntaxError("expected C<i> = <expression>", l.number, 1);
            int idx = 0;
            auto res = std::from_chars(key.data() + 1, key.data() + key.size(), idx);
            if (res.ec != std::errc() || res.ptr != key.data() + key.size() || idx < 1)
                throw SyntaxError("malformed Casimir index", l.number, 1);
            if (casimirs.count(idx))
                throw ValidationError("duplicate Casimir C" + std::to_string(idx));
            casimirs.emplace(idx, parse_expression(value, l.number, rhs_column(l)));
        }
        for (int i = 1; i <= static_cast<int>(casimirs.size()); ++i) {
            auto it = casimirs.find(i);
            if (it == casimirs.end())
                throw ValidationError("Casimir indices must be contiguous from C1");
            sys.casimirs.push_back(it->second);
        }
    }

    if (!sections.count("sampling"))
        throw ValidationError("missing [sampling] section");
    std::map<std::string, SamplingRange> ranges;
    for (const RawLine& l : sections["sampling"]) {
        size_t in_pos = l.text.find(" in ");
        if (in_pos == std::string::npos)
            throw SyntaxError("expected '<coord> in [lo, hi]'", l.number, 1);
        std::string name = detail::trim(l.text.substr(0, in_pos));
        std::string range = detail::trim(l.text.substr(in_pos + 4));
        if (range.size() < 2 || range.front() != '[' || range.back() != ']')
            throw SyntaxError("expected '[lo, hi]'", l.number,
                              static_cast<int>(in_pos) + 5);
        std::string inner = range.substr(1, range.size() - 2);
        size_t comma = inner.find(',');
        if (comma == std::string::npos)
            throw SyntaxError("expected '[lo, hi]'", l.number,
                              static_cast<int>(in_pos) + 5);
        SamplingRange sr;
        sr.lo = detail::parse_range_number(inner.substr(0, comma), l.number,
                                           static_cast<int>(in_pos) + 6);
        sr.hi = detail::parse_range_number(inner.substr(comma + 1), l.number,
                                           static_cast<int>(in_pos) + 6 +
                                               static_cast<int>(comma) + 1);
        if (ranges.count(name))
            throw ValidationError("duplicate sampling range for " + name);
        ranges.emplace(name, sr);
    }
    for (const std::string& c : sys.coords) {
        auto it = ranges.find(c);
        if (it == ranges.end())
            throw ValidationError("missing sampling range for " + c);
        sys.box.push_back(it->second);
    }
    for (const auto& [name, sr] : ranges)
        if (std::find(sys.coords.begin(), sys.coords.end(), name) == sys.coords.end())
            throw ValidationError("sampling range for unknown coordinate " + name);

    validate_and_finalize(sys);
    return sys;
}

/// Canonical text form: fixed section order, coordinates in chart
/// order, upper-triangle entries ascending, expressions in canonical
/// infix.  parse(serialize(parse(text))) == parse(text).
inline std::string serialize_system(const SystemDefinition& sys) {
    std::string out;
    out += "[system]\n";
    out += "name = " + sys.name + "\n";
    out += "n = " + std::to_string(sys.n) + "\n";
    out += "k = " + std::to_string(sys.k) + "\n";
    out += "m = " + std::to_string(sys.m) + "\n";
    out += "\n[coordinates]\n";
    for (size_t i = 0; i < sys.coords.size(); ++i)
        out += sys.coords[i] + " : " +
               (sys.kinds[i] == CoordKind::Angle ? "angle" : "linear") + "\n";
    out += "\n[structure]\n";
    out += std::string("kind = ") +
           (sys.kind == StructureKind::Symplectic ? "symplectic" : "bivector") + "\n";
    const int d = sys.dim();
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const Expr& e = sys.kind == StructureKind::Symplectic ? sys.form->upper(i, j)
                                                                  : sys.w->upper(i, j);
            if (e.is_constant(0.0)) continue;
            out += "W[" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                   "] = " + to_string(e) + "\n";
        }
    out += "\n[integrals]\n";
    for (size_t i = 0; i < sys.integrals.size(); ++i)
        out += "H" + std::to_string(i + 1) + " = " + to_string(sys.integrals[i]) + "\n";
    if (!sys.casimirs.empty()) {
        out += "\n[casimirs]\n";
        for (size_t i = 0; i < sys.casimirs.size(); ++i)
            out += "C" + std::to_string(i + 1) + " = " + to_string(sys.casimirs[i]) + "\n";
    }
    out += "\n[sampling]\n";
    for (size_t i = 0; i < sys.coords.size(); ++i)
        out += sys.coords[i] + " in [" + detail::format_double(sys.box[i].lo) + ", " +
               detail::format_double(sys.box[i].hi) + "]\n";
    return out;
}

} // namespace ncint

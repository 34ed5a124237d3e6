#pragma once

// Command implementations behind the command-line tool.  Each command
// takes a configuration plus output streams and returns a process exit
// code, so the whole surface is testable in-process:
//   0  success (all gating checks passed / output written)
//   1  a gating check failed
//   2  bad usage, unparsable input, or invalid system definition

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"
#include "ncint/integrability.hpp"
#include "ncint/parse.hpp"
#include "ncint/report.hpp"
#include "ncint/systems.hpp"

namespace ncint::cli {

struct RunConfig {
    std::string system_file;      // path to a system definition file
    std::string builtin;          // or the name of a built-in system
    std::uint64_t seed = 12345;
    int points = 50;
    double tol_closure = 1e-6;
    double tol_isotropy = 1e-8;
    double tol_flow = 1e-10;
    double t_max = 100.0;         // classify horizon
    double eps = 1e-4;            // classify recurrence threshold
    double t_end = 10.0;          // flow horizon
    std::vector<double> x0;       // initial point for flow/classify
    std::string field = "integral:1"; // flow direction selector
    std::string format;           // "json" or "csv" where applicable
    std::string out_path;         // empty: write to the provided stream
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SystemDefinition load_system(const RunConfig& config) {
    if (!config.builtin.empty() && !config.system_file.empty())
        throw ValidationError("give either a built-in name or a system file, not both");
    if (!config.builtin.empty()) return builtin_system(config.builtin);
    if (!config.system_file.empty())
        return parse_system_file(read_file(config.system_file));
    throw ValidationError("no system selected (need a built-in name or a system file)");
}

inline int write_output(const RunConfig& config, const std::string& payload, std::ostream& out,
                        std::ostream& err) {
    if (config.out_path.empty()) {
        out << payload;
        return 0;
    }
    std::ofstream f(config.out_path, std::ios::binary);
    if (!f) {
        err << "error: cannot write " << config.out_path << "\n";
        return 2;
    }
    f << payload;
    return 0;
}

inline int fail_usage(std::ostream& err, const std::string& message) {
    err << "error: " << message << "\n";
    return 2;
}

/// Parse an expression over the system chart; names H1..Hk stand for
/// the system's integrals.
inline Expr chart_expression(const SystemDefinition& sys, const std::string& text) {
    Expr e = parse_expression(text);
    std::map<std::string, Expr> repl;
    for (size_t i = 0; i < sys.integrals.size(); ++i)
        repl.emplace("H" + std::to_string(i + 1), sys.integrals[i]);
    return substitute(e, repl);
}

inline CheckConfig check_config(const RunConfig& config) {
    CheckConfig cc;
    cc.seed = config.seed;
    cc.points = config.points;
    cc.tol_closure = config.tol_closure;
    cc.tol_isotropy = config.tol_isotropy;
    cc.tol_flow = config.tol_flow;
    return cc;
}

} // namespace detail

/// Run the hypothesis checks and emit the JSON report.
inline int cmd_verify(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (!config.format.empty() && config.format != "json")
        return detail::fail_usage(err, "verify reports are JSON only");
    HypothesisReport report;
    try {
        SystemDefinition sys = detail::load_system(config);
        report = run_hypothesis_checks(sys, detail::check_config(config));
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    std::string payload = to_json(report).dump(2);
    int rc = detail::write_output(config, payload, out, err);
    if (rc != 0) return rc;
    return report.pass ? 0 : 1;
}

/// Print the bracket of two chart expressions and its value at seeded
/// sample points.
inline int cmd_bracket(const RunConfig& config, const std::string& f_text,
                       const std::string& g_text, std::ostream& out, std::ostream& err) {
    try {
        SystemDefinition sys = detail::load_system(config);
        Expr f = detail::chart_expression(sys, f_text);
        Expr g = detail::chart_expression(sys, g_text);
        Expr result = bracket(f, g, sys.bivector());
        out << to_string(result) << "\n";
        PointList points = sample_points(sys, config.seed, 5);
        for (const auto& p : points) {
            out << "at (";
            for (size_t i = 0; i < sys.coords.size(); ++i) {
                if (i) out << ", ";
                out << sys.coords[i] << " = " << ncint::detail::format_double(p[i]);
            }
            out << "): ";
            try {
                out << ncint::detail::format_double(evaluate_at(result, sys.coords, p)) << "\n";
            } catch (const DomainError&) {
                out << "undefined (outside the expression domain)\n";
            }
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

/// Integrate one flow and emit the trajectory (CSV by default).  The
/// direction selector is "integral:<i>", "casimir:<i>", or
/// "expr:<chart expression>" (Hamiltonian field of the expression).
inline int cmd_flow(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        SystemDefinition sys = detail::load_system(config);
        if (config.x0.size() != sys.coords.size())
            return detail::fail_usage(err, "flow needs an initial point with " +
                                               std::to_string(sys.coords.size()) +
                                               " coordinates (--x0 a,b,...)");
        if (config.t_end <= 0.0)
            return detail::fail_usage(err, "flow horizon must be positive");

        std::optional<VectorField> field;
        const std::string& sel = config.field;
        auto index_of = [&](const std::string& text, size_t count,
                            const char* what) -> size_t {
            int idx = 0;
            auto res = std::from_chars(text.data(), text.data() + text.size(), idx);
            if (res.ec != std::errc() || res.ptr != text.data() + text.size() || idx < 1 ||
                static_cast<size_t>(idx) > count)
                throw ValidationError(std::string(what) + " index out of range: " + text);
            return static_cast<size_t>(idx - 1);
        };
        if (sel.rfind("integral:", 0) == 0) {
            size_t i = index_of(sel.substr(9), sys.integrals.size(), "integral");
            field = hamiltonian_vector_field(sys.integrals[i], sys.bivector());
        } else if (sel.rfind("casimir:", 0) == 0) {
            std::vector<VectorField> fields = casimir_pullback_fields(sys);
            size_t i = index_of(sel.substr(8), fields.size(), "casimir");
            field = std::move(fields[i]);
        } else if (sel.rfind("expr:", 0) == 0) {
            Expr h = detail::chart_expression(sys, sel.substr(5));
            field = hamiltonian_vector_field(h, sys.bivector());
        } else {
            return detail::fail_usage(err, "unknown field selector '" + sel +
                                               "' (use integral:<i>, casimir:<i>, expr:<...>)");
        }

        FlowTrajectory traj =
            integrate_flow(*field, config.x0, config.t_end, FlowOptions{config.tol_flow, 0.0});
        std::string payload;
        if (config.format.empty() || config.format == "csv") {
            payload = to_csv(traj);
        } else if (config.format == "json") {
            JsonValue times = JsonValue::array();
            for (double t : traj.times) times.push(t);
            JsonValue states = JsonValue::array();
            for (const auto& s : traj.states) {
                JsonValue row = JsonValue::array();
                for (double v : s) row.push(v);
                states.push(std::move(row));
            }
            JsonValue coords = JsonValue::array();
            for (const std::string& c : traj.coords) coords.push(c);
            payload = JsonValue::object()
                          .set("coords", std::move(coords))
                          .set("times", std::move(times))
                          .set("states", std::move(states))
                          .dump(2);
        } else {
            return detail::fail_usage(err, "flow format must be csv or json");
        }
        int rc = detail::write_output(config, payload, out, err);
        if (rc != 0) return rc;

        std::vector<double> drift = invariant_drift(traj, sys.integrals);
        for (size_t i = 0; i < drift.size(); ++i)
            err << "# drift H" << (i + 1) << " = " << ncint::detail::format_double(drift[i]) << "\n";
        err << "# steps accepted = " << traj.stats.accepted
            << ", rejected = " << traj.stats.rejected << "\n";
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

/// Classify the invariant fiber through x0 and emit the JSON report.
inline int cmd_classify(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (!config.format.empty() && config.format != "json")
        return detail::fail_usage(err, "classification reports are JSON only");
    try {
        SystemDefinition sys = detail::load_system(config);
        if (config.x0.size() != sys.coords.size())
            return detail::fail_usage(err, "classify needs an initial point with " +
                                               std::to_string(sys.coords.size()) +
                                               " coordinates (--x0 a,b,...)");
        TopologyReport report = classify_fiber(sys, config.x0, config.t_max, config.eps,
                                               FlowOptions{config.tol_flow, 0.0});
        std::string payload = to_json(report).dump(2);
        return detail::write_output(config, payload, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

/// Echo a system definition in canonical form (useful for fixtures and
/// round-trip checks).
inline int cmd_canonicalize(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        SystemDefinition sys = detail::load_system(config);
        return detail::write_output(config, serialize_system(sys), out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace ncint::cli

#pragma once

// Deterministic report serialization.  The JSON value type preserves
// object-key insertion order and prints doubles with 17 significant
// digits, so a report is byte-identical across runs with the same
// configuration and seed.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ncint/expr.hpp"
#include "ncint/flows.hpp"
#include "ncint/integrability.hpp"
#include "ncint/systems.hpp"

namespace ncint {

class JsonValue;
using JsonMember = std::pair<std::string, JsonValue>;

class JsonValue {
public:
    using Array = std::vector<JsonValue>;
    using Object = std::vector<JsonMember>;

    JsonValue() : value_(nullptr) {}
    JsonValue(std::nullptr_t) : value_(nullptr) {}
    JsonValue(bool b) : value_(b) {}
    JsonValue(double d) : value_(d) {}
    JsonValue(int i) : value_(static_cast<std::int64_t>(i)) {}
    JsonValue(std::int64_t i) : value_(i) {}
    JsonValue(std::uint64_t i) : value_(static_cast<std::int64_t>(i)) {}
    JsonValue(const char* s) : value_(std::string(s)) {}
    JsonValue(std::string s) : value_(std::move(s)) {}
    JsonValue(Array a) : value_(std::move(a)) {}
    JsonValue(Object o) : value_(std::move(o)) {}

    static JsonValue object() { return JsonValue(Object{}); }
    static JsonValue array() { return JsonValue(Array{}); }

    /// Append a key/value pair (object) preserving insertion order.
    JsonValue& set(std::string key, JsonValue v) {
        std::get<Object>(value_).emplace_back(std::move(key), std::move(v));
        return *this;
    }

    /// Append an element (array).
    JsonValue& push(JsonValue v) {
        std::get<Array>(value_).push_back(std::move(v));
        return *this;
    }

    std::string dump(int indent = 2) const {
        std::string out;
        write(out, indent, 0);
        if (indent > 0) out += '\n';
        return out;
    }

private:
    std::variant<std::nullptr_t, bool, double, std::int64_t, std::string, Array, Object> value_;

    static void write_escaped(std::string& out, const std::string& s) {
        out += '"';
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\r': out += "\\r"; break;
                case '\t': out += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out += buf;
                    } else {
                        out += c;
                    }
            }
        }
        out += '"';
    }

    void write(std::string& out, int indent, int depth) const {
        auto pad = [&](int d) {
            if (indent > 0) {
                out += '\n';
                out.append(static_cast<size_t>(indent * d), ' ');
            }
        };
        if (std::holds_alternative<std::nullptr_t>(value_)) {
            out += "null";
        } else if (auto* b = std::get_if<bool>(&value_)) {
            out += *b ? "true" : "false";
        } else if (auto* d = std::get_if<double>(&value_)) {
            char buf[40];
            int len = std::snprintf(buf, sizeof buf, "%.17g", *d);
            out.append(buf, static_cast<size_t>(len));
        } else if (auto* i = std::get_if<std::int64_t>(&value_)) {
            out += std::to_string(*i);
        } else if (auto* s = std::get_if<std::string>(&value_)) {
            write_escaped(out, *s);
        } else if (auto* a = std::get_if<Array>(&value_)) {
            if (a->empty()) {
                out += "[]";
                return;
            }
            out += '[';
            for (size_t idx = 0; idx < a->size(); ++idx) {
                if (idx) out += ',';
                pad(depth + 1);
                (*a)[idx].write(out, indent, depth + 1);
            }
            pad(depth);
            out += ']';
        } else if (auto* o = std::get_if<Object>(&value_)) {
            if (o->empty()) {
                out += "{}";
                return;
            }
            out += '{';
            for (size_t idx = 0; idx < o->size(); ++idx) {
                if (idx) out += ',';
                pad(depth + 1);
                write_escaped(out, (*o)[idx].first);
                out += indent > 0 ? ": " : ":";
                (*o)[idx].second.write(out, indent, depth + 1);
            }
            pad(depth);
            out += '}';
        }
    }
};

inline JsonValue to_json(const CheckResult& c) {
    JsonValue notes = JsonValue::array();
    for (const std::string& n : c.notes) notes.push(n);
    return JsonValue::object()
        .set("name", c.name)
        .set("applicable", c.applicable)
        .set("gates", c.gates)
        .set("pass", c.pass)
        .set("metric", c.metric)
        .set("tolerance", c.tolerance)
        .set("notes", std::move(notes));
}

inline JsonValue to_json(const HypothesisReport& r) {
    JsonValue checks = JsonValue::array();
    for (const CheckResult& c : r.checks) checks.push(to_json(c));
    return JsonValue::object()
        .set("system", r.system)
        .set("pass", r.pass)
        .set("seed", r.seed)
        .set("points", r.points_used)
        .set("checks", std::move(checks));
}

inline JsonValue to_json(const DirectionEvidence& d) {
    JsonValue coeffs = JsonValue::array();
    for (int c : d.coefficients) coeffs.push(c);
    JsonValue out = JsonValue::object();
    out.set("coefficients", std::move(coeffs));
    out.set("periodic", d.periodic);
    if (d.periodic) {
        out.set("period", d.period);
        out.set("recurrence_distance", d.recurrence_distance);
    } else {
        out.set("period", nullptr);
        out.set("recurrence_distance", nullptr);
    }
    out.set("min_distance", d.min_distance);
    out.set("monotone_escape", d.monotone_escape);
    out.set("note", d.note);
    return out;
}

inline JsonValue to_json(const TopologyReport& r) {
    JsonValue dirs = JsonValue::array();
    for (const DirectionEvidence& d : r.directions) dirs.push(to_json(d));
    return JsonValue::object()
        .set("m", r.m)
        .set("r", r.r)
        .set("classification", r.classification)
        .set("t_max", r.t_max)
        .set("eps", r.eps)
        .set("note", r.note)
        .set("directions", std::move(dirs));
}

inline JsonValue to_json(const ActionAngleCheck& r) {
    JsonValue slopes = JsonValue::array();
    for (const auto& per_point : r.angle_slopes) {
        JsonValue row = JsonValue::array();
        for (double s : per_point) row.push(s);
        slopes.push(std::move(row));
    }
    JsonValue notes = JsonValue::array();
    for (const std::string& n : r.notes) notes.push(n);
    return JsonValue::object()
        .set("pass", r.pass)
        .set("max_integral_drift", r.max_integral_drift)
        .set("max_conserved_drift", r.max_conserved_drift)
        .set("max_angle_residual", r.max_angle_residual)
        .set("angle_slopes", std::move(slopes))
        .set("notes", std::move(notes));
}

/// Trajectory as CSV: header `t,<coord1>,...`, one row per recorded
/// sample, every number with 17 significant digits.
inline std::string to_csv(const FlowTrajectory& traj) {
    std::string out = "t";
    if (!traj.coords.empty()) {
        for (const std::string& c : traj.coords) {
            out += ',';
            out += c;
        }
    } else if (!traj.states.empty()) {
        for (size_t i = 0; i < traj.states.front().size(); ++i)
            out += ",x" + std::to_string(i + 1);
    }
    out += '\n';
    char buf[40];
    for (size_t s = 0; s < traj.times.size(); ++s) {
        int len = std::snprintf(buf, sizeof buf, "%.17g", traj.times[s]);
        out.append(buf, static_cast<size_t>(len));
        for (double v : traj.states[s]) {
            out += ',';
            len = std::snprintf(buf, sizeof buf, "%.17g", v);
            out.append(buf, static_cast<size_t>(len));
        }
        out += '\n';
    }
    return out;
}

} // namespace ncint

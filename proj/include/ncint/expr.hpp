#pragma once

// Immutable scalar expression trees: construction, evaluation, exact
// symbolic differentiation, constant folding, substitution, printing,
// and compilation to a flat tape for hot evaluation loops.
//
// Grammar of values: constants, named variables, neg/sqrt/exp/log/sin/
// cos/sinh/cosh, add/sub/mul/div, and pow with a constant real exponent.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ncint/errors.hpp"

namespace ncint {

/// Named point: variable name -> value.
using Env = std::map<std::string, double>;

enum class Op : std::uint8_t {
    Const, Var,
    Neg, Sqrt, Exp, Log, Sin, Cos, Sinh, Cosh,
    Add, Sub, Mul, Div,
    Pow, // child a raised to the constant exponent stored in `value`
};

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op;
    double value = 0.0;   // Const payload; Pow exponent
    std::string name;     // Var payload
    NodePtr a, b;
};

inline bool is_unary(Op op) {
    return op >= Op::Neg && op <= Op::Cosh;
}
inline bool is_binary(Op op) {
    return op >= Op::Add && op <= Op::Div;
}

// Checked primitive operations.  Every evaluation path funnels through
// these so tree evaluation and tape evaluation agree bit for bit.
inline double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
    return v;
}
inline double eval_unary(Op op, double x) {
    switch (op) {
        case Op::Neg:  return -x;
        case Op::Sqrt:
            if (x < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(x);
        case Op::Exp:  return checked(std::exp(x), "exp");
        case Op::Log:
            if (x <= 0.0) throw DomainError("log of non-positive value");
            return std::log(x);
        case Op::Sin:  return std::sin(x);
        case Op::Cos:  return std::cos(x);
        case Op::Sinh: return checked(std::sinh(x), "sinh");
        case Op::Cosh: return checked(std::cosh(x), "cosh");
        default: throw Error("eval_unary: not a unary op");
    }
}
inline double eval_binary(Op op, double x, double y) {
    switch (op) {
        case Op::Add: return checked(x + y, "add");
        case Op::Sub: return checked(x - y, "sub");
        case Op::Mul: return checked(x * y, "mul");
        case Op::Div:
            if (y == 0.0) throw DomainError("division by zero");
            return checked(x / y, "div");
        default: throw Error("eval_binary: not a binary op");
    }
}
inline double eval_pow(double base, double expo) {
    if (base < 0.0 && expo != std::nearbyint(expo))
        throw DomainError("fractional power of negative value");
    if (base == 0.0 && expo < 0.0)
        throw DomainError("negative power of zero");
    return checked(std::pow(base, expo), "pow");
}

} // namespace detail

/// Immutable expression handle.  Copies share structure; all operations
/// build new trees, so values are safe to reuse across threads.
class Expr {
public:
    Expr() : node_(zero_node()) {}
    Expr(double v) : node_(make(Op::Const, v)) {} // NOLINT: implicit by design
    explicit Expr(detail::NodePtr n) : node_(std::move(n)) {}

    static Expr constant(double v) { return Expr(v); }
    static Expr var(const std::string& name) {
        auto n = std::make_shared<detail::Node>();
        n->op = Op::Var;
        n->name = name;
        return Expr(n);
    }

    const detail::Node& node() const { return *node_; }
    const detail::NodePtr& ptr() const { return node_; }

    Op op() const { return node_->op; }
    bool is_constant() const { return node_->op == Op::Const; }
    bool is_constant(double v) const { return is_constant() && node_->value == v; }
    double constant_value() const {
        if (!is_constant()) throw Error("constant_value: not a constant");
        return node_->value;
    }

    static detail::NodePtr make(Op op, double value = 0.0,
                                detail::NodePtr a = nullptr,
                                detail::NodePtr b = nullptr) {
        auto n = std::make_shared<detail::Node>();
        n->op = op;
        n->value = value;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

private:
    static const detail::NodePtr& zero_node() {
        static const detail::NodePtr z = make(Op::Const, 0.0);
        return z;
    }
    detail::NodePtr node_;
};

inline Expr unary(Op op, const Expr& a) {
    return Expr(Expr::make(op, 0.0, a.ptr()));
}
inline Expr binary(Op op, const Expr& a, const Expr& b) {
    return Expr(Expr::make(op, 0.0, a.ptr(), b.ptr()));
}

inline Expr operator-(const Expr& a) { return unary(Op::Neg, a); }
inline Expr operator+(const Expr& a, const Expr& b) { return binary(Op::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return binary(Op::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return binary(Op::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return binary(Op::Div, a, b); }

inline Expr sqrt(const Expr& a) { return unary(Op::Sqrt, a); }
inline Expr exp(const Expr& a)  { return unary(Op::Exp, a); }
inline Expr log(const Expr& a)  { return unary(Op::Log, a); }
inline Expr sin(const Expr& a)  { return unary(Op::Sin, a); }
inline Expr cos(const Expr& a)  { return unary(Op::Cos, a); }
inline Expr sinh(const Expr& a) { return unary(Op::Sinh, a); }
inline Expr cosh(const Expr& a) { return unary(Op::Cosh, a); }

/// Power with a constant real exponent (the only supported form).
inline Expr pow(const Expr& base, double exponent) {
    return Expr(Expr::make(Op::Pow, exponent, base.ptr()));
}

/// Structural equality (same shape, bit-identical constants and names).
inline bool equal(const Expr& x, const Expr& y) {
    const detail::Node* a = &x.node();
    const detail::Node* b = &y.node();
    if (a == b) return true;
    if (a->op != b->op || a->value != b->value || a->name != b->name) return false;
    if (bool(a->a) != bool(b->a) || bool(a->b) != bool(b->b)) return false;
    if (a->a && !equal(Expr(a->a), Expr(b->a))) return false;
    if (a->b && !equal(Expr(a->b), Expr(b->b))) return false;
    return true;
}

/// Evaluate at a named point.  Throws UnboundVariable or DomainError.
inline double evaluate(const Expr& e, const Env& point) {
    const detail::Node& n = e.node();
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: {
            auto it = point.find(n.name);
            if (it == point.end()) throw UnboundVariable(n.name);
            return it->second;
        }
        case Op::Pow:
            return detail::eval_pow(evaluate(Expr(n.a), point), n.value);
        default:
            if (detail::is_unary(n.op))
                return detail::eval_unary(n.op, evaluate(Expr(n.a), point));
            return detail::eval_binary(n.op, evaluate(Expr(n.a), point),
                                       evaluate(Expr(n.b), point));
    }
}

/// Names of all variables reachable in the tree.
inline void collect_variables(const Expr& e, std::set<std::string>& out) {
    const detail::Node& n = e.node();
    if (n.op == Op::Var) out.insert(n.name);
    if (n.a) collect_variables(Expr(n.a), out);
    if (n.b) collect_variables(Expr(n.b), out);
}
inline std::set<std::string> variables(const Expr& e) {
    std::set<std::string> out;
    collect_variables(e, out);
    return out;
}

namespace detail {

// Smart constructors: local algebraic cleanup applied by differentiate
// and fold_constants.  They never change the value of the expression at
// any point where the input is defined (they may extend the domain,
// e.g. sinh(g)*0 -> 0).
inline Expr s_neg(const Expr& a) {
    if (a.is_constant()) return Expr(-a.constant_value());
    if (a.op() == Op::Neg) return Expr(a.node().a);
    return unary(Op::Neg, a);
}
inline Expr s_add(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant())
        return Expr(eval_binary(Op::Add, a.constant_value(), b.constant_value()));
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return binary(Op::Add, a, b);
}
inline Expr s_sub(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant())
        return Expr(eval_binary(Op::Sub, a.constant_value(), b.constant_value()));
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return s_neg(b);
    if (equal(a, b)) return Expr(0.0);
    return binary(Op::Sub, a, b);
}
inline Expr s_mul(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant())
        return Expr(eval_binary(Op::Mul, a.constant_value(), b.constant_value()));
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return s_neg(b);
    if (b.is_constant(-1.0)) return s_neg(a);
    return binary(Op::Mul, a, b);
}
inline Expr s_div(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
        return Expr(eval_binary(Op::Div, a.constant_value(), b.constant_value()));
    if (b.is_constant(1.0)) return a;
    if (b.is_constant(-1.0)) return s_neg(a);
    if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr(0.0);
    return binary(Op::Div, a, b);
}
inline Expr s_pow(const Expr& a, double c) {
    if (c == 1.0) return a;
    if (c == 0.0) return Expr(1.0);
    if (a.is_constant()) {
        try {
            return Expr(eval_pow(a.constant_value(), c));
        } catch (const DomainError&) { /* keep symbolic */ }
    }
    return pow(a, c);
}
inline Expr s_unary(Op op, const Expr& a) {
    if (op == Op::Neg) return s_neg(a);
    if (a.is_constant()) {
        try {
            return Expr(eval_unary(op, a.constant_value()));
        } catch (const DomainError&) { /* keep symbolic */ }
    }
    return unary(op, a);
}
inline Expr s_binary(Op op, const Expr& a, const Expr& b) {
    switch (op) {
        case Op::Add: return s_add(a, b);
        case Op::Sub: return s_sub(a, b);
        case Op::Mul: return s_mul(a, b);
        case Op::Div: return s_div(a, b);
        default: throw Error("s_binary: not a binary op");
    }
}

} // namespace detail

/// Exact symbolic partial derivative with respect to `var`.
/// Differentiating with respect to a variable not present yields 0.
inline Expr differentiate(const Expr& e, const std::string& var) {
    using namespace detail;
    const Node& n = e.node();
    switch (n.op) {
        case Op::Const: return Expr(0.0);
        case Op::Var:   return Expr(n.name == var ? 1.0 : 0.0);
        default: break;
    }
    Expr a(n.a);
    Expr da = differentiate(a, var);
    switch (n.op) {
        case Op::Neg:  return s_neg(da);
        case Op::Sqrt: return s_div(da, s_mul(Expr(2.0), sqrt(a)));
        case Op::Exp:  return s_mul(da, exp(a));
        case Op::Log:  return s_div(da, a);
        case Op::Sin:  return s_mul(da, cos(a));
        case Op::Cos:  return s_neg(s_mul(da, sin(a)));
        case Op::Sinh: return s_mul(da, cosh(a));
        case Op::Cosh: return s_mul(da, sinh(a));
        case Op::Pow:  return s_mul(s_mul(Expr(n.value), s_pow(a, n.value - 1.0)), da);
        default: break;
    }
    Expr b(n.b);
    Expr db = differentiate(b, var);
    switch (n.op) {
        case Op::Add: return s_add(da, db);
        case Op::Sub: return s_sub(da, db);
        case Op::Mul: return s_add(s_mul(da, b), s_mul(a, db));
        case Op::Div: return s_div(s_sub(s_mul(da, b), s_mul(a, db)), s_mul(b, b));
        default: throw Error("differentiate: unhandled op");
    }
}

/// Collapse constant subtrees and strip algebraic identities (x+0, 1*x,
/// 0*x, x/1, x^1, ...).  Idempotent; never changes the value at any
/// point where the input expression is defined (the domain may grow,
/// e.g. sinh(g)*0 folds to 0).  Constant subtrees whose evaluation
/// would raise a DomainError are left in place.
inline Expr fold_constants(const Expr& e) {
    using namespace detail;
    const Node& n = e.node();
    switch (n.op) {
        case Op::Const:
        case Op::Var:
            return e;
        case Op::Pow:
            return s_pow(fold_constants(Expr(n.a)), n.value);
        default:
            if (is_unary(n.op)) return s_unary(n.op, fold_constants(Expr(n.a)));
            return s_binary(n.op, fold_constants(Expr(n.a)), fold_constants(Expr(n.b)));
    }
}

/// Simultaneous capture-free substitution of variables by expressions.
inline Expr substitute(const Expr& e, const std::map<std::string, Expr>& repl) {
    const detail::Node& n = e.node();
    switch (n.op) {
        case Op::Const: return e;
        case Op::Var: {
            auto it = repl.find(n.name);
            return it == repl.end() ? e : it->second;
        }
        case Op::Pow:
            return pow(substitute(Expr(n.a), repl), n.value);
        default:
            if (detail::is_unary(n.op))
                return unary(n.op, substitute(Expr(n.a), repl));
            return binary(n.op, substitute(Expr(n.a), repl),
                          substitute(Expr(n.b), repl));
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

// Precedence levels used by the printer: add/sub 1, mul/div 2, unary
// minus 3, pow 4, atoms 5.  Output reparses to an equivalent expression
// (sum chains are emitted left-associated, so regrouping may shift a
// value by rounding error only) and reprints to the identical string:
// printing is a fixed point of parse-then-print.
inline int precedence(const Node& n) {
    switch (n.op) {
        case Op::Add: case Op::Sub: return 1;
        case Op::Mul: case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Const: return n.value < 0.0 ? 3 : 5;
        case Op::Pow: return 4;
        default: return 5;
    }
}

inline const char* function_name(Op op) {
    switch (op) {
        case Op::Sqrt: return "sqrt";
        case Op::Exp:  return "exp";
        case Op::Log:  return "log";
        case Op::Sin:  return "sin";
        case Op::Cos:  return "cos";
        case Op::Sinh: return "sinh";
        case Op::Cosh: return "cosh";
        default: return "";
    }
}

inline void print_node(const Node& n, std::string& out, int min_prec);

inline void print_child(const NodePtr& c, std::string& out, int min_prec) {
    const Node& n = *c;
    if (precedence(n) < min_prec) {
        out += '(';
        print_node(n, out, 0);
        out += ')';
    } else {
        print_node(n, out, 0);
    }
}

inline void print_node(const Node& n, std::string& out, int /*min_prec*/) {
    switch (n.op) {
        case Op::Const:
            out += format_double(n.value);
            return;
        case Op::Var:
            out += n.name;
            return;
        case Op::Neg:
            out += '-';
            print_child(n.a, out, 3);
            return;
        case Op::Add:
        case Op::Sub: {
            // Flatten the +/- chain into signed terms and emit the
            // left-associated canonical form: negations and negative
            // constants are folded into the joining operator, so the
            // output reparses to a tree that flattens — and therefore
            // prints — identically.
            struct Term {
                const Node* node;
                bool neg;
            };
            std::vector<Term> terms;
            auto collect = [&terms](auto&& self, const Node& nd, bool neg) -> void {
                const Node* t = &nd;
                bool s = neg;
                while (t->op == Op::Neg) {
                    s = !s;
                    t = t->a.get();
                }
                if (t->op == Op::Add || t->op == Op::Sub) {
                    self(self, *t->a, s);
                    self(self, *t->b, s != (t->op == Op::Sub));
                    return;
                }
                if (t->op == Op::Const && t->value < 0.0) s = !s; // printed as |value|
                terms.push_back({t, s});
            };
            collect(collect, n, false);
            for (size_t i = 0; i < terms.size(); ++i) {
                const Term& tm = terms[i];
                if (i == 0) {
                    if (tm.neg) out += '-';
                } else {
                    out += tm.neg ? " - " : " + ";
                }
                if (tm.node->op == Op::Const && tm.node->value < 0.0) {
                    out += format_double(-tm.node->value);
                    continue;
                }
                if (i == 0 && tm.neg) {
                    // leading negation binds like unary minus
                    if (precedence(*tm.node) < 3) {
                        out += '(';
                        print_node(*tm.node, out, 0);
                        out += ')';
                    } else {
                        print_node(*tm.node, out, 0);
                    }
                    continue;
                }
                print_node(*tm.node, out, 0);
            }
            return;
        }
        case Op::Mul:
            print_child(n.a, out, 2);
            out += '*';
            print_child(n.b, out, 2);
            return;
        case Op::Div:
            print_child(n.a, out, 2);
            out += '/';
            print_child(n.b, out, 3);
            return;
        case Op::Pow:
            print_child(n.a, out, 5);
            out += '^';
            out += format_double(n.value);
            return;
        default:
            out += function_name(n.op);
            out += '(';
            print_node(*n.a, out, 0);
            out += ')';
            return;
    }
}

} // namespace detail

/// Canonical infix form.  Parse of the output is numerically identical
/// to the input, and printing is stable under parse-then-print.
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print_node(e.node(), out, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Compilation to a flat tape
// ---------------------------------------------------------------------------

/// Expression compiled against a fixed coordinate order.  Evaluation
/// reads values by slot index from a span, avoiding name lookups; used
/// by the flow integrator and the samplers.  Pure and thread-safe.
class CompiledExpr {
public:
    static constexpr int kMaxStack = 256;

    double operator()(std::span<const double> values) const {
        std::array<double, kMaxStack> stack;
        int sp = 0;
        for (const Step& s : steps_) {
            switch (s.op) {
                case Op::Const: stack[sp++] = s.value; break;
                case Op::Var:   stack[sp++] = values[static_cast<size_t>(s.slot)]; break;
                case Op::Pow:
                    stack[sp - 1] = detail::eval_pow(stack[sp - 1], s.value);
                    break;
                default:
                    if (detail::is_unary(s.op)) {
                        stack[sp - 1] = detail::eval_unary(s.op, stack[sp - 1]);
                    } else {
                        stack[sp - 2] = detail::eval_binary(s.op, stack[sp - 2], stack[sp - 1]);
                        --sp;
                    }
            }
        }
        return stack[0];
    }

    friend CompiledExpr compile(const Expr& e, std::span<const std::string> coords);

private:
    struct Step {
        Op op;
        double value = 0.0;
        int slot = 0;
    };
    std::vector<Step> steps_;
};

/// Compile `e` against the coordinate order `coords`.  Throws
/// UnboundVariable for variables not in `coords` and Error if the
/// expression nests deeper than the fixed evaluation stack.
inline CompiledExpr compile(const Expr& e, std::span<const std::string> coords) {
    CompiledExpr c;
    int depth = 0, max_depth = 0;
    auto emit = [&](auto&& self, const detail::Node& n) -> void {
        switch (n.op) {
            case Op::Const:
                c.steps_.push_back({Op::Const, n.value, 0});
                max_depth = std::max(max_depth, ++depth);
                return;
            case Op::Var: {
                auto it = std::find(coords.begin(), coords.end(), n.name);
                if (it == coords.end()) throw UnboundVariable(n.name);
                c.steps_.push_back({Op::Var, 0.0, static_cast<int>(it - coords.begin())});
                max_depth = std::max(max_depth, ++depth);
                return;
            }
            case Op::Pow:
                self(self, *n.a);
                c.steps_.push_back({Op::Pow, n.value, 0});
                return;
            default:
                self(self, *n.a);
                if (detail::is_binary(n.op)) {
                    self(self, *n.b);
                    --depth;
                }
                c.steps_.push_back({n.op, 0.0, 0});
                return;
        }
    };
    emit(emit, e.node());
    if (max_depth > CompiledExpr::kMaxStack)
        throw Error("compile: expression too deep");
    return c;
}

/// Evaluate against an ordered coordinate list without precompiling.
inline double evaluate_at(const Expr& e, std::span<const std::string> coords,
                          std::span<const double> values) {
    Env env;
    for (size_t i = 0; i < coords.size(); ++i) env[coords[i]] = values[i];
    return evaluate(e, env);
}

} // namespace ncint

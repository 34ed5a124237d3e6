#pragma once

// Recursive-descent parser for the ASCII infix expression grammar:
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := primary ('^' unary)?          (right associative)
//   primary:= number | ident | ident '(' expr ')' | '(' expr ')'
//
// Exponents must fold to constants.  Identifiers name coordinates;
// sqrt/exp/log/sin/cos/sinh/cosh are reserved function names.
// Errors carry 1-based line and column positions.

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>

#include "ncint/errors.hpp"
#include "ncint/expr.hpp"

namespace ncint {

namespace detail {

class ExprParser {
public:
    ExprParser(std::string_view text, int line, int column_base)
        : text_(text), line_(line), col_base_(column_base) {}

    Expr parse() {
        skip_ws();
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    std::string_view text_;
    size_t pos_ = 0;
    int line_;
    int col_base_;

    [[noreturn]] void fail(const std::string& msg) const {
        throw SyntaxError(msg, line_, col_base_ + static_cast<int>(pos_));
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    bool consume(char c) {
        if (peek() == c) { ++pos_; return true; }
        return false;
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            skip_ws();
            if (consume('+')) { skip_ws(); e = e + parse_term(); }
            else if (consume('-')) { skip_ws(); e = e - parse_term(); }
            else return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_unary();
        for (;;) {
            skip_ws();
            if (consume('*')) { skip_ws(); e = e * parse_unary(); }
            else if (consume('/')) { skip_ws(); e = e / parse_unary(); }
            else return e;
        }
    }

    Expr parse_unary() {
        skip_ws();
        if (consume('-')) return -parse_unary();
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        skip_ws();
        if (!consume('^')) return base;
        skip_ws();
        size_t at = pos_;
        Expr expo = fold_constants(parse_unary());
        if (!expo.is_constant()) {
            pos_ = at;
            fail("exponent must be a constant");
        }
        return pow(base, expo.constant_value());
    }

    Expr parse_primary() {
        skip_ws();
        char c = peek();
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            skip_ws();
            if (!consume(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return parse_ident();
        if (c == '\0') fail("unexpected end of expression");
        fail(std::string("unexpected character '") + c + "'");
    }

    Expr parse_number() {
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double v = 0.0;
        auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc())
            fail("malformed number");
        pos_ = static_cast<size_t>(res.ptr - text_.data());
        return Expr(v);
    }

    Expr parse_ident() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        skip_ws();
        if (peek() == '(') {
            Op op;
            if (name == "sqrt")      op = Op::Sqrt;
            else if (name == "exp")  op = Op::Exp;
            else if (name == "log")  op = Op::Log;
            else if (name == "sin")  op = Op::Sin;
            else if (name == "cos")  op = Op::Cos;
            else if (name == "sinh") op = Op::Sinh;
            else if (name == "cosh") op = Op::Cosh;
            else {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            ++pos_; // '('
            Expr arg = parse_expr();
            skip_ws();
            if (!consume(')')) fail("expected ')'");
            return unary(op, arg);
        }
        return Expr::var(name);
    }
};

} // namespace detail

/// Parse one infix expression.  `line` and `column_base` seed the
/// positions reported in SyntaxError (for expressions embedded in a
/// larger file); defaults report a standalone line.
inline Expr parse_expression(std::string_view text, int line = 1, int column_base = 1) {
    return detail::ExprParser(text, line, column_base).parse();
}

} // namespace ncint

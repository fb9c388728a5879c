#pragma once

// Problem-definition language (".spray" files).
//
//   # comment
//   dim 2
//   const r = 1
//   spray G1 = 1/(2*r) * y2 * sqrt(y1^2 + y2^2)
//   spray G2 = -1/(2*r) * y1 * sqrt(y1^2 + y2^2)
//   guard = y1^2 + y2^2
//
// A file declares either n spray coefficients G1..Gn or one metric L. Constants
// are substituted while parsing; guards must stay positive at sample points.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spraylab/errors.hpp"
#include "spraylab/jet.hpp"

namespace spraylab {

enum class Op { Constant, Variable, Add, Sub, Mul, Div, Neg, Pow, Sqrt, Exp, Ln, Abs, Atan, Sin, Cos };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

/// Immutable expression tree node. Variables are numbered over the chart:
/// x^k -> k-1, y^k -> n+k-1.
struct ExprNode {
    Op op = Op::Constant;
    double value = 0.0;
    int var = -1;
    std::vector<ExprPtr> args;
};

inline int arity(Op op) {
    switch (op) {
        case Op::Constant:
        case Op::Variable: return 0;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: return 2;
        default: return 1;
    }
}

namespace expr {

inline ExprPtr constant(double v) { return std::make_shared<const ExprNode>(ExprNode{Op::Constant, v, -1, {}}); }
inline ExprPtr variable(int index) { return std::make_shared<const ExprNode>(ExprNode{Op::Variable, 0.0, index, {}}); }

inline ExprPtr make(Op op, std::vector<ExprPtr> args) {
    if (static_cast<int>(args.size()) != arity(op)) throw ArityError("wrong operand count for expression node");
    return std::make_shared<const ExprNode>(ExprNode{op, 0.0, -1, std::move(args)});
}

inline ExprPtr add(ExprPtr a, ExprPtr b) { return make(Op::Add, {std::move(a), std::move(b)}); }
inline ExprPtr sub(ExprPtr a, ExprPtr b) { return make(Op::Sub, {std::move(a), std::move(b)}); }
inline ExprPtr mul(ExprPtr a, ExprPtr b) { return make(Op::Mul, {std::move(a), std::move(b)}); }
inline ExprPtr div(ExprPtr a, ExprPtr b) { return make(Op::Div, {std::move(a), std::move(b)}); }
inline ExprPtr pow(ExprPtr a, ExprPtr b) { return make(Op::Pow, {std::move(a), std::move(b)}); }
inline ExprPtr neg(ExprPtr a) { return make(Op::Neg, {std::move(a)}); }

}  // namespace expr

namespace detail {

inline std::optional<int> integer_exponent(const ExprNode& e) {
    if (e.op != Op::Constant) return std::nullopt;
    if (e.value != std::round(e.value) || std::abs(e.value) > 1e6) return std::nullopt;
    return static_cast<int>(e.value);
}

}  // namespace detail

/// Jet evaluation. Non-integer powers go through exp(e * ln(base)).
inline Jet evaluate(const ExprNode& e, std::span<const Jet> env) {
    switch (e.op) {
        case Op::Constant: return Jet::constant(env.front().space(), e.value);
        case Op::Variable: return env[static_cast<std::size_t>(e.var)];
        case Op::Add: return evaluate(*e.args[0], env) + evaluate(*e.args[1], env);
        case Op::Sub: return evaluate(*e.args[0], env) - evaluate(*e.args[1], env);
        case Op::Mul: return evaluate(*e.args[0], env) * evaluate(*e.args[1], env);
        case Op::Div: return evaluate(*e.args[0], env) / evaluate(*e.args[1], env);
        case Op::Neg: return -evaluate(*e.args[0], env);
        case Op::Pow: {
            const Jet base = evaluate(*e.args[0], env);
            if (auto k = detail::integer_exponent(*e.args[1])) return pow(base, *k);
            return exp(evaluate(*e.args[1], env) * log(base));
        }
        case Op::Sqrt: return sqrt(evaluate(*e.args[0], env));
        case Op::Exp: return exp(evaluate(*e.args[0], env));
        case Op::Ln: return log(evaluate(*e.args[0], env));
        case Op::Abs: return abs(evaluate(*e.args[0], env));
        case Op::Atan: return atan(evaluate(*e.args[0], env));
        case Op::Sin: return sin(evaluate(*e.args[0], env));
        case Op::Cos: return cos(evaluate(*e.args[0], env));
    }
    throw std::logic_error("unhandled expression node");
}

/// Plain real evaluation, independent of the jet code (used by the
/// finite-difference oracle). Throws DomainError outside the domain.
template <class Real>
Real basic_evaluate_real(const ExprNode& e, std::span<const Real> env) {
    auto arg = [&](std::size_t i) { return basic_evaluate_real<Real>(*e.args[i], env); };
    switch (e.op) {
        case Op::Constant: return static_cast<Real>(e.value);
        case Op::Variable: return env[static_cast<std::size_t>(e.var)];
        case Op::Add: return arg(0) + arg(1);
        case Op::Sub: return arg(0) - arg(1);
        case Op::Mul: return arg(0) * arg(1);
        case Op::Div: {
            const Real d = arg(1);
            if (d == 0) throw DomainError("division by zero");
            return arg(0) / d;
        }
        case Op::Neg: return -arg(0);
        case Op::Pow: {
            const Real b = arg(0);
            if (auto k = detail::integer_exponent(*e.args[1])) {
                if (*k < 0 && b == 0) throw DomainError("negative power of zero");
                return std::pow(b, *k);
            }
            if (!(b > 0)) throw DomainError("non-integer power of a non-positive base");
            return std::exp(arg(1) * std::log(b));
        }
        case Op::Sqrt: {
            const Real v = arg(0);
            if (v < 0) throw DomainError("sqrt of a negative value");
            return std::sqrt(v);
        }
        case Op::Exp: return std::exp(arg(0));
        case Op::Ln: {
            const Real v = arg(0);
            if (!(v > 0)) throw DomainError("ln of a non-positive value");
            return std::log(v);
        }
        case Op::Abs: return std::abs(arg(0));
        case Op::Atan: return std::atan(arg(0));
        case Op::Sin: return std::sin(arg(0));
        case Op::Cos: return std::cos(arg(0));
    }
    throw std::logic_error("unhandled expression node");
}

inline double evaluate_real(const ExprNode& e, std::span<const double> env) { return basic_evaluate_real<double>(e, env); }

inline bool structurally_equal(const ExprNode& a, const ExprNode& b) {
    if (a.op != b.op) return false;
    if (a.op == Op::Constant) return a.value == b.value;
    if (a.op == Op::Variable) return a.var == b.var;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!structurally_equal(*a.args[i], *b.args[i])) return false;
    return true;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Fully parenthesised infix form that reparses to the same tree.
inline std::string to_string(const ExprNode& e, int dim) {
    auto arg = [&](std::size_t i) { return to_string(*e.args[i], dim); };
    auto binary = [&](const char* op) { return "(" + arg(0) + " " + op + " " + arg(1) + ")"; };
    switch (e.op) {
        case Op::Constant: return e.value < 0.0 ? "(" + format_number(e.value) + ")" : format_number(e.value);
        case Op::Variable:
            return (e.var < dim ? "x" : "y") + std::to_string(e.var % dim + 1);
        case Op::Add: return binary("+");
        case Op::Sub: return binary("-");
        case Op::Mul: return binary("*");
        case Op::Div: return binary("/");
        case Op::Pow: return "(" + arg(0) + "^" + arg(1) + ")";
        case Op::Neg: return "(-" + arg(0) + ")";
        case Op::Sqrt: return "sqrt(" + arg(0) + ")";
        case Op::Exp: return "exp(" + arg(0) + ")";
        case Op::Ln: return "ln(" + arg(0) + ")";
        case Op::Abs: return "abs(" + arg(0) + ")";
        case Op::Atan: return "atan(" + arg(0) + ")";
        case Op::Sin: return "sin(" + arg(0) + ")";
        case Op::Cos: return "cos(" + arg(0) + ")";
    }
    throw std::logic_error("unhandled expression node");
}

enum class ProblemKind { Spray, Metric };

struct ProblemDef {
    std::string name;
    int dim = 0;
    ProblemKind kind = ProblemKind::Spray;
    std::vector<ExprPtr> exprs;   // G^1..G^n, or the single metric L
    std::vector<ExprPtr> guards;  // each must stay positive
    std::string metric_name = "L";
    std::vector<std::pair<std::string, double>> constants;  // in declaration order, after overrides

    const ExprNode& metric() const { return *exprs.at(0); }
};

/// Canonical source text; parse(to_source(def)) is structurally identical.
inline std::string to_source(const ProblemDef& def) {
    std::string out = "dim " + std::to_string(def.dim) + "\n";
    if (def.kind == ProblemKind::Spray) {
        for (int i = 0; i < def.dim; ++i)
            out += "spray G" + std::to_string(i + 1) + " = " + to_string(*def.exprs[static_cast<std::size_t>(i)], def.dim) + "\n";
    } else {
        out += "metric " + def.metric_name + " = " + to_string(def.metric(), def.dim) + "\n";
    }
    for (const auto& g : def.guards) out += "guard = " + to_string(*g, def.dim) + "\n";
    return out;
}

namespace detail {

enum class Tok { Number, Ident, Symbol, Newline, End };

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
    int line = 1;
    int col = 1;
};

inline std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t k) {
        i += k;
        col += static_cast<int>(k);
    };
    while (i < src.size()) {
        const char c = src[i];
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
        } else if (c == '\n') {
            out.push_back({Tok::Newline, "\\n", 0.0, line, col});
            ++i;
            ++line;
            col = 1;
        } else if (c == ' ' || c == '\t' || c == '\r') {
            advance(1);
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() &&
                                                                    std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    j = k;
                    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                }
            }
            const std::string text(src.substr(i, j - i));
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != text.size()) throw SyntaxError(line, col, "a number");
            out.push_back({Tok::Number, text, v, line, col});
            advance(j - i);
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), 0.0, line, col});
            advance(j - i);
        } else if (std::string_view("+-*/^()=,").find(c) != std::string_view::npos) {
            out.push_back({Tok::Symbol, std::string(1, c), 0.0, line, col});
            advance(1);
        } else {
            throw SyntaxError(line, col, "a token (unexpected character '" + std::string(1, c) + "')");
        }
    }
    out.push_back({Tok::End, "end of input", 0.0, line, col});
    return out;
}

class Parser {
public:
    Parser(std::string_view src, const std::map<std::string, double>& overrides)
        : tokens_(tokenize(src)), overrides_(overrides) {}

    ProblemDef run(std::string name) {
        ProblemDef def;
        def.name = std::move(name);
        skip_newlines();
        expect_ident("dim");
        const Token& n = peek();
        if (n.kind != Tok::Number || n.number != std::round(n.number)) throw SyntaxError(n.line, n.col, "integer dimension");
        def.dim = static_cast<int>(n.number);
        if (def.dim < 2 || def.dim > kMaxJetVars / 2)
            throw DimensionError("dimension " + std::to_string(def.dim) + " outside supported range [2, " +
                                 std::to_string(kMaxJetVars / 2) + "]");
        dim_ = def.dim;
        ++pos_;
        end_statement();

        std::map<int, ExprPtr> sprays;
        std::optional<ExprPtr> metric;
        int statements = 0;
        for (skip_newlines(); peek().kind != Tok::End; skip_newlines()) {
            const Token& head = peek();
            if (head.kind != Tok::Ident) throw SyntaxError(head.line, head.col, "'spray', 'metric', 'guard' or 'const'");
            ++statements;
            if (head.text == "const") {
                ++pos_;
                const Token& id = take_ident("constant name");
                if (is_reserved(id.text)) throw SyntaxError(id.line, id.col, "a constant name that is not a variable or function");
                expect_symbol("=");
                double sign = 1.0;
                if (peek().kind == Tok::Symbol && peek().text == "-") {
                    sign = -1.0;
                    ++pos_;
                }
                const Token& num = peek();
                if (num.kind != Tok::Number) throw SyntaxError(num.line, num.col, "a number");
                ++pos_;
                double v = sign * num.number;
                if (auto it = overrides_.find(id.text); it != overrides_.end()) v = it->second;
                constants_[id.text] = v;
                def.constants.emplace_back(id.text, v);
            } else if (head.text == "spray") {
                ++pos_;
                const Token& id = take_ident("spray coefficient name such as G1");
                const auto digits = id.text.find_first_of("0123456789");
                if (digits == std::string::npos || digits == 0 ||
                    id.text.find_first_not_of("0123456789", digits) != std::string::npos)
                    throw SyntaxError(id.line, id.col, "spray coefficient name such as G1");
                const int index = std::stoi(id.text.substr(digits));
                if (index < 1 || index > dim_)
                    throw DimensionError("spray coefficient " + id.text + " out of range for dim " + std::to_string(dim_));
                if (sprays.count(index)) throw ArityError("spray coefficient " + id.text + " defined twice");
                expect_symbol("=");
                sprays[index] = parse_expr();
            } else if (head.text == "metric") {
                ++pos_;
                const Token& id = take_ident("metric name");
                if (metric) throw ArityError("a problem defines exactly one metric");
                def.metric_name = id.text;
                expect_symbol("=");
                metric = parse_expr();
            } else if (head.text == "guard") {
                ++pos_;
                expect_symbol("=");
                def.guards.push_back(parse_expr());
            } else {
                throw SyntaxError(head.line, head.col, "'spray', 'metric', 'guard' or 'const'");
            }
            end_statement();
        }
        for (const auto& [key, value] : overrides_)
            if (!constants_.count(key)) throw ParamError("override for undeclared constant '" + key + "'");
        if (statements == 0) throw SyntaxError(peek().line, peek().col, "at least one statement");

        if (metric && !sprays.empty()) throw ArityError("a problem is either a spray or a metric, not both");
        if (metric) {
            def.kind = ProblemKind::Metric;
            def.exprs.push_back(*metric);
        } else {
            if (static_cast<int>(sprays.size()) != dim_)
                throw ArityError("spray needs " + std::to_string(dim_) + " coefficients, got " + std::to_string(sprays.size()));
            def.kind = ProblemKind::Spray;
            for (auto& [i, e] : sprays) def.exprs.push_back(e);
        }
        return def;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }

    void skip_newlines() {
        while (peek().kind == Tok::Newline) ++pos_;
    }

    void end_statement() {
        const Token& t = peek();
        if (t.kind == Tok::Newline) {
            ++pos_;
            return;
        }
        if (t.kind != Tok::End) throw SyntaxError(t.line, t.col, "end of line");
    }

    void expect_ident(const std::string& word) {
        const Token& t = peek();
        if (t.kind != Tok::Ident || t.text != word) throw SyntaxError(t.line, t.col, "'" + word + "'");
        ++pos_;
    }

    const Token& take_ident(const std::string& what) {
        const Token& t = peek();
        if (t.kind != Tok::Ident) throw SyntaxError(t.line, t.col, what);
        ++pos_;
        return t;
    }

    void expect_symbol(const std::string& s) {
        const Token& t = peek();
        if (t.kind != Tok::Symbol || t.text != s) throw SyntaxError(t.line, t.col, "'" + s + "'");
        ++pos_;
    }

    bool accept_symbol(const char* s) {
        if (peek().kind == Tok::Symbol && peek().text == s) {
            ++pos_;
            return true;
        }
        return false;
    }

    static std::optional<Op> function_op(const std::string& name) {
        static const std::map<std::string, Op> table{{"sqrt", Op::Sqrt}, {"exp", Op::Exp},   {"ln", Op::Ln},
                                                     {"log", Op::Ln},    {"abs", Op::Abs},   {"atan", Op::Atan},
                                                     {"arctan", Op::Atan}, {"sin", Op::Sin}, {"cos", Op::Cos}};
        if (auto it = table.find(name); it != table.end()) return it->second;
        return std::nullopt;
    }

    static std::optional<std::pair<char, int>> variable_name(const std::string& s) {
        if (s.size() < 2 || (s[0] != 'x' && s[0] != 'y')) return std::nullopt;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        return std::make_pair(s[0], std::stoi(s.substr(1)));
    }

    static bool is_reserved(const std::string& s) {
        return variable_name(s) || function_op(s) || s == "pi" || s == "dim" || s == "spray" || s == "metric" ||
               s == "guard" || s == "const";
    }

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        for (;;) {
            if (accept_symbol("+"))
                lhs = expr::add(lhs, parse_term());
            else if (accept_symbol("-"))
                lhs = expr::sub(lhs, parse_term());
            else
                return lhs;
        }
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_unary();
        for (;;) {
            if (accept_symbol("*"))
                lhs = expr::mul(lhs, parse_unary());
            else if (accept_symbol("/"))
                lhs = expr::div(lhs, parse_unary());
            else
                return lhs;
        }
    }

    // Unary minus binds looser than ^, so -a^2 = -(a^2). A negated constant
    // folds into a negative constant.
    ExprPtr parse_unary() {
        if (accept_symbol("-")) {
            ExprPtr operand = parse_unary();
            if (operand->op == Op::Constant) return expr::constant(-operand->value);
            return expr::neg(operand);
        }
        if (accept_symbol("+")) return parse_unary();
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        if (accept_symbol("^")) return expr::pow(base, parse_unary());
        return base;
    }

    ExprPtr parse_primary() {
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            ++pos_;
            return expr::constant(t.number);
        }
        if (t.kind == Tok::Symbol && t.text == "(") {
            ++pos_;
            ExprPtr inner = parse_expr();
            expect_symbol(")");
            return inner;
        }
        if (t.kind == Tok::Ident) {
            ++pos_;
            if (auto op = function_op(t.text)) {
                expect_symbol("(");
                std::vector<ExprPtr> args{parse_expr()};
                while (accept_symbol(",")) args.push_back(parse_expr());
                expect_symbol(")");
                if (args.size() != 1)
                    throw ArityError("function " + t.text + " takes 1 argument, got " + std::to_string(args.size()));
                return expr::make(*op, std::move(args));
            }
            if (auto v = variable_name(t.text)) {
                if (v->second < 1 || v->second > dim_)
                    throw DimensionError("variable " + t.text + " out of range for dim " + std::to_string(dim_) +
                                         " (line " + std::to_string(t.line) + ")");
                return expr::variable((v->first == 'x' ? 0 : dim_) + v->second - 1);
            }
            if (t.text == "pi") return expr::constant(3.14159265358979323846);
            if (auto it = constants_.find(t.text); it != constants_.end()) return expr::constant(it->second);
            throw SyntaxError(t.line, t.col, "a variable, declared constant or function (got '" + t.text + "')");
        }
        throw SyntaxError(t.line, t.col, "an expression");
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int dim_ = 0;
    const std::map<std::string, double>& overrides_;
    std::map<std::string, double> constants_;
};

}  // namespace detail

/// Parses ".spray" text. `overrides` replaces declared constant values.
inline ProblemDef parse(std::string_view text, const std::map<std::string, double>& overrides = {},
                        std::string name = {}) {
    return detail::Parser(text, overrides).run(std::move(name));
}

}  // namespace spraylab

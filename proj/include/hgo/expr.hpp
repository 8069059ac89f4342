#pragma once

// Scalar expression language used for the nonlinearities f_i, inputs u(t),
// delays tau(t), history functions phi(s) and gamma bounds gamma_i(eps).
//
// Grammar (recursive descent, lowest precedence first):
//   expr    := term   (('+' | '-') term)*
//   term    := unary  (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | 'pi' | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// A leading minus applies to the whole power, so "-2^2" is -(2^2) = -4.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgo/error.hpp"

namespace hgo {

enum class Function { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Min, Max };

inline std::string_view function_name(Function f) {
    constexpr std::array<std::string_view, 9> names{"sin", "cos", "tan", "exp", "log",
                                                    "sqrt", "abs", "min", "max"};
    return names[static_cast<std::size_t>(f)];
}

inline std::optional<Function> lookup_function(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(Function::Max); ++i) {
        auto f = static_cast<Function>(i);
        if (function_name(f) == name) return f;
    }
    return std::nullopt;
}

inline std::size_t function_arity(Function f) {
    return (f == Function::Min || f == Function::Max) ? 2 : 1;
}

/// True for the variable vocabulary: t, s, eps, x<k>, xd<k>, u<k>, ud<k> with k >= 1.
inline bool is_valid_variable_name(std::string_view name) {
    if (name == "t" || name == "s" || name == "eps") return true;
    std::string_view index;
    for (std::string_view prefix : {"xd", "ud", "x", "u"}) {
        if (name.starts_with(prefix)) {
            index = name.substr(prefix.size());
            break;
        }
    }
    if (index.empty() || index.front() == '0') return false;
    for (char c : index)
        if (c < '0' || c > '9') return false;
    return true;
}

struct ExprNode;
using ExprNodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { Number, Variable, Negate, Binary, Call };

    Kind kind = Kind::Number;
    double value = 0.0;        // Number
    std::string name;          // Variable
    char op = 0;               // Binary: + - * / ^
    Function function{};       // Call
    std::vector<ExprNodePtr> args;
};

using Environment = std::map<std::string, double, std::less<>>;

namespace detail {

inline double checked(double result, std::string_view what, double arg) {
    if (!std::isfinite(result)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", arg);
        throw EvalError("domain error: " + std::string(what) + " produced a non-finite value for argument " +
                        buf);
    }
    return result;
}

inline double apply_binary(char op, double lhs, double rhs) {
    switch (op) {
    case '+': return lhs + rhs;
    case '-': return lhs - rhs;
    case '*': return lhs * rhs;
    case '/':
        if (rhs == 0.0) throw EvalError("domain error: division by zero");
        return checked(lhs / rhs, "division", rhs);
    case '^':
        if (lhs < 0.0 && std::trunc(rhs) != rhs) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "(%.17g)^(%.17g)", lhs, rhs);
            throw EvalError(std::string("domain error: negative base with non-integer exponent ") + buf);
        }
        return checked(std::pow(lhs, rhs), "^", lhs);
    default: throw EvalError(std::string("internal: unknown operator ") + op);
    }
}

inline double apply_function(Function f, const double* a) {
    auto domain = [&](std::string_view msg) -> double {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", a[0]);
        throw EvalError("domain error: " + std::string(function_name(f)) + "(" + buf + ") " +
                        std::string(msg));
    };
    switch (f) {
    case Function::Sin: return std::sin(a[0]);
    case Function::Cos: return std::cos(a[0]);
    case Function::Tan: return checked(std::tan(a[0]), "tan", a[0]);
    case Function::Exp: return checked(std::exp(a[0]), "exp", a[0]);
    case Function::Log:
        if (a[0] <= 0.0) return domain("requires a positive argument");
        return std::log(a[0]);
    case Function::Sqrt:
        if (a[0] < 0.0) return domain("requires a non-negative argument");
        return std::sqrt(a[0]);
    case Function::Abs: return std::fabs(a[0]);
    case Function::Min: return std::fmin(a[0], a[1]);
    case Function::Max: return std::fmax(a[0], a[1]);
    }
    return 0.0;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ExprNodePtr parse() {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        auto root = parse_expr();
        skip_space();
        if (pos_ < text_.size()) unexpected();
        return root;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                       text_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void unexpected() {
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        char c = text_[pos_];
        if (std::string_view("+-*/^(),.").find(c) == std::string_view::npos && !is_ident_char(c))
            throw ParseError(std::string("unknown character '") + c + "'", pos_);
        throw ParseError(std::string("syntax error near '") + c + "'", pos_);
    }

    static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    static ExprNodePtr make_number(double v) {
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::Number;
        n->value = v;
        return n;
    }

    static ExprNodePtr make_binary(char op, ExprNodePtr lhs, ExprNodePtr rhs) {
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::Binary;
        n->op = op;
        n->args = {std::move(lhs), std::move(rhs)};
        return n;
    }

    ExprNodePtr parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = make_binary('+', lhs, parse_term());
            else if (accept('-')) lhs = make_binary('-', lhs, parse_term());
            else return lhs;
        }
    }

    ExprNodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = make_binary('*', lhs, parse_unary());
            else if (accept('/')) lhs = make_binary('/', lhs, parse_unary());
            else return lhs;
        }
    }

    ExprNodePtr parse_unary() {
        if (accept('-')) {
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprNode::Kind::Negate;
            n->args = {parse_unary()};
            return n;
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    ExprNodePtr parse_power() {
        auto base = parse_primary();
        if (accept('^')) return make_binary('^', base, parse_unary());
        return base;
    }

    ExprNodePtr parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) unexpected();
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = parse_expr();
            if (!accept(')')) unexpected();
            return inner;
        }
        if (is_digit(c) || c == '.') return parse_number();
        if (is_ident_start(c)) return parse_identifier();
        unexpected();
    }

    ExprNodePtr parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && is_digit(text_[pos_])) {
                while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
            } else {
                pos_ = save;
            }
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc() || ptr != text_.data() + pos_)
            throw ParseError("malformed number", start);
        return make_number(value);
    }

    ExprNodePtr parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
        std::string_view ident = text_.substr(start, pos_ - start);
        skip_space();
        bool call = pos_ < text_.size() && text_[pos_] == '(';
        if (call) {
            auto fn = lookup_function(ident);
            if (!fn) throw ParseError("unknown function '" + std::string(ident) + "'", start);
            ++pos_;
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprNode::Kind::Call;
            n->function = *fn;
            n->args.push_back(parse_expr());
            while (accept(',')) n->args.push_back(parse_expr());
            if (!accept(')')) unexpected();
            if (n->args.size() != function_arity(*fn))
                throw ParseError("function '" + std::string(ident) + "' expects " +
                                     std::to_string(function_arity(*fn)) + " argument(s)",
                                 start);
            return n;
        }
        if (ident == "pi") return make_number(std::numbers::pi);
        if (lookup_function(ident)) throw ParseError("function '" + std::string(ident) + "' requires '('", pos_);
        if (!is_valid_variable_name(ident))
            throw ParseError("unknown identifier '" + std::string(ident) + "'", start);
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::Variable;
        n->name = std::string(ident);
        return n;
    }
};

inline void collect_variables(const ExprNode& node, std::set<std::string>& out) {
    if (node.kind == ExprNode::Kind::Variable) out.insert(node.name);
    for (const auto& a : node.args) collect_variables(*a, out);
}

inline void print(const ExprNode& node, std::string& out) {
    switch (node.kind) {
    case ExprNode::Kind::Number: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", node.value);
        out += buf;
        return;
    }
    case ExprNode::Kind::Variable: out += node.name; return;
    case ExprNode::Kind::Negate:
        out += "(-";
        print(*node.args[0], out);
        out += ')';
        return;
    case ExprNode::Kind::Binary:
        out += '(';
        print(*node.args[0], out);
        out += node.op;
        print(*node.args[1], out);
        out += ')';
        return;
    case ExprNode::Kind::Call:
        out += function_name(node.function);
        out += '(';
        for (std::size_t i = 0; i < node.args.size(); ++i) {
            if (i) out += ',';
            print(*node.args[i], out);
        }
        out += ')';
        return;
    }
}

inline double eval_node(const ExprNode& node, const Environment& env) {
    switch (node.kind) {
    case ExprNode::Kind::Number: return node.value;
    case ExprNode::Kind::Variable: {
        auto it = env.find(node.name);
        if (it == env.end()) throw EvalError("unbound variable '" + node.name + "'");
        return it->second;
    }
    case ExprNode::Kind::Negate: return -eval_node(*node.args[0], env);
    case ExprNode::Kind::Binary:
        return apply_binary(node.op, eval_node(*node.args[0], env), eval_node(*node.args[1], env));
    case ExprNode::Kind::Call: {
        double a[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < node.args.size(); ++i) a[i] = eval_node(*node.args[i], env);
        return apply_function(node.function, a);
    }
    }
    return 0.0;
}

} // namespace detail

/// Immutable parsed expression. Copies share the tree.
class Expression {
public:
    Expression() = default;
    Expression(ExprNodePtr root, std::string source) : root_(std::move(root)), source_(std::move(source)) {}

    const ExprNode& root() const { return *root_; }
    bool empty() const { return !root_; }
    const std::string& source() const { return source_; }

private:
    ExprNodePtr root_;
    std::string source_;
};

inline Expression parse_expression(std::string_view text) {
    return Expression(detail::Parser(text).parse(), std::string(text));
}

inline double evaluate(const Expression& e, const Environment& env) { return detail::eval_node(e.root(), env); }

inline std::set<std::string> free_variables(const Expression& e) {
    std::set<std::string> vars;
    detail::collect_variables(e.root(), vars);
    return vars;
}

/// Fully parenthesized text that re-parses to an equivalent tree.
inline std::string to_string(const Expression& e) {
    std::string out;
    detail::print(e.root(), out);
    return out;
}

/// Expression lowered to a postfix program over numbered slots.
///
/// Variable names are resolved once against a slot table, so evaluation in
/// the integrator's inner loop is a flat loop with no map lookups.
class CompiledExpression {
public:
    CompiledExpression() = default;

    CompiledExpression(const Expression& e, std::span<const std::string> slots) {
        std::size_t depth = 0;
        lower(e.root(), slots, depth);
    }

    double operator()(std::span<const double> slots) const {
        double stack[kMaxDepth];
        std::size_t top = 0;
        for (const auto& ins : code_) {
            switch (ins.op) {
            case Op::Const: stack[top++] = ins.value; break;
            case Op::Slot: stack[top++] = slots[ins.index]; break;
            case Op::Negate: stack[top - 1] = -stack[top - 1]; break;
            case Op::Binary:
                --top;
                stack[top - 1] = detail::apply_binary(ins.symbol, stack[top - 1], stack[top]);
                break;
            case Op::Call1: stack[top - 1] = detail::apply_function(ins.function, &stack[top - 1]); break;
            case Op::Call2:
                --top;
                stack[top - 1] = detail::apply_function(ins.function, &stack[top - 1]);
                break;
            }
        }
        return stack[0];
    }

private:
    static constexpr std::size_t kMaxDepth = 64;
    enum class Op { Const, Slot, Negate, Binary, Call1, Call2 };
    struct Instruction {
        Op op;
        double value = 0.0;
        std::size_t index = 0;
        char symbol = 0;
        Function function{};
    };
    std::vector<Instruction> code_;

    void push(std::size_t& depth) {
        if (++depth > kMaxDepth) throw EvalError("expression too deeply nested to compile");
    }

    void lower(const ExprNode& node, std::span<const std::string> slots, std::size_t& depth) {
        switch (node.kind) {
        case ExprNode::Kind::Number:
            push(depth);
            code_.push_back({Op::Const, node.value});
            return;
        case ExprNode::Kind::Variable: {
            for (std::size_t i = 0; i < slots.size(); ++i) {
                if (slots[i] == node.name) {
                    push(depth);
                    code_.push_back({Op::Slot, 0.0, i});
                    return;
                }
            }
            throw EvalError("unbound variable '" + node.name + "'");
        }
        case ExprNode::Kind::Negate:
            lower(*node.args[0], slots, depth);
            code_.push_back({Op::Negate});
            return;
        case ExprNode::Kind::Binary:
            lower(*node.args[0], slots, depth);
            lower(*node.args[1], slots, depth);
            code_.push_back({Op::Binary, 0.0, 0, node.op});
            --depth;
            return;
        case ExprNode::Kind::Call:
            for (const auto& a : node.args) lower(*a, slots, depth);
            code_.push_back({node.args.size() == 2 ? Op::Call2 : Op::Call1, 0.0, 0, 0, node.function});
            if (node.args.size() == 2) --depth;
            return;
        }
    }
};

} // namespace hgo

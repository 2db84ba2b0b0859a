#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l1bsde/error.hpp"
#include "l1bsde/moduli.hpp"

namespace l1bsde {

/// Variables visible to an expression.
struct ExprContext {
    double t = 0.0;
    double horizon = 1.0;
    double y = 0.0;
    std::span<const double> z;
    std::span<const double> state;
};

/**
 * Arithmetic expression over t, T, y, z, B.
 *
 *   expr    := term (('+' | '-') term)*
 *   term    := unary (('*' | '/') unary)*
 *   unary   := ('-' | '+') unary | power
 *   power   := primary ('^' unary)?
 *   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')' | '|' expr '|'
 *
 * Names: t, T, y, z = z1, z1..z9, B = b1, b1..b9, pi, e. `|z|` and `|B|`
 * are Euclidean norms; `|x|` of anything else is the absolute value.
 * Functions: abs sqrt cbrt exp log sin cos tan tanh pow min max pos neg
 * sgn if(c, a, b) [a when c > 0] h hbar.
 */
class Expression {
public:
    Expression() : source_("0") {
        auto n = std::make_unique<Node>();
        root_ = std::shared_ptr<const Node>(std::move(n));
    }

    static Expression parse(std::string_view text) {
        Parser p(text);
        auto root = p.parse_all();
        Expression e;
        e.source_ = std::string(text);
        e.root_ = std::shared_ptr<const Node>(std::move(root));
        return e;
    }

    static Expression constant(double v) {
        Expression e;
        auto n = std::make_unique<Node>();
        n->kind = Kind::number;
        n->value = v;
        e.root_ = std::shared_ptr<const Node>(std::move(n));
        e.source_ = format_number(v);
        return e;
    }

    double operator()(const ExprContext& ctx) const { return eval(*root_, ctx); }

    const std::string& source() const noexcept { return source_; }

    /// True when the expression reads the named variable family ("y", "z", "B", "t").
    bool uses(std::string_view family) const { return uses(*root_, family); }

    bool is_constant() const noexcept { return root_->kind == Kind::number; }

private:
    enum class Kind { number, var_t, var_horizon, var_y, var_z, var_state, norm_z, norm_state, neg, add, sub, mul, div, pow, call };
    enum class Fn { abs, sqrt, cbrt, exp, log, sin, cos, tan, tanh, pow, min, max, pos, neg, sgn, if_, h, hbar };

    struct Node {
        Kind kind = Kind::number;
        double value = 0.0;
        std::size_t index = 0;
        Fn fn = Fn::abs;
        std::vector<std::unique_ptr<Node>> kids;
    };

    static std::string format_number(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    class Parser {
    public:
        explicit Parser(std::string_view text) : text_(text) {}

        std::unique_ptr<Node> parse_all() {
            auto n = expr();
            skip_ws();
            if (pos_ != text_.size()) {
                throw ParseError(pos_, "unexpected '" + std::string(1, text_[pos_]) + "'");
            }
            return n;
        }

    private:
        std::string_view text_;
        std::size_t pos_ = 0;

        void skip_ws() {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
        }
        bool accept(char c) {
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }
        void expect(char c) {
            if (!accept(c)) {
                throw ParseError(pos_, std::string("expected '") + c + "'");
            }
        }

        static std::unique_ptr<Node> make(Kind k, std::unique_ptr<Node> a = nullptr, std::unique_ptr<Node> b = nullptr) {
            auto n = std::make_unique<Node>();
            n->kind = k;
            if (a) {
                n->kids.push_back(std::move(a));
            }
            if (b) {
                n->kids.push_back(std::move(b));
            }
            return n;
        }

        std::unique_ptr<Node> expr() {
            auto lhs = term();
            for (;;) {
                if (accept('+')) {
                    lhs = make(Kind::add, std::move(lhs), term());
                } else if (accept('-')) {
                    lhs = make(Kind::sub, std::move(lhs), term());
                } else {
                    return lhs;
                }
            }
        }

        std::unique_ptr<Node> term() {
            auto lhs = unary();
            for (;;) {
                if (accept('*')) {
                    lhs = make(Kind::mul, std::move(lhs), unary());
                } else if (accept('/')) {
                    lhs = make(Kind::div, std::move(lhs), unary());
                } else {
                    return lhs;
                }
            }
        }

        std::unique_ptr<Node> unary() {
            if (accept('-')) {
                return make(Kind::neg, unary());
            }
            if (accept('+')) {
                return unary();
            }
            return power();
        }

        std::unique_ptr<Node> power() {
            auto base = primary();
            if (accept('^')) {
                return make(Kind::pow, std::move(base), unary());
            }
            return base;
        }

        std::unique_ptr<Node> primary() {
            skip_ws();
            if (pos_ >= text_.size()) {
                throw ParseError(pos_, "unexpected end of expression");
            }
            const char c = text_[pos_];
            if (c == '(') {
                ++pos_;
                auto inner = expr();
                expect(')');
                return inner;
            }
            if (c == '|') {
                ++pos_;
                auto inner = expr();
                expect('|');
                if (inner->kind == Kind::var_z && inner->value == 1.0) {
                    return make(Kind::norm_z);
                }
                if (inner->kind == Kind::var_state && inner->value == 1.0) {
                    return make(Kind::norm_state);
                }
                auto call = make(Kind::call, std::move(inner));
                call->fn = Fn::abs;
                return call;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                return number();
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                return name();
            }
            throw ParseError(pos_, "unexpected '" + std::string(1, c) + "'");
        }

        std::unique_ptr<Node> number() {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
                ++pos_;
            }
            if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
                std::size_t look = pos_ + 1;
                if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) {
                    ++look;
                }
                if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                    pos_ = look;
                    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                        ++pos_;
                    }
                }
            }
            const std::string lexeme(text_.substr(start, pos_ - start));
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(lexeme, &used);
            } catch (const std::exception&) {
                throw ParseError(start, "malformed number '" + lexeme + "'");
            }
            if (used != lexeme.size()) {
                throw ParseError(start, "malformed number '" + lexeme + "'");
            }
            auto n = make(Kind::number);
            n->value = v;
            return n;
        }

        std::unique_ptr<Node> name() {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string id(text_.substr(start, pos_ - start));
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '(') {
                return call(id, start);
            }
            // value == 1.0 marks a bare (unindexed) vector name so |z| can become a norm.
            auto var = [&](Kind k, std::size_t index, bool bare) {
                auto n = make(k);
                n->index = index;
                n->value = bare ? 1.0 : 0.0;
                return n;
            };
            if (id == "t") return make(Kind::var_t);
            if (id == "T") return make(Kind::var_horizon);
            if (id == "y") return make(Kind::var_y);
            if (id == "z") return var(Kind::var_z, 0, true);
            if (id == "B") return var(Kind::var_state, 0, true);
            if (id == "pi") {
                auto n = make(Kind::number);
                n->value = 3.141592653589793;
                return n;
            }
            if (id == "e") {
                auto n = make(Kind::number);
                n->value = 2.718281828459045;
                return n;
            }
            if (id.size() == 2 && (id[0] == 'z' || id[0] == 'b') && id[1] >= '1' && id[1] <= '9') {
                return var(id[0] == 'z' ? Kind::var_z : Kind::var_state, static_cast<std::size_t>(id[1] - '1'), false);
            }
            if (id == "znorm") return make(Kind::norm_z);
            if (id == "Bnorm") return make(Kind::norm_state);
            throw ParseError(start, "unknown name '" + id + "'");
        }

        std::unique_ptr<Node> call(const std::string& id, std::size_t start) {
            struct Entry { const char* name; Fn fn; std::size_t arity; };
            static const Entry table[] = {
                {"abs", Fn::abs, 1},   {"sqrt", Fn::sqrt, 1}, {"cbrt", Fn::cbrt, 1}, {"exp", Fn::exp, 1},
                {"log", Fn::log, 1},   {"sin", Fn::sin, 1},   {"cos", Fn::cos, 1},   {"tan", Fn::tan, 1},
                {"tanh", Fn::tanh, 1}, {"pow", Fn::pow, 2},   {"min", Fn::min, 2},   {"max", Fn::max, 2},
                {"pos", Fn::pos, 1},   {"neg", Fn::neg, 1},   {"sgn", Fn::sgn, 1},   {"if", Fn::if_, 3},
                {"h", Fn::h, 1},       {"hbar", Fn::hbar, 1},
            };
            const Entry* entry = nullptr;
            for (const auto& e : table) {
                if (id == e.name) {
                    entry = &e;
                }
            }
            if (entry == nullptr) {
                throw ParseError(start, "unknown function '" + id + "'");
            }
            expect('(');
            auto n = make(Kind::call);
            n->fn = entry->fn;
            n->kids.push_back(expr());
            while (accept(',')) {
                n->kids.push_back(expr());
            }
            expect(')');
            if (n->kids.size() != entry->arity) {
                throw ParseError(start, "function '" + id + "' takes " + std::to_string(entry->arity) + " argument(s)");
            }
            return n;
        }
    };

    static double vec_at(std::span<const double> v, std::size_t i) { return i < v.size() ? v[i] : 0.0; }

    static double norm(std::span<const double> v) {
        double s = 0.0;
        for (double x : v) {
            s += x * x;
        }
        return std::sqrt(s);
    }

    static double eval(const Node& n, const ExprContext& ctx) {
        switch (n.kind) {
        case Kind::number: return n.value;
        case Kind::var_t: return ctx.t;
        case Kind::var_horizon: return ctx.horizon;
        case Kind::var_y: return ctx.y;
        case Kind::var_z: return vec_at(ctx.z, n.index);
        case Kind::var_state: return vec_at(ctx.state, n.index);
        case Kind::norm_z: return norm(ctx.z);
        case Kind::norm_state: return norm(ctx.state);
        case Kind::neg: return -eval(*n.kids[0], ctx);
        case Kind::add: return eval(*n.kids[0], ctx) + eval(*n.kids[1], ctx);
        case Kind::sub: return eval(*n.kids[0], ctx) - eval(*n.kids[1], ctx);
        case Kind::mul: return eval(*n.kids[0], ctx) * eval(*n.kids[1], ctx);
        case Kind::div: return eval(*n.kids[0], ctx) / eval(*n.kids[1], ctx);
        case Kind::pow: return std::pow(eval(*n.kids[0], ctx), eval(*n.kids[1], ctx));
        case Kind::call: return eval_call(n, ctx);
        }
        return 0.0;
    }

    static double eval_call(const Node& n, const ExprContext& ctx) {
        if (n.fn == Fn::if_) {
            return eval(*n.kids[0], ctx) > 0.0 ? eval(*n.kids[1], ctx) : eval(*n.kids[2], ctx);
        }
        const double a = eval(*n.kids[0], ctx);
        switch (n.fn) {
        case Fn::abs: return std::fabs(a);
        case Fn::sqrt: return std::sqrt(a);
        case Fn::cbrt: return std::cbrt(a);
        case Fn::exp: return std::exp(a);
        case Fn::log: return std::log(a);
        case Fn::sin: return std::sin(a);
        case Fn::cos: return std::cos(a);
        case Fn::tan: return std::tan(a);
        case Fn::tanh: return std::tanh(a);
        case Fn::pow: return std::pow(a, eval(*n.kids[1], ctx));
        case Fn::min: return std::fmin(a, eval(*n.kids[1], ctx));
        case Fn::max: return std::fmax(a, eval(*n.kids[1], ctx));
        case Fn::pos: return a > 0.0 ? a : 0.0;
        case Fn::neg: return a < 0.0 ? -a : 0.0;
        case Fn::sgn: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
        case Fn::h: return moduli::h(a);
        case Fn::hbar: return moduli::hbar(a);
        case Fn::if_: break;
        }
        return 0.0;
    }

    static bool uses(const Node& n, std::string_view family) {
        const bool hit = (family == "t" && n.kind == Kind::var_t) || (family == "y" && n.kind == Kind::var_y) ||
                         (family == "z" && (n.kind == Kind::var_z || n.kind == Kind::norm_z)) ||
                         (family == "B" && (n.kind == Kind::var_state || n.kind == Kind::norm_state));
        if (hit) {
            return true;
        }
        for (const auto& k : n.kids) {
            if (uses(*k, family)) {
                return true;
            }
        }
        return false;
    }

    std::string source_;
    std::shared_ptr<const Node> root_;
};

} // namespace l1bsde

#pragma once

#include "core.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hho {

// Arithmetic expressions over x, y, z and the load factor t.
// Grammar: + - * / ^, parentheses, unary minus, numbers, pi, and
// sin cos tan exp log sqrt abs (one argument), min max pow atan2 (two).
class Expression {
public:
    Expression() : Expression(0.0) {}
    explicit Expression(double constant)
        : source_(std::to_string(constant)), fn_([constant](const double*) { return constant; })
    {
    }

    static Expression parse(const std::string& text)
    {
        Parser p{text, 0};
        Expression e;
        e.source_ = text;
        e.fn_ = p.parse_all();
        return e;
    }

    double operator()(const Point& x, double t = 0.0) const
    {
        const double v[4] = {x.x(), x.y(), x.z(), t};
        return fn_(v);
    }

    const std::string& source() const { return source_; }

private:
    using Fn = std::function<double(const double*)>;

    struct Parser {
        const std::string& s;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& msg) const
        {
            throw ParseError("expression '" + s + "': " + msg + " at column " + std::to_string(pos + 1), 0);
        }

        void skip()
        {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
                ++pos;
        }

        bool eat(char c)
        {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        Fn parse_all()
        {
            Fn f = expr();
            skip();
            if (pos != s.size())
                fail("unexpected character '" + std::string(1, s[pos]) + "'");
            return f;
        }

        Fn expr()
        {
            Fn lhs = term();
            while (true) {
                if (eat('+')) {
                    Fn r = term();
                    lhs = [lhs, r](const double* v) { return lhs(v) + r(v); };
                } else if (eat('-')) {
                    Fn r = term();
                    lhs = [lhs, r](const double* v) { return lhs(v) - r(v); };
                } else {
                    return lhs;
                }
            }
        }

        Fn term()
        {
            Fn lhs = unary();
            while (true) {
                if (eat('*')) {
                    Fn r = unary();
                    lhs = [lhs, r](const double* v) { return lhs(v) * r(v); };
                } else if (eat('/')) {
                    Fn r = unary();
                    lhs = [lhs, r](const double* v) { return lhs(v) / r(v); };
                } else {
                    return lhs;
                }
            }
        }

        Fn unary()
        {
            if (eat('-')) {
                Fn f = unary();
                return [f](const double* v) { return -f(v); };
            }
            if (eat('+'))
                return unary();
            return power();
        }

        // Right-associative; binds tighter than unary minus on its left.
        Fn power()
        {
            Fn base = primary();
            if (eat('^')) {
                Fn ex = unary();
                return [base, ex](const double* v) { return std::pow(base(v), ex(v)); };
            }
            return base;
        }

        Fn primary()
        {
            skip();
            if (pos >= s.size())
                fail("unexpected end of expression");
            if (eat('(')) {
                Fn f = expr();
                if (!eat(')'))
                    fail("expected ')'");
                return f;
            }
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                double val = 0.0;
                try {
                    val = std::stod(s.substr(pos), &used);
                } catch (...) {
                    fail("malformed number");
                }
                pos += used;
                return [val](const double*) { return val; };
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                const std::size_t start = pos;
                while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                    ++pos;
                const std::string id = s.substr(start, pos - start);
                if (eat('('))
                    return call(id);
                if (id == "x")
                    return [](const double* v) { return v[0]; };
                if (id == "y")
                    return [](const double* v) { return v[1]; };
                if (id == "z")
                    return [](const double* v) { return v[2]; };
                if (id == "t")
                    return [](const double* v) { return v[3]; };
                if (id == "pi")
                    return [](const double*) { return pi; };
                pos = start;
                fail("unknown identifier '" + id + "'");
            }
            fail("unexpected character '" + std::string(1, c) + "'");
        }

        Fn call(const std::string& name)
        {
            std::vector<Fn> args;
            if (!eat(')')) {
                do {
                    args.push_back(expr());
                } while (eat(','));
                if (!eat(')'))
                    fail("expected ')' after arguments");
            }
            auto unary_fn = [&](double (*f)(double)) -> Fn {
                if (args.size() != 1)
                    fail(name + " takes one argument");
                Fn a = args[0];
                return [a, f](const double* v) { return f(a(v)); };
            };
            auto binary_fn = [&](double (*f)(double, double)) -> Fn {
                if (args.size() != 2)
                    fail(name + " takes two arguments");
                Fn a = args[0], b = args[1];
                return [a, b, f](const double* v) { return f(a(v), b(v)); };
            };
            if (name == "sin")
                return unary_fn([](double a) { return std::sin(a); });
            if (name == "cos")
                return unary_fn([](double a) { return std::cos(a); });
            if (name == "tan")
                return unary_fn([](double a) { return std::tan(a); });
            if (name == "exp")
                return unary_fn([](double a) { return std::exp(a); });
            if (name == "log")
                return unary_fn([](double a) { return std::log(a); });
            if (name == "sqrt")
                return unary_fn([](double a) { return std::sqrt(a); });
            if (name == "abs")
                return unary_fn([](double a) { return std::abs(a); });
            if (name == "min")
                return binary_fn([](double a, double b) { return std::min(a, b); });
            if (name == "max")
                return binary_fn([](double a, double b) { return std::max(a, b); });
            if (name == "pow")
                return binary_fn([](double a, double b) { return std::pow(a, b); });
            if (name == "atan2")
                return binary_fn([](double a, double b) { return std::atan2(a, b); });
            fail("unknown function '" + name + "'");
        }
    };

    std::string source_;
    Fn fn_;
};

} // namespace hho

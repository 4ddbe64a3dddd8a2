#include "pathhjb/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "pathhjb/error.hpp"

namespace pathhjb {

class ExprParser {
public:
    ExprParser(std::string_view text, const ExprSymbols& symbols, Expression& out)
        : text_(text), sym_(symbols), out_(out) {}

    int parse() {
        const int root = expr();
        skip_space();
        if (pos_ != text_.size()) {
            fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        }
        return root;
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& what) const {
        throw InvalidArgument("expression \"" + std::string(text_) + "\" at column " + std::to_string(pos_ + 1) +
                              ": " + what);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            fail(std::string("expected '") + c + "'");
        }
    }

    int add(Op op, double value = 0.0, std::size_t index = 0, int lhs = -1, int rhs = -1) {
        out_.nodes_.push_back({op, value, index, lhs, rhs});
        return static_cast<int>(out_.nodes_.size() - 1);
    }

    int expr() {
        int left = term();
        while (true) {
            if (accept('+')) {
                left = add(Op::add, 0.0, 0, left, term());
            } else if (accept('-')) {
                left = add(Op::sub, 0.0, 0, left, term());
            } else {
                return left;
            }
        }
    }

    int term() {
        int left = unary();
        while (accept('*')) {
            left = add(Op::mul, 0.0, 0, left, unary());
        }
        return left;
    }

    int unary() {
        if (accept('-')) {
            return add(Op::neg, 0.0, 0, unary());
        }
        return primary();
    }

    std::size_t index_suffix(std::size_t bound, const std::string& name) {
        std::size_t idx = 0;
        if (accept('[')) {
            skip_space();
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
            if (start == pos_) {
                fail("expected an index");
            }
            idx = std::stoul(std::string(text_.substr(start, pos_ - start)));
            expect(']');
        }
        if (idx >= bound) {
            fail("index " + std::to_string(idx) + " out of range for '" + name + "'");
        }
        return idx;
    }

    int primary() {
        skip_space();
        if (pos_ >= text_.size()) {
            fail("unexpected end of expression");
        }
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(text_.substr(pos_));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str() || !std::isfinite(v)) {
                fail("malformed number");
            }
            pos_ += static_cast<std::size_t>(end - rest.c_str());
            return add(Op::constant, v);
        }
        if (accept('(')) {
            const int inner = expr();
            expect(')');
            return inner;
        }
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            fail("unexpected '" + std::string(1, c) + "'");
        }
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string name(text_.substr(start, pos_ - start));
        if (name == "min" || name == "max") {
            expect('(');
            const int a = expr();
            expect(',');
            const int b = expr();
            expect(')');
            return add(name == "min" ? Op::min : Op::max, 0.0, 0, a, b);
        }
        if (name == "x") return add(Op::x, 0.0, index_suffix(sym_.state_dim, name));
        if (name == "int") return add(Op::integral, 0.0, index_suffix(sym_.path_dim, name));
        if (name == "pmax") return add(Op::pmax, 0.0, index_suffix(sym_.path_dim, name));
        if (name == "pmin") return add(Op::pmin, 0.0, index_suffix(sym_.path_dim, name));
        if (name == "t") return add(Op::time);
        if (name == "w") {
            if (!sym_.lifted) fail("'w' is only available in lifted problems");
            return add(Op::w, 0.0, index_suffix(sym_.path_dim, name));
        }
        if (name == "u") {
            if (sym_.control_dim == 0) fail("'u' is not available here");
            return add(Op::u, 0.0, index_suffix(sym_.control_dim, name));
        }
        if (name == "y") {
            if (!sym_.allow_y) fail("'y' is only available in the driver");
            return add(Op::y);
        }
        if (name == "z") {
            if (sym_.z_dim == 0) fail("'z' is only available in the driver");
            return add(Op::z, 0.0, index_suffix(sym_.z_dim, name));
        }
        pos_ = start;
        fail("unknown symbol '" + name + "'");
    }

    std::string_view text_;
    const ExprSymbols& sym_;
    Expression& out_;
    std::size_t pos_ = 0;
};

Expression Expression::parse(std::string_view text, const ExprSymbols& symbols) {
    Expression out;
    out.text_ = std::string(text);
    ExprParser parser(text, symbols, out);
    out.root_ = parser.parse();
    return out;
}

bool Expression::is_constant() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const Node& n) {
        return n.op == Op::constant || n.op == Op::add || n.op == Op::sub || n.op == Op::mul || n.op == Op::neg ||
               n.op == Op::min || n.op == Op::max;
    });
}

double Expression::eval(const ExprInput& in) const { return eval_node(root_, in); }

double Expression::eval_node(int id, const ExprInput& in) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const PathView& p = in.path;
    switch (n.op) {
        case Op::constant: return n.value;
        case Op::x: return in.state[n.index];
        case Op::w: return p.endpoint(n.index);
        case Op::integral: {
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < p.node_count(); ++i) {
                acc += p(i, n.index);
            }
            return acc * p.step();
        }
        case Op::pmax: {
            double v = p(0, n.index);
            for (std::size_t i = 1; i < p.node_count(); ++i) v = std::max(v, p(i, n.index));
            return v;
        }
        case Op::pmin: {
            double v = p(0, n.index);
            for (std::size_t i = 1; i < p.node_count(); ++i) v = std::min(v, p(i, n.index));
            return v;
        }
        case Op::time: return p.final_time();
        case Op::u: return in.u[n.index];
        case Op::y: return in.y;
        case Op::z: return in.z[n.index];
        case Op::add: return eval_node(n.lhs, in) + eval_node(n.rhs, in);
        case Op::sub: return eval_node(n.lhs, in) - eval_node(n.rhs, in);
        case Op::mul: return eval_node(n.lhs, in) * eval_node(n.rhs, in);
        case Op::neg: return -eval_node(n.lhs, in);
        case Op::min: return std::min(eval_node(n.lhs, in), eval_node(n.rhs, in));
        case Op::max: return std::max(eval_node(n.lhs, in), eval_node(n.rhs, in));
    }
    return 0.0;
}

}  // namespace pathhjb

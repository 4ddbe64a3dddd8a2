#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathhjb/path.hpp"

namespace pathhjb {

// Small arithmetic language for coefficient configs.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary ('*' unary)*
//   unary   := '-' unary | primary
//   primary := number | symbol ['[' index ']'] | ('min' | 'max') '(' expr ',' expr ')' | '(' expr ')'
//
// Symbols: x (state endpoint), int (left-Riemann running integral), pmax,
// pmin (running extrema), t (time), u (control), y, z (driver arguments) and,
// for lifted problems, w (endpoint of the driving path; int/pmax/pmin then
// refer to the driving path). An omitted index means component 0.
struct ExprSymbols {
    std::size_t state_dim = 1;
    std::size_t path_dim = 1;  // dimension of the path the running features read
    std::size_t control_dim = 0;
    std::size_t z_dim = 0;
    bool allow_y = false;
    bool lifted = false;
};

struct ExprInput {
    PathView path;                  // source of int/pmax/pmin/t (and w when lifted)
    std::span<const double> state;  // x
    std::span<const double> u;
    double y = 0.0;
    std::span<const double> z;
};

class Expression {
public:
    static Expression parse(std::string_view text, const ExprSymbols& symbols);

    double eval(const ExprInput& in) const;
    const std::string& text() const { return text_; }
    // True when the expression reads no input at all.
    bool is_constant() const;

private:
    enum class Op { constant, x, w, integral, pmax, pmin, time, u, y, z, add, sub, mul, neg, min, max };
    struct Node {
        Op op = Op::constant;
        double value = 0.0;
        std::size_t index = 0;
        int lhs = -1;
        int rhs = -1;
    };
    friend class ExprParser;

    double eval_node(int id, const ExprInput& in) const;

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;
};

}  // namespace pathhjb

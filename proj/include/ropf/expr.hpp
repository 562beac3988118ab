#pragma once

#include <vector>

#include "ropf/types.hpp"

namespace ropf {

/// Sparse quadratic expression c + a'x + sum coeff * x_i * x_j.
struct QuadExpr {
    struct LinTerm {
        int var;
        Real coeff;
    };
    struct QuadTerm {
        int var_a;
        int var_b;
        Real coeff;
    };

    Real constant = 0.0;
    std::vector<LinTerm> linear;
    std::vector<QuadTerm> quadratic;

    void add_constant(Real c) { constant += c; }
    void add_linear(int var, Real coeff) { linear.push_back({var, coeff}); }
    void add_quadratic(int var_a, int var_b, Real coeff) {
        quadratic.push_back({var_a, var_b, coeff});
    }
    /// |z|^2 of a complex pair stored in (re, im) variables.
    void add_square_pair(int var_re, int var_im, Real coeff) {
        add_quadratic(var_re, var_re, coeff);
        add_quadratic(var_im, var_im, coeff);
    }

    Real value(const Vec& x) const;
    void accumulate_gradient(const Vec& x, Real scale, Vec& grad) const;
    /// Nonzero gradient entries (unmerged duplicates allowed by callers).
    std::vector<std::pair<int, Real>> sparse_gradient(const Vec& x) const;
    /// Adds scale * (constant Hessian of the quadratic part).
    void accumulate_hessian(Real scale, Mat& h) const;
};

/// Scalar function base(x) + sum coeff_k * inner_k(x)^2: quadratics plus
/// squares of quadratics, which covers every constraint and objective of
/// the current-voltage rectangular formulation (the squared bilinear
/// ripple magnitude is the quartic case).
struct ScalarFunc {
    QuadExpr base;
    struct Square {
        Real coeff;
        QuadExpr inner;
    };
    std::vector<Square> squares;

    Real value(const Vec& x) const;
    void accumulate_gradient(const Vec& x, Real scale, Vec& grad) const;
    /// Adds scale * exact Hessian at x (squares contribute
    /// 2c (grad grad' + value * inner Hessian)).
    void accumulate_hessian(const Vec& x, Real scale, Mat& h) const;
    /// Sorted unique variable indices the function touches.
    std::vector<int> variables() const;
};

}  // namespace ropf

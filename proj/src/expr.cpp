#include "ropf/expr.hpp"

#include <algorithm>

namespace ropf {

Real QuadExpr::value(const Vec& x) const {
    Real v = constant;
    for (const auto& t : linear) v += t.coeff * x(t.var);
    for (const auto& t : quadratic) v += t.coeff * x(t.var_a) * x(t.var_b);
    return v;
}

void QuadExpr::accumulate_gradient(const Vec& x, Real scale, Vec& grad) const {
    for (const auto& t : linear) grad(t.var) += scale * t.coeff;
    for (const auto& t : quadratic) {
        grad(t.var_a) += scale * t.coeff * x(t.var_b);
        grad(t.var_b) += scale * t.coeff * x(t.var_a);
    }
}

std::vector<std::pair<int, Real>> QuadExpr::sparse_gradient(const Vec& x) const {
    std::vector<std::pair<int, Real>> g;
    g.reserve(linear.size() + 2 * quadratic.size());
    for (const auto& t : linear) g.emplace_back(t.var, t.coeff);
    for (const auto& t : quadratic) {
        g.emplace_back(t.var_a, t.coeff * x(t.var_b));
        g.emplace_back(t.var_b, t.coeff * x(t.var_a));
    }
    return g;
}

void QuadExpr::accumulate_hessian(Real scale, Mat& h) const {
    for (const auto& t : quadratic) {
        h(t.var_a, t.var_b) += scale * t.coeff;
        h(t.var_b, t.var_a) += scale * t.coeff;
    }
}

Real ScalarFunc::value(const Vec& x) const {
    Real v = base.value(x);
    for (const auto& sq : squares) {
        const Real inner = sq.inner.value(x);
        v += sq.coeff * inner * inner;
    }
    return v;
}

void ScalarFunc::accumulate_gradient(const Vec& x, Real scale, Vec& grad) const {
    base.accumulate_gradient(x, scale, grad);
    for (const auto& sq : squares) {
        const Real inner = sq.inner.value(x);
        sq.inner.accumulate_gradient(x, scale * 2.0 * sq.coeff * inner, grad);
    }
}

void ScalarFunc::accumulate_hessian(const Vec& x, Real scale, Mat& h) const {
    base.accumulate_hessian(scale, h);
    for (const auto& sq : squares) {
        const Real inner = sq.inner.value(x);
        sq.inner.accumulate_hessian(scale * 2.0 * sq.coeff * inner, h);
        const auto grad = sq.inner.sparse_gradient(x);
        const Real w = scale * 2.0 * sq.coeff;
        for (const auto& [i, gi] : grad) {
            for (const auto& [j, gj] : grad) {
                h(i, j) += w * gi * gj;
            }
        }
    }
}

std::vector<int> ScalarFunc::variables() const {
    std::vector<int> vars;
    auto collect = [&vars](const QuadExpr& e) {
        for (const auto& t : e.linear) vars.push_back(t.var);
        for (const auto& t : e.quadratic) {
            vars.push_back(t.var_a);
            vars.push_back(t.var_b);
        }
    };
    collect(base);
    for (const auto& sq : squares) collect(sq.inner);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

}  // namespace ropf

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ropf/expr.hpp"
#include "ropf/types.hpp"

namespace ropf {

/// Smooth nonlinear program  min f(x)  s.t.  c_E(x) = 0, c_I(x) <= 0,
/// assembled from polynomial scalar functions. Gradients are exact.
struct Nlp {
    int n = 0;
    ScalarFunc objective;
    std::vector<ScalarFunc> equalities;
    std::vector<ScalarFunc> inequalities;
    /// Per-variable scaling applied inside the solver (physical value =
    /// scale * internal value). Empty means unscaled.
    Vec variable_scale;
    /// Optional row scalings; empty means unscaled rows.
    Vec equality_scale;
    Vec inequality_scale;

    Real objective_value(const Vec& x) const { return objective.value(x); }
    Vec equality_values(const Vec& x) const;
    Vec inequality_values(const Vec& x) const;
};

enum class NlpStatus { LocalOptimum, MaxIterations, InfeasibleDetected, Breakdown };

struct NlpOptions {
    Real tol = 1e-9;              // scaled KKT error target
    Real constraint_tol = 1e-10;  // scaled feasibility target
    Real mu_init = 1.0;
    int max_iterations = 400;
    /// Damped BFGS approximation instead of the exact polynomial
    /// Lagrangian Hessian.
    bool use_bfgs = false;
    bool verbose = false;
};

struct NlpResult {
    Vec x;                    // physical (unscaled) variables
    Vec eq_multipliers;
    Vec ineq_multipliers;
    NlpStatus status = NlpStatus::Breakdown;
    int iterations = 0;
    Real objective = 0.0;
    Real eq_inf = 0.0;          // scaled equality residual
    Real ineq_violation = 0.0;  // scaled inequality violation
    Real stationarity = 0.0;    // scaled dual residual
    std::string message;
};

/// Primal-dual interior-point solve with a damped BFGS approximation of
/// the Lagrangian Hessian, an l1 merit line search, and a least-squares
/// feasibility restoration fallback. x0 is in physical units.
NlpResult solve_nlp(const Nlp& problem, const Vec& x0, const NlpOptions& options = {});

/// Max relative error between analytic gradients and central finite
/// differences of the scaled problem along random directions.
Real derivative_check(const Nlp& problem, const Vec& x_physical, unsigned seed, int directions = 8,
                      Real step = 1e-6);

}  // namespace ropf

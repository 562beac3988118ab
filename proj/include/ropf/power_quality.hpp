#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ropf/types.hpp"

namespace ropf {

/// Piecewise induction-motor derating curve: full rating below the lower
/// knee, 100 - g(v) between the knees, zero at and above the upper knee,
/// with g(v) = a2 v^2 + a1 v + a0 (v in pu, results in percent).
struct DeratingCurve {
    Real a0 = 0.033125;  // %
    Real a1 = 2.75;      // %/pu
    Real a2 = 56.25;     // %/pu^2
    Real lower_knee = 0.01;  // pu
    Real upper_knee = 0.05;  // pu

    Real g(Real v_neg_pu) const { return (a2 * v_neg_pu + a1) * v_neg_pu + a0; }
};

struct InductionMachine {
    std::string bus;
    Real rating_kva = 0.0;
    Real active_power_kw = 0.0;
    Real power_factor = 1.0;  // lagging
};

/// Usable fraction of the machine rating in percent (piecewise form).
Real derating_factor(const DeratingCurve& curve, Real v_neg_pu);

/// Smooth optimization surrogate for the rating shortfall (100 - D):
/// the quadratic g extended across both knees and clipped to [0, 100].
Real derating_shortfall_smooth(const DeratingCurve& curve, Real v_neg_pu);

/// weight * sum_b S_b * (100 - D_b(v_neg_b)). Throws std::out_of_range when
/// a machine's bus has no unbalance entry.
Real derating_cost(const std::vector<InductionMachine>& machines,
                   const std::map<std::string, Real>& v_neg_pu_by_bus, Real weight,
                   const DeratingCurve& curve);

/// Negative-sequence magnitude of a per-unit voltage triple checked
/// against the unbalance limit.
struct VnegCheck {
    Real v_neg_pu = 0.0;
    /// Set iff v_neg_pu exceeded the limit; value is the excess in pu.
    std::optional<Real> violation_pu;
};

VnegCheck check_vneg_limit(const PhaseTriple& v_pu, Real limit_pu);

}  // namespace ropf

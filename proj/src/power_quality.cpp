#include "ropf/power_quality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ropf/sequence.hpp"

namespace ropf {

Real derating_factor(const DeratingCurve& curve, Real v_neg_pu) {
    if (v_neg_pu < curve.lower_knee) return 100.0;
    if (v_neg_pu < curve.upper_knee) return 100.0 - curve.g(v_neg_pu);
    return 0.0;
}

Real derating_shortfall_smooth(const DeratingCurve& curve, Real v_neg_pu) {
    return std::clamp(curve.g(v_neg_pu), 0.0, 100.0);
}

Real derating_cost(const std::vector<InductionMachine>& machines,
                   const std::map<std::string, Real>& v_neg_pu_by_bus, Real weight,
                   const DeratingCurve& curve) {
    Real cost = 0.0;
    for (const auto& m : machines) {
        auto it = v_neg_pu_by_bus.find(m.bus);
        if (it == v_neg_pu_by_bus.end()) {
            throw std::out_of_range("no voltage unbalance entry for bus " + m.bus);
        }
        cost += m.rating_kva * (100.0 - derating_factor(curve, it->second));
    }
    return weight * cost;
}

VnegCheck check_vneg_limit(const PhaseTriple& v_pu, Real limit_pu) {
    VnegCheck out;
    out.v_neg_pu = std::abs(to_sequence(v_pu).negative);
    if (out.v_neg_pu > limit_pu) out.violation_pu = out.v_neg_pu - limit_pu;
    return out;
}

}  // namespace ropf

#include "ropf/vsc.hpp"

#include <cmath>
#include <stdexcept>

#include "ropf/sequence.hpp"

namespace ropf {

namespace {

void require_lengths(const VscOperatingPoint& op) {
    if (op.terminal_voltages_v.size() != op.leg_currents_a.size()) {
        throw std::invalid_argument("operating point voltage/current lengths differ");
    }
}

}  // namespace

Real dc_power(const VscOperatingPoint& op) {
    require_lengths(op);
    Real p = 0.0;
    for (std::size_t j = 0; j < op.leg_currents_a.size(); ++j) {
        p += std::real(op.terminal_voltages_v[j] * std::conj(op.leg_currents_a[j]));
    }
    return p;
}

Phasor ripple_phasor(const VscOperatingPoint& op) {
    require_lengths(op);
    Phasor sum{0.0, 0.0};
    for (std::size_t j = 0; j < op.leg_currents_a.size(); ++j) {
        sum += op.terminal_voltages_v[j] * op.leg_currents_a[j];
    }
    return sum;
}

std::vector<Violation> check_constraints(const VscSpec& spec, const VscOperatingPoint& op,
                                         Real tol_balance_a, Real tol_ripple_w) {
    std::vector<Violation> out;
    if (op.leg_currents_a.size() != spec.legs.size()) {
        out.push_back({"leg_count_mismatch",
                       static_cast<Real>(op.leg_currents_a.size()) -
                           static_cast<Real>(spec.legs.size())});
        return out;
    }
    for (std::size_t j = 0; j < spec.legs.size(); ++j) {
        const Real mag = std::abs(op.leg_currents_a[j]);
        if (mag > spec.legs[j].i_max_a) {
            out.push_back({"leg_ampacity:" + spec.legs[j].id, mag - spec.legs[j].i_max_a});
        }
    }
    Phasor balance{0.0, 0.0};
    for (const auto& i : op.leg_currents_a) balance += i;
    if (std::abs(balance) > tol_balance_a) {
        out.push_back({"current_balance", std::abs(balance)});
    }
    if (spec.dc_link.ripple_limit_w) {
        const Real ripple = std::abs(ripple_phasor(op));
        const Real limit = *spec.dc_link.ripple_limit_w;
        if (ripple > limit + tol_ripple_w) {
            out.push_back({"ripple_limit", ripple - limit});
        }
    }
    return out;
}

CapacitorRipple capacitor_ripple(const DcLinkSpec& spec, Real ripple_magnitude_w,
                                 Real omega_rad_s) {
    if (spec.capacitance_f <= 0.0) throw std::invalid_argument("capacitance must be positive");
    if (spec.vdc_nominal_v <= 0.0) throw std::invalid_argument("vdc_nominal must be positive");
    if (ripple_magnitude_w < 0.0) throw std::invalid_argument("ripple magnitude must be >= 0");
    CapacitorRipple r;
    r.i_ripple_a = ripple_magnitude_w / spec.vdc_nominal_v;
    r.v_ripple_v = r.i_ripple_a / (2.0 * omega_rad_s * spec.capacitance_f);
    return r;
}

Real capacitor_losses(const DcLinkSpec& spec, Real ripple_magnitude_w) {
    if (spec.capacitance_f <= 0.0) throw std::invalid_argument("capacitance must be positive");
    if (ripple_magnitude_w < 0.0) throw std::invalid_argument("ripple magnitude must be >= 0");
    const Real esr = spec.esr_coefficient / spec.capacitance_f;
    const Real i_amp = ripple_magnitude_w / spec.vdc_nominal_v;
    return esr * i_amp * i_amp / 2.0;  // RMS^2 of the sinusoidal ripple current
}

std::vector<Phasor> gamma_locus(Real gamma, Real i_mag_a, const Phasor& v_positive) {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0,1]");
    if (i_mag_a < 0.0) throw std::invalid_argument("current magnitude must be >= 0");
    Phasor unit{1.0, 0.0};
    if (std::abs(v_positive) > 0.0) unit = v_positive / std::abs(v_positive);

    const Mat3c& basis = fortescue_basis();
    std::vector<Phasor> currents(4);
    Phasor sum{0.0, 0.0};
    for (int j = 0; j < 3; ++j) {
        currents[j] = (gamma * basis(j, 2) + (1.0 - gamma) * basis(j, 0)) * i_mag_a * unit;
        sum += currents[j];
    }
    currents[3] = -sum;
    return currents;
}

}  // namespace ropf

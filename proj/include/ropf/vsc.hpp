#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ropf/types.hpp"

namespace ropf {

/// One half-bridge leg of a VSC and the bus conductor it connects to.
/// i_max_a == 0 encodes an absent leg (e.g. the neutral of a three-wire
/// converter); an unset limit means the leg is not ampacity-constrained.
struct LegSpec {
    std::string id;
    std::string bus;
    Conductor conductor = Conductor::A;
    Real i_max_a = std::numeric_limits<Real>::infinity();
};

/// Either a fixed dc source power or a box the optimizer may use.
struct DcSourceRange {
    Real min_w = 0.0;
    Real max_w = 0.0;
    bool is_fixed() const { return min_w == max_w; }
};

struct DcLinkSpec {
    Real capacitance_f = 0.0;
    Real vdc_nominal_v = 0.0;
    /// ESR(C) = esr_coefficient / C, ohm*farad. Device datasheet parameter.
    Real esr_coefficient = 1e-3;
    /// Unset means the 2w ripple magnitude is unconstrained.
    std::optional<Real> ripple_limit_w;
    DcSourceRange dc_source_power_w;
};

enum class VscTopology { Statcom, SoftOpenPoint, Interconnected4w };

struct VscSpec {
    std::string id;
    VscTopology topology = VscTopology::Statcom;
    std::vector<LegSpec> legs;  // >= 3, all sharing one dc link
    DcLinkSpec dc_link;
};

/// Candidate terminal assignment, one entry per leg of the owning spec.
struct VscOperatingPoint {
    std::vector<Phasor> terminal_voltages_v;
    std::vector<Phasor> leg_currents_a;
};

struct Violation {
    std::string constraint;  // machine-readable id, e.g. "leg_ampacity:a"
    Real magnitude = 0.0;    // amount by which the constraint is exceeded
};

struct CapacitorRipple {
    Real v_ripple_v = 0.0;  // amplitude of the 2w voltage ripple
    Real i_ripple_a = 0.0;  // amplitude of the 2w capacitor current
};

/// Per-leg 2w active power ripple phasor, the plain complex product v*i.
inline Phasor leg_ripple_phasor(const Phasor& v, const Phasor& i) { return v * i; }

/// Mean dc-side power, sum of Re(v_j * conj(i_j)) over the legs.
Real dc_power(const VscOperatingPoint& op);

/// 2w dc-link power ripple phasor, sum of v_j * i_j over every leg
/// sharing the dc link (neutral legs and both sides of a back-to-back
/// device included).
Phasor ripple_phasor(const VscOperatingPoint& op);

/// Evaluates leg ampacity, current balance and the ripple limit.
/// Violations are data, not errors; an empty list means feasible.
std::vector<Violation> check_constraints(const VscSpec& spec, const VscOperatingPoint& op,
                                         Real tol_balance_a = 1e-6, Real tol_ripple_w = 1e-6);

/// Capacitor voltage/current ripple amplitudes for a given 2w power
/// ripple magnitude: |V_r| = |P| / (2w C Vdc0), |I_r| = |P| / Vdc0.
/// The ripple voltage phase equals the angle of the power ripple phasor.
CapacitorRipple capacitor_ripple(const DcLinkSpec& spec, Real ripple_magnitude_w,
                                 Real omega_rad_s);

/// ESR losses of the sinusoidal capacitor ripple current,
/// (esr_coefficient / C) * (|P| / Vdc0)^2 / 2.
Real capacitor_losses(const DcLinkSpec& spec, Real ripple_magnitude_w);

/// Four-leg current set I = gamma*|I|*b_neg + (1-gamma)*|I|*b_zero,
/// rotated so the phase-a current is in phase with v_positive. Entry 3 is
/// the neutral return -(Ia+Ib+Ic) = -3(1-gamma)|I| times the unit phasor.
/// Throws std::invalid_argument for gamma outside [0,1].
std::vector<Phasor> gamma_locus(Real gamma, Real i_mag_a, const Phasor& v_positive);

}  // namespace ropf

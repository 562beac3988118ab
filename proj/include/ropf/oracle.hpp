#pragma once

#include <string>
#include <vector>

#include "ropf/types.hpp"
#include "ropf/vsc.hpp"

namespace ropf {

/// Averaged model of a grid-connected four-leg VSC dc link: the legs are
/// ideal current sources behind an RL filter, the dc link is a capacitor
/// fed by a non-ideal dc source (series RL chosen for a second-order
/// low-pass response).
struct OracleConfig {
    Real frequency_hz = 50.0;
    Real dt_s = 1e-5;
    Real duration_s = 1.0;
    PhaseTriple grid_voltage_v = PhaseTriple::Zero();  // phase-to-neutral RMS phasors
    Real filter_inductance_h = 5e-3;
    Real filter_resistance_ohm = 1e-3;
    /// RMS phasors of the a, b, c leg currents injected into the grid.
    /// The neutral leg carries the return -(Ia+Ib+Ic).
    std::vector<Phasor> leg_currents_a;
    DcLinkSpec dc_link;
    Real dc_source_cutoff_hz = 7.5;
    Real dc_source_damping = 0.89;
};

struct SimTrace {
    std::vector<Real> time_s;
    std::vector<Real> p_dc_w;    // instantaneous power leaving the dc link
    std::vector<Real> v_dc_v;    // capacitor voltage
    std::vector<Real> i_cap_a;   // capacitor current (charging positive)
    std::vector<Real> i_src_a;   // non-ideal dc source current
    std::vector<PhaseTriple> v_terminal_v;  // half-bridge a,b,c instantaneous voltages
    Real frequency_hz = 50.0;
};

enum class TraceSignal { PDc, ICap, VDc };

struct RippleComparison {
    Real proposed_ripple_w = 0.0;   // |sum over legs of V_j I_j| at terminal voltages
    Real simulated_ripple_w = 0.0;  // harmonic-2 amplitude of the simulated p_dc
    Real proposed_ir_a = 0.0;       // |P| / Vdc0
    Real simulated_ir_a = 0.0;      // harmonic-2 amplitude of the capacitor current
    Real lowfreq_rms_w = 0.0;       // RSS of p_dc harmonics 1..50
    Real lowfreq_rms_a = 0.0;       // RSS of i_cap harmonics 1..50
};

/// Half-bridge terminal phasors, grid voltage plus the filter drop, for
/// all four legs (neutral last, carrying the return current).
std::vector<Phasor> terminal_voltages(const OracleConfig& cfg);

/// Leg phasors including the derived neutral return.
std::vector<Phasor> leg_currents_with_neutral(const OracleConfig& cfg);

/// Instantaneous power through the half-bridges at time t, synthesized
/// from the terminal-voltage and current phasors of all four legs.
Real instantaneous_power(const OracleConfig& cfg, Real t);

/// Trapezoidal integration of
///   C dv/dt = i_src - p_dc(t)/v,   L_s di/dt = V_src - R_s i - v
/// from a pre-charged capacitor and zero source current. Throws
/// std::runtime_error on configuration errors or integrator divergence.
SimTrace simulate(const OracleConfig& cfg);

/// Fourier coefficient of a trace signal at harmonic*f0, taken over the
/// last ten fundamental periods. Returns amplitude/phase of a cosine at
/// that frequency (harmonic 0 returns the mean). Phase is referenced to
/// t = 0, matching the phasor synthesis of the inputs.
Phasor extract_component(const SimTrace& trace, TraceSignal signal, int harmonic);

/// Same extraction for an arbitrary sampled signal.
Phasor extract_harmonic(const std::vector<Real>& time_s, const std::vector<Real>& x, Real f0,
                        int harmonic, int window_periods = 10);

/// Runs the simulation and compares the bilinear ripple prediction
/// against the spectral content of the simulated dc link.
RippleComparison compare_to_bilinear(const OracleConfig& cfg);

/// Bundled current-injection scenarios "3a".."3f" at the reference
/// operating point (416 V line grid, 700 V / 50 mF dc link, 14.14 A).
OracleConfig ripple_case_preset(const std::string& id);

/// Names of the bundled scenarios.
std::vector<std::string> ripple_case_names();

}  // namespace ropf

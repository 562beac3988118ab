#pragma once

#include <string>
#include <vector>

#include "ropf/network.hpp"

namespace ropf {

/// Rectangular solved state. Vectors are aligned with node_map(net),
/// branch_conductors(net, branch) per branch, and the legs of each VSC.
struct SystemState {
    CVec node_voltage_v;
    std::vector<CVec> branch_current_a;
    std::vector<CVec> device_current_a;
};

struct ResidualReport {
    Real kcl_inf_norm_a = 0.0;
    Real ohm_inf_norm_v = 0.0;
    Real device_inf_norm = 0.0;  // mixed units: current balance (A), dc power (W)
};

enum class SolveStatus { Converged, MaxIterations, SingularJacobian, NumericalBreakdown };

struct PowerFlowResult {
    SystemState state;
    SolveStatus status = SolveStatus::Converged;
    int iterations = 0;
    Real residual_inf = 0.0;
    std::string message;
};

struct PowerFlowOptions {
    Real tolerance = 1e-8;
    int max_iterations = 50;
    /// Dense LU below this unknown count, sparse LU above.
    int dense_threshold = 200;
};

/// Zero-initialized state with the correct dimensions.
SystemState blank_state(const Network& net);

/// Source-propagated flat voltage profile (per-phase nominal rotation,
/// neutral at zero) with zero currents.
SystemState flat_state(const Network& net);

/// Kirchhoff/Ohm/device residuals of a candidate state. Loads, sources
/// and resistive grounding are evaluated directly from the voltages, so
/// the report is a pure function of the state fields.
ResidualReport residuals(const Network& net, const SystemState& state);

/// Newton solve of the network equations with the VSC leg currents held
/// at the given setpoints (one phasor list per device; empty means all
/// zero). Non-convergence is reported in the result, not thrown.
PowerFlowResult solve(const Network& net,
                      const std::vector<std::vector<Phasor>>& device_setpoints = {},
                      const PowerFlowOptions& options = {},
                      const SystemState* warm_start = nullptr);

/// Phase-to-neutral voltage triple at a bus (neutral taken as 0 V where
/// the bus has no neutral conductor).
PhaseTriple bus_phase_voltages(const Network& net, const NodeMap& map, const SystemState& state,
                               int bus_index);

/// Operating point (terminal voltages from the state, leg currents from
/// the state's device entry) for one VSC.
VscOperatingPoint device_operating_point(const Network& net, const NodeMap& map,
                                         const SystemState& state, int vsc_index);

}  // namespace ropf

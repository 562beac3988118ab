#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ropf/network.hpp"
#include "ropf/nlp.hpp"
#include "ropf/power_flow.hpp"

namespace ropf {

enum class ObjectiveKind { MinMaxPhaseCurrent, DeratingPlusRipple };

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::MinMaxPhaseCurrent;
    /// Branch whose conductor currents (a, b, c and neutral) enter the
    /// min-max objective.
    std::string target_branch;
    Real derating_weight = 1.0;  // currency per (kVA * % shortfall)
    Real ripple_weight = 1e-4;   // beta
};

struct ConstraintToggles {
    bool ripple_limit = true;
    bool vneg_limit = false;
    bool voltage_bounds = false;
    bool branch_ampacity = false;
};

struct OpfProblem {
    Network network;
    ObjectiveSpec objective;
    ConstraintToggles toggles;
    DeratingCurve derating_curve;
};

enum class OpfStatus { LocalOptimum, MaxIterations, InfeasibleDetected };

struct SolverStats {
    OpfStatus status = OpfStatus::InfeasibleDetected;
    int iterations = 0;
    int starts_tried = 0;
    Real stationarity = 0.0;
    std::string message;
};

struct OpfSolution {
    SystemState state;
    Real objective_value = 0.0;
    std::vector<Real> ripple_per_vsc_w;
    std::vector<Phasor> ripple_phasor_per_vsc;
    std::vector<Real> neutral_current_per_vsc_a;
    std::vector<Real> dc_power_per_vsc_w;
    ResidualReport feasibility;
    Real max_inequality_violation = 0.0;  // physical units
    SolverStats stats;
};

/// Where each variable family starts in the NLP vector; complex
/// quantities occupy (index, index+1) as (re, im).
struct OpfVariables {
    NodeMap map;
    int count = 0;
    std::vector<int> node_voltage;                 // per node
    std::vector<std::vector<int>> branch_current;  // [branch][conductor slot]
    std::vector<std::vector<int>> source_current;  // [source][conductor slot]
    std::vector<int> ground_current;               // per grounded node entry
    std::vector<int> grounded_nodes;               // matching node ids
    std::vector<std::vector<int>> load_current;    // per effective load (complex)
    std::vector<std::vector<int>> leg_current;     // [vsc][leg]
    std::vector<int> dc_source_power;              // per vsc, -1 when fixed
    int epigraph = -1;
    std::vector<int> machine_bus_index;            // distinct buses carrying machines
    std::vector<int> vneg_aux;                     // per machine bus (pu units)
    std::vector<int> ripple_aux;                   // per vsc (W)
};

struct AssemblyInfo {
    std::vector<bool> ripple_inequality_per_vsc;
    std::vector<bool> ripple_equality_per_vsc;
    int leg_ampacity_inequalities = 0;
    int leg_zero_equalities = 0;
    int epigraph_rows = 0;
};

struct AssembledOpf {
    Nlp nlp;
    OpfVariables vars;
    AssemblyInfo info;
};

struct OpfOptions {
    OpfOptions() { nlp.mu_init = 0.01; }  // solves start power-flow feasible
    int multi_starts = 3;
    NlpOptions nlp;
    unsigned seed = 0x5eedu;
};

/// Builds the rectangular current-voltage NLP: network equalities, device
/// balance/power/ripple rows, toggled operating limits, and the objective
/// with its epigraph or unbalance/ripple auxiliaries.
AssembledOpf assemble(const OpfProblem& problem);

/// Interior-point solve with multi-start; returns the best feasible point
/// found. The solution state is dimensionally a power-flow state, so it
/// can be re-verified with power_flow residuals directly.
OpfSolution solve_opf(const OpfProblem& problem, const SystemState* warm_start = nullptr,
                      const OpfOptions& options = {});

/// Exact objective of a candidate state: the true conductor-current
/// maximum for the min-max objective, or the piecewise derating cost plus
/// beta times the ripple magnitudes.
Real evaluate_objective(const OpfProblem& problem, const SystemState& state);

/// Fills an NLP start vector from a power-flow state (derived source,
/// ground and load currents included).
Vec starting_point(const AssembledOpf& assembled, const OpfProblem& problem,
                   const SystemState& state);

}  // namespace ropf

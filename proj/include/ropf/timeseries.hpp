#pragma once

#include <string>
#include <vector>

#include "ropf/opf.hpp"

namespace ropf {

struct DemandRow {
    std::string timestamp;
    std::string bus;
    Conductor phase = Conductor::A;
    Real p_kw = 0.0;
    Real q_kvar = 0.0;
};

/// Demand rows grouped by timestamp in order of first appearance.
struct DemandSeries {
    std::vector<std::string> timestamps;
    std::vector<std::vector<DemandRow>> steps;
};

/// Parses `timestamp,bus,phase,p_kw,q_kvar` CSV text. Throws on malformed
/// rows.
DemandSeries parse_demand_csv(const std::string& text);
DemandSeries load_demand_file(const std::string& path);

struct StepRecord {
    int step = -1;
    std::string timestamp;
    OpfStatus status = OpfStatus::InfeasibleDetected;
    Real objective = 0.0;
    Real max_phase_current_a = 0.0;            // mitigated, phases a,b,c
    Real max_phase_current_unmitigated_a = 0.0;
    Real max_monitored_current_a = 0.0;        // objective conductors incl. neutral
    std::vector<Real> ripple_w;                // per device
    std::vector<Real> neutral_a;               // per device
};

struct TimeseriesResult {
    std::vector<StepRecord> records;
    /// Descending load-duration arrays of the per-step maxima.
    std::vector<Real> duration_mitigated_a;
    std::vector<Real> duration_unmitigated_a;
    int failed_steps = 0;
};

/// Applies one demand step to the network loads. Every row must match an
/// existing (bus, phase) load; throws otherwise.
Network apply_demand(const Network& base, const std::vector<DemandRow>& rows);

/// Solves the problem for every step of the series on `workers` threads.
/// Output ordering is deterministic (merged by step index) regardless of
/// the worker count. Per-step failures are recorded and the run continues.
TimeseriesResult run_timeseries(const OpfProblem& problem, const DemandSeries& demand,
                                int workers = 1, const OpfOptions& options = {});

}  // namespace ropf

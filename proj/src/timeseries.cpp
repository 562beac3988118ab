#include "ropf/timeseries.hpp"

#include <atomic>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ropf {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

Real max_phase_current(const Network& net, const SystemState& state,
                       const std::string& branch_id) {
    Real worst = 0.0;
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        if (net.branches[k].id != branch_id) continue;
        const auto conductors = branch_conductors(net, net.branches[k]);
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            if (conductors[r] == Conductor::N) continue;
            worst = std::max(worst, std::abs(state.branch_current_a[k](r)));
        }
    }
    return worst;
}

Real max_monitored_current(const Network& net, const SystemState& state,
                           const std::string& branch_id) {
    Real worst = 0.0;
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        if (net.branches[k].id != branch_id) continue;
        for (int r = 0; r < state.branch_current_a[k].size(); ++r) {
            worst = std::max(worst, std::abs(state.branch_current_a[k](r)));
        }
    }
    return worst;
}

}  // namespace

DemandSeries parse_demand_csv(const std::string& text) {
    DemandSeries series;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    std::map<std::string, int> step_of;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("timestamp,", 0) == 0) continue;  // header row
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw std::runtime_error("demand CSV line " + std::to_string(line_no) +
                                     ": expected timestamp,bus,phase,p_kw,q_kvar");
        }
        DemandRow row;
        row.timestamp = fields[0];
        row.bus = fields[1];
        if (!conductor_from_name(fields[2], row.phase) || row.phase == Conductor::N) {
            throw std::runtime_error("demand CSV line " + std::to_string(line_no) +
                                     ": bad phase '" + fields[2] + "'");
        }
        try {
            row.p_kw = std::stod(fields[3]);
            row.q_kvar = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw std::runtime_error("demand CSV line " + std::to_string(line_no) +
                                     ": bad number");
        }
        auto it = step_of.find(row.timestamp);
        if (it == step_of.end()) {
            it = step_of.emplace(row.timestamp, static_cast<int>(series.steps.size())).first;
            series.timestamps.push_back(row.timestamp);
            series.steps.emplace_back();
        }
        series.steps[it->second].push_back(row);
    }
    return series;
}

DemandSeries load_demand_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open demand file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_demand_csv(buffer.str());
}

Network apply_demand(const Network& base, const std::vector<DemandRow>& rows) {
    Network net = base;
    for (const auto& row : rows) {
        bool matched = false;
        for (auto& load : net.loads) {
            if (load.bus == row.bus && load.phase == row.phase) {
                load.p_kw = row.p_kw;
                load.q_kvar = row.q_kvar;
                matched = true;
            }
        }
        if (!matched) {
            throw std::runtime_error("demand row references missing load " + row.bus + ":" +
                                     conductor_name(row.phase));
        }
    }
    return net;
}

TimeseriesResult run_timeseries(const OpfProblem& problem, const DemandSeries& demand,
                                int workers, const OpfOptions& options) {
    const int n_steps = static_cast<int>(demand.steps.size());
    TimeseriesResult result;
    result.records.resize(n_steps);

    std::atomic<int> next{0};
    std::atomic<int> failed{0};

    auto worker = [&]() {
        for (int step = next.fetch_add(1); step < n_steps; step = next.fetch_add(1)) {
            StepRecord record;
            record.step = step;
            record.timestamp = demand.timestamps[step];
            try {
                OpfProblem instance = problem;
                instance.network = apply_demand(problem.network, demand.steps[step]);

                // unmitigated reference: plain power flow, devices at rest
                const auto pf = solve(instance.network);
                record.max_phase_current_unmitigated_a =
                    max_phase_current(instance.network, pf.state,
                                      instance.objective.target_branch);

                const auto solution = solve_opf(instance, &pf.state, options);
                record.status = solution.stats.status;
                if (solution.stats.status == OpfStatus::LocalOptimum) {
                    record.objective = solution.objective_value;
                    record.max_phase_current_a = max_phase_current(
                        instance.network, solution.state, instance.objective.target_branch);
                    record.max_monitored_current_a = max_monitored_current(
                        instance.network, solution.state, instance.objective.target_branch);
                    record.ripple_w = solution.ripple_per_vsc_w;
                    record.neutral_a = solution.neutral_current_per_vsc_a;
                } else {
                    failed.fetch_add(1);
                }
            } catch (const std::exception&) {
                record.status = OpfStatus::InfeasibleDetected;
                failed.fetch_add(1);
            }
            result.records[step] = std::move(record);
        }
    };

    const int n_workers = std::max(1, std::min(workers, n_steps));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& thread : pool) thread.join();

    result.failed_steps = failed.load();
    for (const auto& record : result.records) {
        if (record.status == OpfStatus::LocalOptimum) {
            result.duration_mitigated_a.push_back(record.max_phase_current_a);
            result.duration_unmitigated_a.push_back(record.max_phase_current_unmitigated_a);
        }
    }
    std::sort(result.duration_mitigated_a.rbegin(), result.duration_mitigated_a.rend());
    std::sort(result.duration_unmitigated_a.rbegin(), result.duration_unmitigated_a.rend());
    return result;
}

}  // namespace ropf

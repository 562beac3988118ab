#include "ropf/cli.hpp"

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "ropf/io.hpp"
#include "ropf/network_json.hpp"
#include "ropf/oracle.hpp"
#include "ropf/presets.hpp"
#include "ropf/sequence.hpp"
#include "ropf/timeseries.hpp"

namespace ropf {

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

OpfProblem build_problem(const RunConfig& config) {
    OpfProblem problem;

    if (!config.preset.empty()) {
        if (config.preset.rfind("case1", 0) == 0) {
            problem.network = toy_feeder();
            apply_statcom_case(problem.network, config.preset.substr(4));
            problem.objective.kind = ObjectiveKind::MinMaxPhaseCurrent;
            problem.objective.target_branch = "feeder";
        } else if (config.preset == "case2") {
            problem.network = two_feeder_sop();
            problem.objective.kind = ObjectiveKind::DeratingPlusRipple;
            problem.toggles.vneg_limit = true;
            problem.toggles.voltage_bounds = true;
        } else {
            throw ConfigError("unknown preset: " + config.preset);
        }
    } else if (!config.network_path.empty()) {
        problem.network = load_network_file(config.network_path);
        problem.objective.kind = config.objective == "of2" ? ObjectiveKind::DeratingPlusRipple
                                                           : ObjectiveKind::MinMaxPhaseCurrent;
        if (config.objective != "of1" && config.objective != "of2") {
            throw ConfigError("unknown objective: " + config.objective);
        }
    } else {
        throw ConfigError("either --network or --preset is required");
    }

    if (!config.target_branch.empty()) {
        problem.objective.target_branch = config.target_branch;
    }
    if (problem.objective.kind == ObjectiveKind::MinMaxPhaseCurrent &&
        problem.objective.target_branch.empty() && !problem.network.branches.empty()) {
        problem.objective.target_branch = problem.network.branches.front().id;
    }
    problem.objective.ripple_weight = config.beta;
    problem.objective.derating_weight = config.derating_weight;
    if (config.vneg_limit) problem.toggles.vneg_limit = true;
    if (config.voltage_bounds) problem.toggles.voltage_bounds = true;
    if (config.branch_ampacity) problem.toggles.branch_ampacity = true;
    if (config.ripple_limit_w) {
        for (auto& vsc : problem.network.vscs) {
            vsc.dc_link.ripple_limit_w = *config.ripple_limit_w;
        }
    }

    const auto issues = validate(problem.network);
    if (!issues.empty()) {
        throw ConfigError("network validation failed: " + issues.front().code + " (" +
                          issues.front().detail + ")");
    }
    return problem;
}

OpfOptions solver_options(const RunConfig& config) {
    OpfOptions options;
    options.multi_starts = config.multi_starts;
    if (config.nlp_tol) options.nlp.tol = *config.nlp_tol;
    return options;
}

OpfSolution wrap_power_flow(const Network& net, const PowerFlowResult& pf) {
    OpfSolution solution;
    solution.state = pf.state;
    solution.stats.status = pf.status == SolveStatus::Converged ? OpfStatus::LocalOptimum
                                                                : OpfStatus::InfeasibleDetected;
    solution.stats.iterations = pf.iterations;
    solution.stats.message = pf.message;
    solution.feasibility = residuals(net, pf.state);
    const NodeMap map = node_map(net);
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        const auto op = device_operating_point(net, map, pf.state, static_cast<int>(d));
        const Phasor ripple = ripple_phasor(op);
        solution.ripple_phasor_per_vsc.push_back(ripple);
        solution.ripple_per_vsc_w.push_back(std::abs(ripple));
        solution.dc_power_per_vsc_w.push_back(dc_power(op));
        Real neutral = 0.0;
        for (std::size_t j = 0; j < net.vscs[d].legs.size(); ++j) {
            if (net.vscs[d].legs[j].conductor == Conductor::N) {
                neutral = std::max(neutral, std::abs(op.leg_currents_a[j]));
            }
        }
        solution.neutral_current_per_vsc_a.push_back(neutral);
    }
    return solution;
}

TimeseriesResult single_row_summary(const OpfProblem& problem, const OpfSolution& solution) {
    TimeseriesResult result;
    StepRecord record;
    record.step = 0;
    record.timestamp = "-";
    record.status = solution.stats.status;
    record.objective = solution.objective_value;
    record.ripple_w = solution.ripple_per_vsc_w;
    record.neutral_a = solution.neutral_current_per_vsc_a;
    for (std::size_t k = 0; k < problem.network.branches.size(); ++k) {
        if (problem.network.branches[k].id != problem.objective.target_branch) continue;
        const auto conductors = branch_conductors(problem.network, problem.network.branches[k]);
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            const Real mag = std::abs(solution.state.branch_current_a[k](r));
            record.max_monitored_current_a = std::max(record.max_monitored_current_a, mag);
            if (conductors[r] != Conductor::N) {
                record.max_phase_current_a = std::max(record.max_phase_current_a, mag);
            }
        }
    }
    record.max_phase_current_unmitigated_a = record.max_phase_current_a;
    result.records.push_back(record);
    return result;
}

void run_oracle(const RunConfig& config, const std::filesystem::path& out_dir) {
    if (config.preset.empty()) {
        throw ConfigError("oracle requires --case (3a..3f)");
    }
    const OracleConfig oracle_config = ripple_case_preset(config.preset);
    log_info("simulating dc link case " + config.preset);
    const SimTrace trace = simulate(oracle_config);
    const RippleComparison report = compare_to_bilinear(oracle_config);

    write_text_file((out_dir / "trace.csv").string(), trace_csv(trace, 10));
    write_text_file((out_dir / "spectrum.csv").string(), spectrum_csv(trace));

    nlohmann::ordered_json doc;
    doc["case"] = config.preset;
    doc["proposed_ripple_w"] = report.proposed_ripple_w;
    doc["simulated_ripple_w"] = report.simulated_ripple_w;
    doc["proposed_ir_a"] = report.proposed_ir_a;
    doc["simulated_ir_a"] = report.simulated_ir_a;
    doc["lowfreq_rms_w"] = report.lowfreq_rms_w;
    doc["lowfreq_rms_a"] = report.lowfreq_rms_a;
    write_text_file((out_dir / "comparison.json").string(), doc.dump(2) + "\n");
}

void run_gamma_sweep(const RunConfig& config, const std::filesystem::path& out_dir) {
    Network net = config.network_path.empty() ? toy_feeder()
                                              : load_network_file(config.network_path);
    if (net.vscs.empty()) throw ConfigError("gamma-sweep needs a network with a device");
    if (config.sweep_points < 2) throw ConfigError("gamma-sweep needs at least 2 points");

    const auto base = solve(net);
    if (base.status != SolveStatus::Converged) {
        throw SolverError("base power flow did not converge");
    }
    const NodeMap map = node_map(net);
    const auto& vsc = net.vscs.front();
    const int bus = net.bus_index(vsc.legs.front().bus);
    const Phasor v_pos =
        to_sequence(bus_phase_voltages(net, map, base.state, bus)).positive;

    std::vector<GammaSweepRow> rows;
    for (int k = 0; k < config.sweep_points; ++k) {
        const Real gamma = static_cast<Real>(k) / (config.sweep_points - 1);
        const auto currents = gamma_locus(gamma, config.sweep_i_mag_a, v_pos);
        std::vector<std::vector<Phasor>> setpoints(net.vscs.size());
        setpoints[0] = currents;
        const auto pf = solve(net, setpoints, {}, &base.state);
        if (pf.status != SolveStatus::Converged) {
            throw SolverError("power flow diverged during the sweep");
        }
        const auto op = device_operating_point(net, map, pf.state, 0);
        GammaSweepRow row;
        row.gamma = gamma;
        row.neutral_a = std::abs(currents[3]);
        row.ripple_w = std::abs(ripple_phasor(op));
        rows.push_back(row);
    }
    write_text_file((out_dir / "gamma_sweep.csv").string(), gamma_sweep_csv(rows));
}

}  // namespace

int run(const RunConfig& config) {
    const std::filesystem::path out_dir(config.output_dir);
    try {
        std::filesystem::create_directories(out_dir);

        if (config.command == "oracle") {
            run_oracle(config, out_dir);
            return 0;
        }
        if (config.command == "gamma-sweep") {
            run_gamma_sweep(config, out_dir);
            return 0;
        }

        OpfProblem problem = build_problem(config);

        if (config.command == "pf") {
            const auto pf = solve(problem.network);
            if (pf.status != SolveStatus::Converged) {
                throw SolverError("power flow did not converge: " + pf.message);
            }
            OpfSolution solution = wrap_power_flow(problem.network, pf);
            if (!problem.objective.target_branch.empty()) {
                solution.objective_value = evaluate_objective(problem, solution.state);
            }
            write_text_file((out_dir / "solution.json").string(),
                            solution_to_json(problem.network, solution));
            write_text_file((out_dir / "summary.csv").string(),
                            summary_csv(single_row_summary(problem, solution)));
            return 0;
        }

        if (config.command == "opf") {
            const auto solution = solve_opf(problem, nullptr, solver_options(config));
            log_info("solver finished after " + std::to_string(solution.stats.iterations) +
                     " iterations");
            if (solution.stats.status != OpfStatus::LocalOptimum) {
                throw SolverError("no local optimum found: " + solution.stats.message);
            }
            write_text_file((out_dir / "solution.json").string(),
                            solution_to_json(problem.network, solution));
            write_text_file((out_dir / "summary.csv").string(),
                            summary_csv(single_row_summary(problem, solution)));
            return 0;
        }

        if (config.command == "opf-series") {
            DemandSeries demand;
            if (!config.demand_path.empty()) {
                demand = load_demand_file(config.demand_path);
            } else if (!config.preset.empty() && config.preset.rfind("case1", 0) == 0) {
                demand = parse_demand_csv(demand_profile_csv());
            } else {
                throw ConfigError("opf-series requires --demand");
            }
            const auto result =
                run_timeseries(problem, demand, config.workers, solver_options(config));
            write_text_file((out_dir / "summary.csv").string(), summary_csv(result));
            write_text_file((out_dir / "duration_curve.csv").string(),
                            duration_curve_csv(result));
            if (result.failed_steps > 0) {
                throw SolverError(std::to_string(result.failed_steps) + " steps failed");
            }
            return 0;
        }

        throw ConfigError("unknown command: " + config.command);
    } catch (const std::exception& e) {
        nlohmann::ordered_json doc;
        doc["error"] = e.what();
        doc["command"] = config.command;
        const bool solver_failure = dynamic_cast<const SolverError*>(&e) != nullptr;
        doc["kind"] = solver_failure ? "solver" : "config";
        try {
            std::filesystem::create_directories(out_dir);
            write_text_file((out_dir / "error.json").string(), doc.dump(2) + "\n");
        } catch (...) {
        }
        log_info(std::string("error: ") + e.what());
        std::fprintf(stderr, "ripple-opf: %s\n", e.what());
        return solver_failure ? 2 : 1;
    }
}

}  // namespace ropf

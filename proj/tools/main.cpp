#include <CLI11.hpp>

#include "ropf/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Unbalanced four-wire distribution OPF with VSC dc-link ripple constraints"};
    app.require_subcommand(1);

    ropf::RunConfig config;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--network", config.network_path, "network JSON file");
        cmd->add_option("--preset", config.preset, "bundled scenario (case1a..case1d, case2)");
        cmd->add_option("--out", config.output_dir, "output directory")->capture_default_str();
        cmd->add_option("--objective", config.objective, "of1 (min-max current) or of2 (derating)")
            ->capture_default_str();
        cmd->add_option("--target-branch", config.target_branch,
                        "branch monitored by the of1 objective");
        cmd->add_option("--ripple-limit-w", config.ripple_limit_w,
                        "override every device ripple limit (W)");
        cmd->add_option("--beta", config.beta, "ripple weight in of2")->capture_default_str();
        cmd->add_option("--derating-weight", config.derating_weight,
                        "cost per kVA-percent of derating")
            ->capture_default_str();
        cmd->add_option("--starts", config.multi_starts, "interior-point multi-starts")
            ->capture_default_str();
        cmd->add_option("--tol", config.nlp_tol, "solver KKT tolerance override");
        cmd->add_flag("--vneg-limit", config.vneg_limit, "enforce bus unbalance limits");
        cmd->add_flag("--voltage-bounds", config.voltage_bounds, "enforce bus voltage bands");
        cmd->add_flag("--branch-ampacity", config.branch_ampacity,
                      "enforce branch conductor ampacities");
    };

    auto* pf = app.add_subcommand("pf", "solve the network power flow");
    add_common(pf);

    auto* opf = app.add_subcommand("opf", "solve one optimal power flow");
    add_common(opf);

    auto* series = app.add_subcommand("opf-series", "solve an OPF per demand timestep");
    add_common(series);
    series->add_option("--demand", config.demand_path, "demand timeseries CSV");
    series->add_option("--workers", config.workers, "parallel solver threads")
        ->capture_default_str();

    auto* oracle = app.add_subcommand("oracle", "time-domain dc-link ripple simulation");
    oracle->add_option("--case", config.preset, "scenario 3a..3f")->required();
    oracle->add_option("--out", config.output_dir, "output directory")->capture_default_str();

    auto* sweep = app.add_subcommand("gamma-sweep", "trade neutral current against ripple");
    sweep->add_option("--network", config.network_path, "network JSON file (default: bundled)");
    sweep->add_option("--points", config.sweep_points, "sweep resolution")
        ->capture_default_str();
    sweep->add_option("--i-mag", config.sweep_i_mag_a, "phase-a injection magnitude, A RMS")
        ->capture_default_str();
    sweep->add_option("--out", config.output_dir, "output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    config.command = app.get_subcommands().front()->get_name();
    return ropf::run(config);
}

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "ropf/cli.hpp"
#include "ropf/io.hpp"
#include "ropf/network_json.hpp"
#include "ropf/oracle.hpp"
#include "ropf/presets.hpp"
#include "ropf/timeseries.hpp"

using namespace ropf;
using Catch::Matchers::WithinRel;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ropf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

OpfSolution solved_toy() {
    OpfProblem problem;
    problem.network = toy_feeder();
    problem.objective.kind = ObjectiveKind::MinMaxPhaseCurrent;
    problem.objective.target_branch = "feeder";
    OpfOptions options;
    options.multi_starts = 1;
    return solve_opf(problem, nullptr, options);
}

}  // namespace

TEST_CASE("solution JSON round trip") {
    const Network net = toy_feeder();
    const auto solution = solved_toy();
    const std::string text = solution_to_json(net, solution);
    const auto doc = solution_from_json(text);

    CHECK(doc.status == "local_optimum");
    CHECK(doc.objective_value == solution.objective_value);
    CHECK(doc.devices.size() == 1);
    CHECK(doc.devices[0].ripple_w == solution.ripple_per_vsc_w[0]);
    CHECK(doc.devices[0].leg_currents_a.size() == 4);
    CHECK(doc.voltages_v.at("load").at("a") ==
          solution.state.node_voltage_v(node_map(net).at(1, Conductor::A)));
    CHECK(doc.branch_currents_a.at("feeder").size() == 4);
}

TEST_CASE("series CSV artifacts round trip") {
    OpfProblem problem;
    problem.network = toy_feeder();
    problem.objective.kind = ObjectiveKind::MinMaxPhaseCurrent;
    problem.objective.target_branch = "feeder";
    DemandSeries series;
    for (int k = 0; k < 3; ++k) {
        const std::string t = "t" + std::to_string(k);
        series.timestamps.push_back(t);
        series.steps.push_back({{t, "load", Conductor::A, 8.0 + k, 0.0}});
    }
    OpfOptions options;
    options.multi_starts = 1;
    const auto result = run_timeseries(problem, series, 1, options);

    const std::string summary = summary_csv(result);
    const auto records = parse_summary_csv(summary);
    REQUIRE(records.size() == result.records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        CHECK(records[k].timestamp == result.records[k].timestamp);
        CHECK_THAT(records[k].objective, WithinRel(result.records[k].objective, 1e-11));
    }

    const std::string duration = duration_curve_csv(result);
    const auto curve = parse_duration_csv(duration);
    REQUIRE(curve.mitigated_a.size() == result.duration_mitigated_a.size());
    for (std::size_t k = 0; k < curve.mitigated_a.size(); ++k) {
        CHECK_THAT(curve.mitigated_a[k], WithinRel(result.duration_mitigated_a[k], 1e-11));
    }
}

TEST_CASE("trace and spectrum CSVs round trip") {
    auto cfg = ripple_case_preset("3b");
    cfg.duration_s = 0.5;
    const auto trace = simulate(cfg);

    const std::string text = trace_csv(trace, 100);
    const auto parsed = parse_trace_csv(text);
    REQUIRE(parsed.time_s.size() == (trace.time_s.size() + 99) / 100);
    CHECK_THAT(parsed.p_dc_w[1], WithinRel(trace.p_dc_w[100], 1e-11));
    CHECK_THAT(parsed.v_dc_v[2], WithinRel(trace.v_dc_v[200], 1e-11));

    const std::string spectrum = spectrum_csv(trace, 10);
    const auto rows = parse_spectrum_csv(spectrum);
    REQUIRE(rows.size() == 11);
    CHECK(rows[2].harmonic == 2);
    CHECK_THAT(rows[2].p_mag_w, WithinRel(std::abs(extract_component(trace, TraceSignal::PDc, 2)),
                                          1e-9));
}

TEST_CASE("gamma sweep CSV round trip") {
    const std::vector<GammaSweepRow> rows = {{0.0, 60.0, 0.012}, {0.5, 30.0, 7100.25}};
    const auto parsed = parse_gamma_sweep_csv(gamma_sweep_csv(rows));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[1].gamma == 0.5);
    CHECK(parsed[1].ripple_w == 7100.25);
}

TEST_CASE("cli pf and opf write reparseable artifacts") {
    const auto dir = temp_dir("cli_opf");
    RunConfig config;
    config.command = "opf";
    config.preset = "case1c";
    config.multi_starts = 1;
    config.output_dir = dir.string();
    REQUIRE(run(config) == 0);

    const auto doc = solution_from_json(read_text_file((dir / "solution.json").string()));
    CHECK(doc.status == "local_optimum");
    CHECK(doc.devices[0].ripple_w < 1.0);  // zero-ripple preset
    const auto summary = parse_summary_csv(read_text_file((dir / "summary.csv").string()));
    REQUIRE(summary.size() == 1);

    // identical rerun is byte-identical
    const std::string first = read_text_file((dir / "solution.json").string());
    REQUIRE(run(config) == 0);
    CHECK(read_text_file((dir / "solution.json").string()) == first);

    // the three-wire preset pins the neutral leg
    RunConfig three_wire = config;
    three_wire.preset = "case1b";
    REQUIRE(run(three_wire) == 0);
    const auto doc2 = solution_from_json(read_text_file((dir / "solution.json").string()));
    CHECK(doc2.devices[0].neutral_current_a < 1e-9);
}

TEST_CASE("cli oracle writes trace, spectrum and comparison") {
    const auto dir = temp_dir("cli_oracle");
    RunConfig config;
    config.command = "oracle";
    config.preset = "3d";
    config.output_dir = dir.string();
    REQUIRE(run(config) == 0);

    const auto rows = parse_spectrum_csv(read_text_file((dir / "spectrum.csv").string()));
    REQUIRE(rows.size() == 51);
    CHECK_THAT(rows[2].p_mag_w, WithinRel(10200.0, 0.03));
    CHECK(parse_trace_csv(read_text_file((dir / "trace.csv").string())).time_s.size() > 1000);
}

TEST_CASE("cli gamma sweep shows the two linear tradeoffs") {
    const auto dir = temp_dir("cli_sweep");
    RunConfig config;
    config.command = "gamma-sweep";
    config.sweep_points = 11;
    config.output_dir = dir.string();
    REQUIRE(run(config) == 0);

    const auto rows = parse_gamma_sweep_csv(read_text_file((dir / "gamma_sweep.csv").string()));
    REQUIRE(rows.size() == 11);
    // |I_n| exactly linear in (1 - gamma)
    for (const auto& row : rows) {
        CHECK(std::abs(row.neutral_a - 3.0 * 20.0 * (1.0 - row.gamma)) < 1e-9);
    }
    // |ripple| close to linear in gamma (small load-unbalance deviation)
    const Real slope = rows.back().ripple_w;
    for (const auto& row : rows) {
        CHECK(std::abs(row.ripple_w - row.gamma * slope) < 0.02 * slope + 200.0);
    }
    CHECK(rows.front().ripple_w < 0.02 * slope + 200.0);
}

TEST_CASE("cli error paths produce machine-readable reports") {
    const auto dir = temp_dir("cli_err");
    RunConfig config;
    config.command = "opf";
    config.output_dir = dir.string();
    CHECK(run(config) == 1);  // neither preset nor network
    CHECK(std::filesystem::exists(dir / "error.json"));

    RunConfig bad_preset = config;
    bad_preset.preset = "case9";
    CHECK(run(bad_preset) == 1);

    RunConfig bad_series = config;
    bad_series.command = "opf-series";
    bad_series.preset = "case2";
    CHECK(run(bad_series) == 1);  // case2 has no bundled demand
}

TEST_CASE("cli loads networks from files") {
    const auto dir = temp_dir("cli_file");
    save_network_file(toy_feeder(), (dir / "net.json").string());

    RunConfig config;
    config.command = "pf";
    config.network_path = (dir / "net.json").string();
    config.output_dir = dir.string();
    REQUIRE(run(config) == 0);
    const auto doc = solution_from_json(read_text_file((dir / "solution.json").string()));
    CHECK(doc.status == "local_optimum");
    CHECK(doc.voltages_v.count("load") == 1);

    RunConfig missing = config;
    missing.network_path = (dir / "absent.json").string();
    CHECK(run(missing) == 1);
}

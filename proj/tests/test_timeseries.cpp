#include <catch2/catch_amalgamated.hpp>

#include "ropf/presets.hpp"
#include "ropf/timeseries.hpp"

using namespace ropf;
using Catch::Matchers::WithinRel;

namespace {

OpfProblem toy_problem() {
    OpfProblem problem;
    problem.network = toy_feeder();
    problem.objective.kind = ObjectiveKind::MinMaxPhaseCurrent;
    problem.objective.target_branch = "feeder";
    return problem;
}

OpfOptions fast_options() {
    OpfOptions options;
    options.multi_starts = 1;
    return options;
}

}  // namespace

TEST_CASE("demand CSV parses grouped by timestamp") {
    const auto series = parse_demand_csv(demand_profile_csv());
    REQUIRE(series.steps.size() == 48);
    CHECK(series.timestamps.front() == "2025-06-01T00:00");
    CHECK(series.timestamps.back() == "2025-06-01T23:30");
    for (const auto& step : series.steps) CHECK(step.size() == 3);

    CHECK_THROWS(parse_demand_csv("timestamp,bus,phase,p_kw,q_kvar\n1,load,a,1\n"));
    CHECK_THROWS(parse_demand_csv("timestamp,bus,phase,p_kw,q_kvar\n1,load,x,1,0\n"));
    CHECK_THROWS(parse_demand_csv("timestamp,bus,phase,p_kw,q_kvar\n1,load,a,abc,0\n"));
}

TEST_CASE("applying demand replaces matching loads only") {
    const Network base = toy_feeder();
    const Network net = apply_demand(base, {{"t", "load", Conductor::A, 9.9, 1.1}});
    CHECK(net.loads[0].p_kw == 9.9);
    CHECK(net.loads[0].q_kvar == 1.1);
    CHECK(net.loads[1].p_kw == base.loads[1].p_kw);

    CHECK_THROWS(apply_demand(base, {{"t", "nowhere", Conductor::A, 1.0, 0.0}}));
    CHECK_THROWS(apply_demand(base, {{"t", "src", Conductor::A, 1.0, 0.0}}));
}

TEST_CASE("constant demand yields identical steps") {
    DemandSeries series;
    for (int k = 0; k < 4; ++k) {
        series.timestamps.push_back("t" + std::to_string(k));
        series.steps.push_back({{series.timestamps.back(), "load", Conductor::A, 10.0, 0.0},
                                {series.timestamps.back(), "load", Conductor::B, 5.0, 0.0},
                                {series.timestamps.back(), "load", Conductor::C, 5.0, 0.0}});
    }
    const auto result = run_timeseries(toy_problem(), series, 2, fast_options());
    REQUIRE(result.records.size() == 4);
    CHECK(result.failed_steps == 0);
    for (const auto& record : result.records) {
        CHECK(record.status == OpfStatus::LocalOptimum);
        CHECK(record.objective == result.records[0].objective);
        CHECK(record.max_phase_current_a == result.records[0].max_phase_current_a);
    }
}

TEST_CASE("worker count does not change the records") {
    const auto series = parse_demand_csv(demand_profile_csv());
    DemandSeries head;
    for (int k = 0; k < 6; ++k) {
        head.timestamps.push_back(series.timestamps[k]);
        head.steps.push_back(series.steps[k]);
    }
    const auto serial = run_timeseries(toy_problem(), head, 1, fast_options());
    const auto parallel = run_timeseries(toy_problem(), head, 4, fast_options());
    REQUIRE(serial.records.size() == parallel.records.size());
    for (std::size_t k = 0; k < serial.records.size(); ++k) {
        CHECK(serial.records[k].objective == parallel.records[k].objective);
        CHECK(serial.records[k].max_phase_current_a == parallel.records[k].max_phase_current_a);
    }
}

TEST_CASE("mitigated duration curve dominates the unmitigated one") {
    const auto series = parse_demand_csv(demand_profile_csv());
    DemandSeries slice;
    for (std::size_t k = 0; k < series.steps.size(); k += 4) {
        slice.timestamps.push_back(series.timestamps[k]);
        slice.steps.push_back(series.steps[k]);
    }
    const auto result = run_timeseries(toy_problem(), slice, 3, fast_options());
    CHECK(result.failed_steps == 0);
    REQUIRE(result.duration_mitigated_a.size() == slice.steps.size());
    for (std::size_t k = 0; k < result.duration_mitigated_a.size(); ++k) {
        CHECK(result.duration_mitigated_a[k] <= result.duration_unmitigated_a[k] + 1e-9);
        if (k > 0) CHECK(result.duration_mitigated_a[k] <= result.duration_mitigated_a[k - 1]);
    }
}

TEST_CASE("failed steps are recorded and the run continues") {
    DemandSeries series;
    series.timestamps = {"ok", "bad", "ok2"};
    series.steps = {{{"ok", "load", Conductor::A, 10.0, 0.0}},
                    {{"bad", "missing_bus", Conductor::A, 1.0, 0.0}},
                    {{"ok2", "load", Conductor::A, 8.0, 0.0}}};
    const auto result = run_timeseries(toy_problem(), series, 1, fast_options());
    CHECK(result.failed_steps == 1);
    CHECK(result.records[0].status == OpfStatus::LocalOptimum);
    CHECK(result.records[1].status == OpfStatus::InfeasibleDetected);
    CHECK(result.records[2].status == OpfStatus::LocalOptimum);
    CHECK(result.duration_mitigated_a.size() == 2);
}

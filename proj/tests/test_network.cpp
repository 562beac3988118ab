#include <catch2/catch_amalgamated.hpp>

#include "ropf/network.hpp"
#include "ropf/network_json.hpp"
#include "ropf/presets.hpp"
#include "ropf/sequence.hpp"

using namespace ropf;
using Catch::Matchers::WithinRel;

namespace {

bool has_issue(const std::vector<Issue>& issues, const std::string& code) {
    for (const auto& issue : issues) {
        if (issue.code == code) return true;
    }
    return false;
}

bool networks_equal(const Network& a, const Network& b) {
    if (a.frequency_hz != b.frequency_hz) return false;
    if (a.buses.size() != b.buses.size() || a.branches.size() != b.branches.size() ||
        a.sources.size() != b.sources.size() || a.loads.size() != b.loads.size() ||
        a.machines.size() != b.machines.size() || a.vscs.size() != b.vscs.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.buses.size(); ++k) {
        const auto& x = a.buses[k];
        const auto& y = b.buses[k];
        if (x.id != y.id || x.conductors != y.conductors || x.v_nominal_v != y.v_nominal_v ||
            x.v_min_pu != y.v_min_pu || x.v_max_pu != y.v_max_pu ||
            x.grounding_ohm != y.grounding_ohm || x.vneg_limit_pu != y.vneg_limit_pu) {
            return false;
        }
    }
    for (std::size_t k = 0; k < a.branches.size(); ++k) {
        const auto& x = a.branches[k];
        const auto& y = b.branches[k];
        if (x.id != y.id || x.from_bus != y.from_bus || x.to_bus != y.to_bus ||
            x.impedance_ohm != y.impedance_ohm || x.ampacity_a != y.ampacity_a) {
            return false;
        }
    }
    for (std::size_t k = 0; k < a.sources.size(); ++k) {
        const auto& x = a.sources[k];
        const auto& y = b.sources[k];
        if (x.bus != y.bus || x.short_circuit_ohm != y.short_circuit_ohm ||
            x.sequence_voltage_pu.zero != y.sequence_voltage_pu.zero ||
            x.sequence_voltage_pu.positive != y.sequence_voltage_pu.positive ||
            x.sequence_voltage_pu.negative != y.sequence_voltage_pu.negative) {
            return false;
        }
    }
    for (std::size_t k = 0; k < a.loads.size(); ++k) {
        const auto& x = a.loads[k];
        const auto& y = b.loads[k];
        if (x.bus != y.bus || x.phase != y.phase || x.p_kw != y.p_kw || x.q_kvar != y.q_kvar) {
            return false;
        }
    }
    for (std::size_t k = 0; k < a.machines.size(); ++k) {
        const auto& x = a.machines[k];
        const auto& y = b.machines[k];
        if (x.bus != y.bus || x.rating_kva != y.rating_kva ||
            x.active_power_kw != y.active_power_kw || x.power_factor != y.power_factor) {
            return false;
        }
    }
    for (std::size_t k = 0; k < a.vscs.size(); ++k) {
        const auto& x = a.vscs[k];
        const auto& y = b.vscs[k];
        if (x.id != y.id || x.topology != y.topology || x.legs.size() != y.legs.size()) {
            return false;
        }
        if (x.dc_link.capacitance_f != y.dc_link.capacitance_f ||
            x.dc_link.vdc_nominal_v != y.dc_link.vdc_nominal_v ||
            x.dc_link.esr_coefficient != y.dc_link.esr_coefficient ||
            x.dc_link.ripple_limit_w != y.dc_link.ripple_limit_w ||
            x.dc_link.dc_source_power_w.min_w != y.dc_link.dc_source_power_w.min_w ||
            x.dc_link.dc_source_power_w.max_w != y.dc_link.dc_source_power_w.max_w) {
            return false;
        }
        for (std::size_t j = 0; j < x.legs.size(); ++j) {
            if (x.legs[j].id != y.legs[j].id || x.legs[j].bus != y.legs[j].bus ||
                x.legs[j].conductor != y.legs[j].conductor ||
                x.legs[j].i_max_a != y.legs[j].i_max_a) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("bundled networks validate cleanly") {
    CHECK(validate(toy_feeder()).empty());
    CHECK(validate(demo_feeder()).empty());
    CHECK(validate(two_feeder_sop()).empty());
}

TEST_CASE("validation flags broken references") {
    Network net = demo_feeder();
    net.branches[0].to_bus = "nowhere";
    CHECK(has_issue(validate(net), "dangling_branch"));

    net = demo_feeder();
    net.buses[3].conductors[static_cast<int>(Conductor::N)] = false;
    net.buses[3].grounding_ohm.reset();
    VscSpec vsc;
    vsc.id = "dev";
    vsc.legs = {{"a", "f3", Conductor::A, 10.0},
                {"b", "f3", Conductor::B, 10.0},
                {"c", "f3", Conductor::C, 10.0},
                {"n", "f3", Conductor::N, 10.0}};
    vsc.dc_link.capacitance_f = 0.05;
    vsc.dc_link.vdc_nominal_v = 700.0;
    net.vscs.push_back(vsc);
    CHECK(has_issue(validate(net), "missing_conductor"));

    net = demo_feeder();
    net.sources.clear();
    CHECK(has_issue(validate(net), "no_source"));

    net = demo_feeder();
    net.sources.push_back(net.sources[0]);
    CHECK(has_issue(validate(net), "multiple_sources"));

    net = demo_feeder();
    net.buses.push_back(net.buses[4]);
    net.buses.back().id = "floating";
    CHECK(has_issue(validate(net), "no_source"));

    net = demo_feeder();
    net.buses[1].grounding_ohm = 5.0;
    net.buses[1].conductors[static_cast<int>(Conductor::N)] = false;
    auto issues = validate(net);
    CHECK(has_issue(issues, "grounding_without_neutral"));
}

TEST_CASE("sop network is branch-disconnected but device-coupled") {
    Network net = two_feeder_sop();
    CHECK(validate(net).empty());
    net.vscs.clear();
    CHECK(has_issue(validate(net), "disconnected_component"));
}

TEST_CASE("admittance stamps invert branch impedance blocks") {
    Network net;
    { Bus bus; bus.id = "u"; net.buses.push_back(bus); }
    { Bus bus; bus.id = "v"; net.buses.push_back(bus); }
    Branch branch;
    branch.id = "b";
    branch.from_bus = "u";
    branch.to_bus = "v";
    const Phasor z{0.1, 0.2};
    branch.impedance_ohm = Mat4c::Identity() * z;
    net.branches.push_back(branch);
    Source source;
    source.bus = "u";
    source.short_circuit_ohm = Mat4c::Identity() * Phasor(0.01, 0.01);
    net.sources.push_back(source);

    const NodeMap map = node_map(net);
    const auto y = admittance(net, map);
    const Phasor y_expected = 1.0 / z;
    for (int c = 0; c < kNumConductors; ++c) {
        const int u = map.at(0, static_cast<Conductor>(c));
        const int v = map.at(1, static_cast<Conductor>(c));
        CHECK(std::abs(y.coeff(u, u) - y_expected) < 1e-12);
        CHECK(std::abs(y.coeff(u, v) + y_expected) < 1e-12);
    }

    // a second identical branch doubles every stamp
    net.branches.push_back(branch);
    net.branches.back().id = "b2";
    const auto y2 = admittance(net, node_map(net));
    const int u0 = map.at(0, Conductor::A);
    CHECK(std::abs(y2.coeff(u0, u0) - 2.0 * y_expected) < 1e-12);
}

TEST_CASE("admittance of a flat profile injects nothing") {
    const Network net = demo_feeder();
    const NodeMap map = node_map(net);
    const auto y = admittance(net, map);

    CVec flat = CVec::Zero(map.size());
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        for (int c = 0; c < 3; ++c) {
            const auto cond = static_cast<Conductor>(c);
            if (net.buses[b].has(cond)) {
                flat(map.at(static_cast<int>(b), cond)) = 240.0 * alpha_power(-c);
            }
        }
    }
    const CVec injection = y * flat;
    for (int k = 0; k < injection.size(); ++k) {
        CHECK(std::abs(injection(k)) < 1e-9);
    }
}

TEST_CASE("network JSON round trip preserves every field") {
    for (const Network& net : {toy_feeder(), demo_feeder(), two_feeder_sop()}) {
        const std::string text = emit_network(net);
        const Network parsed = parse_network(text);
        CHECK(networks_equal(net, parsed));
        // a second pass through the serializer is byte-identical
        CHECK(emit_network(parsed) == text);
    }
}

TEST_CASE("sequence shorthand expands to the conductor frame") {
    const std::string text = R"({
      "schema_version": 1,
      "frequency_hz": 50,
      "buses": [
        {"id": "u", "v_nominal_v": 240, "grounding_ohm": 0},
        {"id": "v", "v_nominal_v": 240}
      ],
      "branches": [
        {"id": "b", "from": "u", "to": "v",
         "impedance_ohm": {"sequence": {"z1": [0.06, 0.05], "z0": [0.12, 0.15], "zn": [0.06, 0.05]}}}
      ],
      "sources": [
        {"bus": "u",
         "sequence_voltage_pu": {"zero": [0,0], "positive": [1,0], "negative": [0,0]},
         "short_circuit_ohm": {"sequence": {"z1": [0.01, 0.03], "z0": [0.01, 0.03], "zn": [0.01, 0.03]}}}
      ],
      "loads": [{"bus": "v", "phase": "a", "p_kw": 2.0, "q_kvar": 0.5}]
    })";
    const Network net = parse_network(text);
    REQUIRE(net.branches.size() == 1);
    const Mat4c expected =
        sequence_impedance_matrix({0.06, 0.05}, {0.12, 0.15}, {0.06, 0.05});
    CHECK(net.branches[0].impedance_ohm == expected);
    CHECK(validate(net).empty());

    // diagonal of the phase block is (z0 + 2 z1)/3
    CHECK_THAT(net.branches[0].impedance_ohm(0, 0).real(), WithinRel(0.08, 1e-12));
    CHECK_THAT(net.branches[0].impedance_ohm(0, 1).real(), WithinRel(0.02, 1e-12));
}

TEST_CASE("parser rejects malformed documents") {
    CHECK_THROWS(parse_network("not json"));
    CHECK_THROWS(parse_network(R"({"schema_version": 2})"));
    CHECK_THROWS(parse_network(
        R"({"schema_version": 1, "buses": [{"id": "u", "conductors": ["x"]}]})"));
}

TEST_CASE("machines expand to balanced lagging loads") {
    Network net = two_feeder_sop();
    const auto loads = effective_loads(net);
    CHECK(loads.size() == net.loads.size() + 9);
    Real p_total = 0.0, q_total = 0.0;
    for (std::size_t k = net.loads.size(); k < loads.size(); ++k) {
        p_total += loads[k].p_kw;
        q_total += loads[k].q_kvar;
    }
    CHECK_THAT(p_total, WithinRel(16.0, 1e-12));
    CHECK_THAT(q_total, WithinRel(16.0 * std::tan(std::acos(0.85)), 1e-12));
}

#include "ropf/presets.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ropf {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

Mat4c diagonal_impedance(const Phasor& z_phase, const Phasor& z_neutral) {
    Mat4c z = Mat4c::Zero();
    for (int c = 0; c < 3; ++c) z(c, c) = z_phase;
    z(3, 3) = z_neutral;
    return z;
}

Bus make_bus(const std::string& id, Real v_nominal, std::optional<Real> grounding = {},
             std::optional<Real> vneg_limit = {}) {
    Bus bus;
    bus.id = id;
    bus.v_nominal_v = v_nominal;
    bus.grounding_ohm = grounding;
    bus.vneg_limit_pu = vneg_limit;
    return bus;
}

VscSpec four_wire_device(const std::string& id, const std::string& bus, Real i_phase,
                         Real i_neutral) {
    VscSpec vsc;
    vsc.id = id;
    vsc.topology = VscTopology::Statcom;
    vsc.legs = {{id + "_a", bus, Conductor::A, i_phase},
                {id + "_b", bus, Conductor::B, i_phase},
                {id + "_c", bus, Conductor::C, i_phase},
                {id + "_n", bus, Conductor::N, i_neutral}};
    vsc.dc_link.capacitance_f = 0.05;
    vsc.dc_link.vdc_nominal_v = 700.0;
    vsc.dc_link.dc_source_power_w = {0.0, 0.0};
    return vsc;
}

}  // namespace

Network toy_feeder() {
    Network net;
    net.frequency_hz = 50.0;

    net.buses.push_back(make_bus("src", 240.0, 0.0));
    net.buses.push_back(make_bus("load", 240.0));

    Branch feeder;
    feeder.id = "feeder";
    feeder.from_bus = "src";
    feeder.to_bus = "load";
    feeder.impedance_ohm = diagonal_impedance({0.05, 0.05}, {0.05, 0.05});
    feeder.ampacity_a = {120.0, 120.0, 120.0, 120.0};
    net.branches.push_back(feeder);

    Source source;
    source.bus = "src";
    source.short_circuit_ohm = diagonal_impedance({0.01, 0.02}, {0.01, 0.02});
    net.sources.push_back(source);

    net.loads = {{"load", Conductor::A, 12.0, 0.0},
                 {"load", Conductor::B, 4.8, 0.0},
                 {"load", Conductor::C, 4.8, 0.0}};

    net.vscs.push_back(four_wire_device("comp", "load", 30.0, kInf));
    return net;
}

Network demo_feeder() {
    Network net;
    net.frequency_hz = 50.0;

    net.buses.push_back(make_bus("sub", 240.0, 0.0));
    net.buses.push_back(make_bus("f1", 240.0));
    net.buses.push_back(make_bus("f2", 240.0));
    net.buses.push_back(make_bus("f3", 240.0, 20.0));
    net.buses.push_back(make_bus("f4", 240.0));

    const Mat4c trunk = sequence_impedance_matrix({0.06, 0.05}, {0.12, 0.15}, {0.06, 0.05});
    const Mat4c spur = sequence_impedance_matrix({0.03, 0.025}, {0.06, 0.075}, {0.03, 0.025});

    auto add_branch = [&](const std::string& id, const std::string& from, const std::string& to,
                          const Mat4c& z, Real ampacity) {
        Branch branch;
        branch.id = id;
        branch.from_bus = from;
        branch.to_bus = to;
        branch.impedance_ohm = z;
        branch.ampacity_a = {ampacity, ampacity, ampacity, ampacity};
        net.branches.push_back(branch);
    };
    add_branch("b1", "sub", "f1", trunk, 200.0);
    add_branch("b2", "f1", "f2", trunk, 150.0);
    add_branch("b3", "f2", "f3", spur, 100.0);
    add_branch("b4", "f2", "f4", spur, 100.0);

    Source source;
    source.bus = "sub";
    source.short_circuit_ohm = diagonal_impedance({0.01, 0.03}, {0.01, 0.03});
    net.sources.push_back(source);

    net.loads = {{"f1", Conductor::A, 2.0, 0.66},
                 {"f3", Conductor::B, 3.0, 0.99},
                 {"f4", Conductor::C, 1.5, 0.49},
                 {"f4", Conductor::A, 1.0, 0.33}};
    return net;
}

Network two_feeder_sop() {
    Network net;
    net.frequency_hz = 50.0;

    net.buses.push_back(make_bus("f1_src", 240.0, 0.0));
    net.buses.push_back(make_bus("f1_t", 240.0));
    net.buses.push_back(make_bus("f1_m1", 240.0, {}, 0.02));
    net.buses.push_back(make_bus("f1_m2", 240.0, {}, 0.02));
    net.buses.push_back(make_bus("f1_m3", 240.0, {}, 0.02));
    net.buses.push_back(make_bus("f2_src", 240.0, 0.0));
    net.buses.push_back(make_bus("f2_load", 240.0));
    net.buses.push_back(make_bus("f2_end", 240.0));

    const Mat4c f1_trunk = sequence_impedance_matrix({0.06, 0.16}, {0.12, 0.3}, {0.06, 0.16});
    const Mat4c f1_spur = sequence_impedance_matrix({0.02, 0.02}, {0.04, 0.05}, {0.02, 0.02});
    const Mat4c f2_line = sequence_impedance_matrix({0.04, 0.08}, {0.08, 0.16}, {0.04, 0.08});

    auto add_branch = [&](const std::string& id, const std::string& from, const std::string& to,
                          const Mat4c& z) {
        Branch branch;
        branch.id = id;
        branch.from_bus = from;
        branch.to_bus = to;
        branch.impedance_ohm = z;
        branch.ampacity_a = {200.0, 200.0, 200.0, 200.0};
        net.branches.push_back(branch);
    };
    add_branch("f1_b1", "f1_src", "f1_t", f1_trunk);
    add_branch("f1_b2", "f1_t", "f1_m1", f1_spur);
    add_branch("f1_b3", "f1_m1", "f1_m2", f1_spur);
    add_branch("f1_b4", "f1_m2", "f1_m3", f1_spur);
    add_branch("f2_b1", "f2_src", "f2_load", f2_line);
    add_branch("f2_b2", "f2_load", "f2_end", f2_line);

    Source f1_source;
    f1_source.bus = "f1_src";
    f1_source.sequence_voltage_pu = {Phasor(0, 0), Phasor(1.05, 0), Phasor(0.0318, 0)};
    f1_source.short_circuit_ohm = diagonal_impedance({0.05, 0.15}, {0.05, 0.15});
    net.sources.push_back(f1_source);

    Source f2_source;
    f2_source.bus = "f2_src";
    f2_source.sequence_voltage_pu = {Phasor(0, 0), Phasor(1.05, 0), Phasor(0, 0)};
    f2_source.short_circuit_ohm = diagonal_impedance({0.02, 0.06}, {0.02, 0.06});
    net.sources.push_back(f2_source);

    // part-loaded machines: ratings set the derating exposure, the drawn
    // power keeps the long rural trunk within its voltage band
    net.machines = {{"f1_m1", 14.118, 4.0, 0.85},
                    {"f1_m2", 14.118, 4.0, 0.85},
                    {"f1_m3", 28.235, 8.0, 0.85}};

    net.loads = {{"f2_load", Conductor::A, 2.0, 0.5},
                 {"f2_load", Conductor::B, 2.0, 0.5},
                 {"f2_load", Conductor::C, 2.0, 0.5}};

    VscSpec sop;
    sop.id = "sop";
    sop.topology = VscTopology::SoftOpenPoint;
    for (auto [bus, tag] : {std::pair{"f1_m3", "f1"}, std::pair{"f2_end", "f2"}}) {
        sop.legs.push_back({std::string("sop_") + tag + "_a", bus, Conductor::A, 25.0});
        sop.legs.push_back({std::string("sop_") + tag + "_b", bus, Conductor::B, 25.0});
        sop.legs.push_back({std::string("sop_") + tag + "_c", bus, Conductor::C, 25.0});
        sop.legs.push_back({std::string("sop_") + tag + "_n", bus, Conductor::N, 25.0});
    }
    sop.dc_link.capacitance_f = 0.05;
    sop.dc_link.vdc_nominal_v = 700.0;
    sop.dc_link.dc_source_power_w = {0.0, 0.0};
    net.vscs.push_back(sop);
    return net;
}

void apply_statcom_case(Network& net, const std::string& id) {
    for (auto& vsc : net.vscs) {
        for (auto& leg : vsc.legs) {
            if (leg.conductor != Conductor::N) continue;
            if (id == "1a" || id == "1c") leg.i_max_a = kInf;
            if (id == "1b") leg.i_max_a = 0.0;
            if (id == "1d") leg.i_max_a = 30.0;
        }
        if (id == "1a" || id == "1b") vsc.dc_link.ripple_limit_w.reset();
        if (id == "1c") vsc.dc_link.ripple_limit_w = 0.0;
        if (id == "1d") vsc.dc_link.ripple_limit_w = 5400.0;
    }
    if (id != "1a" && id != "1b" && id != "1c" && id != "1d") {
        throw std::runtime_error("unknown compensator case: " + id);
    }
}

std::vector<std::string> statcom_case_names() { return {"1a", "1b", "1c", "1d"}; }

std::string demand_profile_csv() {
    std::string csv = "timestamp,bus,phase,p_kw,q_kvar\n";
    char line[96];
    for (int step = 0; step < 48; ++step) {
        const int minutes = step * 30;
        const Real hour = minutes / 60.0;
        // phase a: evening-peaked, up to 14.4 kW (60 A at 240 V)
        const Real pa = 7.2 + 7.2 * std::exp(-0.5 * std::pow((hour - 18.0) / 3.0, 2));
        // phase b: gentle daytime bump
        const Real pb = 4.0 + 1.6 * std::exp(-0.5 * std::pow((hour - 13.0) / 4.0, 2));
        // phase c: midday peak, up to 12 kW
        const Real pc = 4.8 + 7.2 * std::exp(-0.5 * std::pow((hour - 12.0) / 2.5, 2));
        const char* phases[3] = {"a", "b", "c"};
        const Real p[3] = {pa, pb, pc};
        for (int k = 0; k < 3; ++k) {
            std::snprintf(line, sizeof(line), "2025-06-01T%02d:%02d,load,%s,%.6f,0\n",
                          minutes / 60, minutes % 60, phases[k], p[k]);
            csv += line;
        }
    }
    return csv;
}

}  // namespace ropf

#include "ropf/network_json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ropf {

namespace {

using json = nlohmann::ordered_json;

json complex_to_json(const Phasor& z) { return json::array({z.real(), z.imag()}); }

Phasor complex_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) {
        throw std::runtime_error("expected [re, im] pair at " + where);
    }
    return {j[0].get<Real>(), j[1].get<Real>()};
}

json matrix_to_json(const Mat4c& m) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

Mat4c matrix_from_json(const json& j, const std::string& where) {
    if (j.is_object() && j.contains("sequence")) {
        const json& seq = j["sequence"];
        const Phasor z1 = complex_from_json(seq.at("z1"), where + ".z1");
        const Phasor z0 = complex_from_json(seq.at("z0"), where + ".z0");
        const Phasor zn = seq.contains("zn") ? complex_from_json(seq["zn"], where + ".zn") : z0;
        return sequence_impedance_matrix(z1, z0, zn);
    }
    if (!j.is_array() || j.size() != 4) {
        throw std::runtime_error("expected a 4x4 matrix at " + where);
    }
    Mat4c m;
    for (int r = 0; r < 4; ++r) {
        if (!j[r].is_array() || j[r].size() != 4) {
            throw std::runtime_error("expected a 4x4 matrix at " + where);
        }
        for (int c = 0; c < 4; ++c) m(r, c) = complex_from_json(j[r][c], where);
    }
    return m;
}

json optional_to_json(const std::optional<Real>& v) {
    return v ? json(*v) : json(nullptr);
}

json limit_to_json(Real v) {
    return std::isinf(v) ? json(nullptr) : json(v);
}

Real limit_from_json(const json& j, Real fallback) {
    if (j.is_null()) return std::numeric_limits<Real>::infinity();
    if (j.is_string() && j.get<std::string>() == "unconstrained") {
        return std::numeric_limits<Real>::infinity();
    }
    if (j.is_number()) return j.get<Real>();
    return fallback;
}

Conductor conductor_from_json(const json& j, const std::string& where) {
    Conductor c;
    if (!j.is_string() || !conductor_from_name(j.get<std::string>(), c)) {
        throw std::runtime_error("expected a conductor name (a/b/c/n) at " + where);
    }
    return c;
}

}  // namespace

std::string emit_network(const Network& net) {
    json doc;
    doc["schema_version"] = 1;
    doc["frequency_hz"] = net.frequency_hz;

    doc["buses"] = json::array();
    for (const auto& bus : net.buses) {
        json b;
        b["id"] = bus.id;
        json conductors = json::array();
        for (int c = 0; c < kNumConductors; ++c) {
            if (bus.conductors[c]) conductors.push_back(conductor_name(static_cast<Conductor>(c)));
        }
        b["conductors"] = conductors;
        b["v_nominal_v"] = bus.v_nominal_v;
        b["v_min_pu"] = bus.v_min_pu;
        b["v_max_pu"] = bus.v_max_pu;
        b["grounding_ohm"] = optional_to_json(bus.grounding_ohm);
        b["vneg_limit_pu"] = optional_to_json(bus.vneg_limit_pu);
        doc["buses"].push_back(b);
    }

    doc["branches"] = json::array();
    for (const auto& branch : net.branches) {
        json b;
        b["id"] = branch.id;
        b["from"] = branch.from_bus;
        b["to"] = branch.to_bus;
        b["impedance_ohm"] = matrix_to_json(branch.impedance_ohm);
        json amps = json::array();
        for (Real a : branch.ampacity_a) amps.push_back(limit_to_json(a));
        b["ampacity_a"] = amps;
        doc["branches"].push_back(b);
    }

    doc["sources"] = json::array();
    for (const auto& source : net.sources) {
        json s;
        s["bus"] = source.bus;
        s["sequence_voltage_pu"] = {
            {"zero", complex_to_json(source.sequence_voltage_pu.zero)},
            {"positive", complex_to_json(source.sequence_voltage_pu.positive)},
            {"negative", complex_to_json(source.sequence_voltage_pu.negative)}};
        s["short_circuit_ohm"] = matrix_to_json(source.short_circuit_ohm);
        doc["sources"].push_back(s);
    }

    doc["loads"] = json::array();
    for (const auto& load : net.loads) {
        doc["loads"].push_back({{"bus", load.bus},
                                {"phase", conductor_name(load.phase)},
                                {"p_kw", load.p_kw},
                                {"q_kvar", load.q_kvar}});
    }

    doc["machines"] = json::array();
    for (const auto& machine : net.machines) {
        doc["machines"].push_back({{"bus", machine.bus},
                                   {"rating_kva", machine.rating_kva},
                                   {"p_kw", machine.active_power_kw},
                                   {"power_factor", machine.power_factor}});
    }

    doc["vscs"] = json::array();
    for (const auto& vsc : net.vscs) {
        json v;
        v["id"] = vsc.id;
        switch (vsc.topology) {
            case VscTopology::Statcom: v["topology"] = "statcom"; break;
            case VscTopology::SoftOpenPoint: v["topology"] = "soft_open_point"; break;
            case VscTopology::Interconnected4w: v["topology"] = "interconnected_4w"; break;
        }
        json dc;
        dc["capacitance_f"] = vsc.dc_link.capacitance_f;
        dc["vdc_nominal_v"] = vsc.dc_link.vdc_nominal_v;
        dc["esr_coefficient"] = vsc.dc_link.esr_coefficient;
        dc["ripple_limit_w"] = vsc.dc_link.ripple_limit_w ? json(*vsc.dc_link.ripple_limit_w)
                                                          : json(nullptr);
        if (vsc.dc_link.dc_source_power_w.is_fixed()) {
            dc["dc_source_power_w"] = vsc.dc_link.dc_source_power_w.min_w;
        } else {
            dc["dc_source_power_w"] = {{"min", vsc.dc_link.dc_source_power_w.min_w},
                                       {"max", vsc.dc_link.dc_source_power_w.max_w}};
        }
        v["dc_link"] = dc;
        v["legs"] = json::array();
        for (const auto& leg : vsc.legs) {
            v["legs"].push_back({{"id", leg.id},
                                 {"bus", leg.bus},
                                 {"conductor", conductor_name(leg.conductor)},
                                 {"i_max_a", limit_to_json(leg.i_max_a)}});
        }
        doc["vscs"].push_back(v);
    }

    return doc.dump(2) + "\n";
}

Network parse_network(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("network JSON parse error: ") + e.what());
    }
    if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != 1) {
        throw std::runtime_error("unsupported network schema_version (expected 1)");
    }

    Network net;
    net.frequency_hz = doc.value("frequency_hz", 50.0);

    for (const auto& b : doc.value("buses", json::array())) {
        Bus bus;
        bus.id = b.at("id").get<std::string>();
        if (b.contains("conductors")) {
            bus.conductors = {false, false, false, false};
            for (const auto& c : b["conductors"]) {
                bus.conductors[static_cast<int>(conductor_from_json(c, "bus " + bus.id))] = true;
            }
        }
        bus.v_nominal_v = b.value("v_nominal_v", 230.0);
        bus.v_min_pu = b.value("v_min_pu", 0.94);
        bus.v_max_pu = b.value("v_max_pu", 1.10);
        if (b.contains("grounding_ohm") && b["grounding_ohm"].is_number()) {
            bus.grounding_ohm = b["grounding_ohm"].get<Real>();
        }
        if (b.contains("vneg_limit_pu") && b["vneg_limit_pu"].is_number()) {
            bus.vneg_limit_pu = b["vneg_limit_pu"].get<Real>();
        }
        net.buses.push_back(bus);
    }

    for (const auto& b : doc.value("branches", json::array())) {
        Branch branch;
        branch.id = b.at("id").get<std::string>();
        branch.from_bus = b.at("from").get<std::string>();
        branch.to_bus = b.at("to").get<std::string>();
        branch.impedance_ohm = matrix_from_json(b.at("impedance_ohm"), "branch " + branch.id);
        if (b.contains("ampacity_a")) {
            const auto& amps = b["ampacity_a"];
            for (int c = 0; c < kNumConductors && c < static_cast<int>(amps.size()); ++c) {
                branch.ampacity_a[c] = limit_from_json(amps[c], branch.ampacity_a[c]);
            }
        }
        net.branches.push_back(branch);
    }

    for (const auto& s : doc.value("sources", json::array())) {
        Source source;
        source.bus = s.at("bus").get<std::string>();
        const auto& seq = s.at("sequence_voltage_pu");
        source.sequence_voltage_pu.zero = complex_from_json(seq.at("zero"), "source");
        source.sequence_voltage_pu.positive = complex_from_json(seq.at("positive"), "source");
        source.sequence_voltage_pu.negative = complex_from_json(seq.at("negative"), "source");
        source.short_circuit_ohm =
            matrix_from_json(s.at("short_circuit_ohm"), "source " + source.bus);
        net.sources.push_back(source);
    }

    for (const auto& l : doc.value("loads", json::array())) {
        Load load;
        load.bus = l.at("bus").get<std::string>();
        load.phase = conductor_from_json(l.at("phase"), "load at " + load.bus);
        load.p_kw = l.value("p_kw", 0.0);
        load.q_kvar = l.value("q_kvar", 0.0);
        net.loads.push_back(load);
    }

    for (const auto& m : doc.value("machines", json::array())) {
        InductionMachine machine;
        machine.bus = m.at("bus").get<std::string>();
        machine.rating_kva = m.at("rating_kva").get<Real>();
        machine.active_power_kw = m.at("p_kw").get<Real>();
        machine.power_factor = m.value("power_factor", 1.0);
        net.machines.push_back(machine);
    }

    for (const auto& v : doc.value("vscs", json::array())) {
        VscSpec vsc;
        vsc.id = v.at("id").get<std::string>();
        const std::string topology = v.value("topology", "statcom");
        if (topology == "statcom") {
            vsc.topology = VscTopology::Statcom;
        } else if (topology == "soft_open_point") {
            vsc.topology = VscTopology::SoftOpenPoint;
        } else if (topology == "interconnected_4w") {
            vsc.topology = VscTopology::Interconnected4w;
        } else {
            throw std::runtime_error("unknown VSC topology: " + topology);
        }
        const auto& dc = v.at("dc_link");
        vsc.dc_link.capacitance_f = dc.at("capacitance_f").get<Real>();
        vsc.dc_link.vdc_nominal_v = dc.at("vdc_nominal_v").get<Real>();
        vsc.dc_link.esr_coefficient = dc.value("esr_coefficient", 1e-3);
        if (dc.contains("ripple_limit_w") && dc["ripple_limit_w"].is_number()) {
            vsc.dc_link.ripple_limit_w = dc["ripple_limit_w"].get<Real>();
        }
        if (dc.contains("dc_source_power_w")) {
            const auto& p = dc["dc_source_power_w"];
            if (p.is_number()) {
                vsc.dc_link.dc_source_power_w = {p.get<Real>(), p.get<Real>()};
            } else if (p.is_object()) {
                vsc.dc_link.dc_source_power_w = {p.at("min").get<Real>(),
                                                 p.at("max").get<Real>()};
            }
        }
        for (const auto& l : v.value("legs", json::array())) {
            LegSpec leg;
            leg.id = l.at("id").get<std::string>();
            leg.bus = l.at("bus").get<std::string>();
            leg.conductor = conductor_from_json(l.at("conductor"), "leg " + leg.id);
            leg.i_max_a = limit_from_json(l.value("i_max_a", json(nullptr)),
                                          std::numeric_limits<Real>::infinity());
            vsc.legs.push_back(leg);
        }
        net.vscs.push_back(vsc);
    }

    return net;
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_network(buffer.str());
}

void save_network_file(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write network file: " + path);
    out << emit_network(net);
}

}  // namespace ropf

#include "ropf/network.hpp"

#include <Eigen/LU>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ropf/sequence.hpp"

namespace ropf {

int Network::bus_index(const std::string& id) const {
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (buses[k].id == id) return static_cast<int>(k);
    }
    return -1;
}

const Bus& Network::bus(const std::string& id) const {
    const int k = bus_index(id);
    if (k < 0) throw std::out_of_range("unknown bus " + id);
    return buses[k];
}

std::vector<Conductor> branch_conductors(const Network& net, const Branch& branch) {
    std::vector<Conductor> out;
    const int fi = net.bus_index(branch.from_bus);
    const int ti = net.bus_index(branch.to_bus);
    if (fi < 0 || ti < 0) return out;
    for (int c = 0; c < kNumConductors; ++c) {
        const auto cond = static_cast<Conductor>(c);
        if (net.buses[fi].has(cond) && net.buses[ti].has(cond)) out.push_back(cond);
    }
    return out;
}

namespace {

void check_vsc(const Network& net, const VscSpec& vsc, std::vector<Issue>& issues) {
    if (vsc.legs.size() < 3) {
        issues.push_back({"too_few_legs", vsc.id});
    }
    if (vsc.dc_link.capacitance_f <= 0.0 || vsc.dc_link.vdc_nominal_v <= 0.0) {
        issues.push_back({"bad_dc_link", vsc.id});
    }
    if (vsc.dc_link.ripple_limit_w && *vsc.dc_link.ripple_limit_w < 0.0) {
        issues.push_back({"bad_dc_link", vsc.id + ": negative ripple limit"});
    }
    std::set<std::string> leg_ids;
    for (const auto& leg : vsc.legs) {
        if (!leg_ids.insert(leg.id).second) {
            issues.push_back({"duplicate_leg", vsc.id + ":" + leg.id});
        }
        if (leg.i_max_a < 0.0) {
            issues.push_back({"bad_leg_limit", vsc.id + ":" + leg.id});
        }
        const int bi = net.bus_index(leg.bus);
        if (bi < 0) {
            issues.push_back({"dangling_leg", vsc.id + ":" + leg.id + " -> " + leg.bus});
        } else if (!net.buses[bi].has(leg.conductor)) {
            issues.push_back({"missing_conductor",
                              vsc.id + ":" + leg.id + " needs " +
                                  conductor_name(leg.conductor) + " at " + leg.bus});
        }
    }
}

// Union-find over buses, branches as edges; devices may be added.
struct Islands {
    std::vector<int> parent;
    explicit Islands(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void join(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<Issue> validate(const Network& net) {
    std::vector<Issue> issues;

    std::set<std::string> bus_ids;
    for (const auto& bus : net.buses) {
        if (!bus_ids.insert(bus.id).second) issues.push_back({"duplicate_bus", bus.id});
        if (bus.v_nominal_v <= 0.0) issues.push_back({"bad_nominal_voltage", bus.id});
        if (!(bus.v_min_pu < bus.v_max_pu)) issues.push_back({"bad_voltage_bounds", bus.id});
        if (bus.grounding_ohm && !bus.has(Conductor::N)) {
            issues.push_back({"grounding_without_neutral", bus.id});
        }
        bool any = false;
        for (bool c : bus.conductors) any |= c;
        if (!any) issues.push_back({"no_conductors", bus.id});
    }

    std::set<std::string> branch_ids;
    for (const auto& branch : net.branches) {
        if (!branch_ids.insert(branch.id).second) issues.push_back({"duplicate_branch", branch.id});
        const int fi = net.bus_index(branch.from_bus);
        const int ti = net.bus_index(branch.to_bus);
        if (fi < 0 || ti < 0) {
            issues.push_back({"dangling_branch", branch.id});
            continue;
        }
        const auto conductors = branch_conductors(net, branch);
        if (conductors.empty()) {
            issues.push_back({"no_shared_conductors", branch.id});
            continue;
        }
        if (!branch.impedance_ohm.isApprox(branch.impedance_ohm.transpose(), 1e-9)) {
            issues.push_back({"asymmetric_impedance", branch.id});
        }
        CMat block(conductors.size(), conductors.size());
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            if (branch.impedance_ohm(static_cast<int>(conductors[r]),
                                     static_cast<int>(conductors[r]))
                    .real() <= 0.0) {
                issues.push_back({"nonpassive_impedance",
                                  branch.id + ":" + conductor_name(conductors[r])});
            }
            for (std::size_t s = 0; s < conductors.size(); ++s) {
                block(r, s) = branch.impedance_ohm(static_cast<int>(conductors[r]),
                                                   static_cast<int>(conductors[s]));
            }
        }
        Eigen::FullPivLU<CMat> lu(block);
        if (!lu.isInvertible()) issues.push_back({"singular_impedance", branch.id});
    }

    for (const auto& source : net.sources) {
        const int bi = net.bus_index(source.bus);
        if (bi < 0) {
            issues.push_back({"dangling_source", source.bus});
        }
        if (std::abs(source.sequence_voltage_pu.positive) <= 0.0) {
            issues.push_back({"bad_source_voltage", source.bus});
        }
    }

    for (const auto& load : net.loads) {
        const int bi = net.bus_index(load.bus);
        if (bi < 0) {
            issues.push_back({"dangling_load", load.bus});
        } else if (load.phase == Conductor::N || !net.buses[bi].has(load.phase)) {
            issues.push_back({"missing_conductor",
                              "load at " + load.bus + ":" + conductor_name(load.phase)});
        }
    }

    for (const auto& machine : net.machines) {
        const int bi = net.bus_index(machine.bus);
        if (bi < 0) {
            issues.push_back({"dangling_machine", machine.bus});
        } else {
            for (auto c : {Conductor::A, Conductor::B, Conductor::C}) {
                if (!net.buses[bi].has(c)) {
                    issues.push_back({"missing_conductor", "machine at " + machine.bus});
                    break;
                }
            }
        }
        if (machine.rating_kva <= 0.0 || machine.power_factor <= 0.0 ||
            machine.power_factor > 1.0) {
            issues.push_back({"bad_machine", machine.bus});
        }
    }

    std::set<std::string> vsc_ids;
    for (const auto& vsc : net.vscs) {
        if (!vsc_ids.insert(vsc.id).second) issues.push_back({"duplicate_vsc", vsc.id});
        check_vsc(net, vsc, issues);
    }

    if (!issues.empty()) return issues;  // reference checks below assume resolvable ids

    // Exactly one source per branch-connected island.
    Islands galvanic(static_cast<int>(net.buses.size()));
    for (const auto& branch : net.branches) {
        galvanic.join(net.bus_index(branch.from_bus), net.bus_index(branch.to_bus));
    }
    std::map<int, int> sources_per_island;
    for (std::size_t k = 0; k < net.buses.size(); ++k) sources_per_island[galvanic.find(k)] = 0;
    for (const auto& source : net.sources) {
        sources_per_island[galvanic.find(net.bus_index(source.bus))]++;
    }
    for (const auto& [root, count] : sources_per_island) {
        if (count == 0) issues.push_back({"no_source", net.buses[root].id});
        if (count > 1) issues.push_back({"multiple_sources", net.buses[root].id});
    }

    // The whole system must hang together once device couplings count.
    Islands coupled = galvanic;
    for (const auto& vsc : net.vscs) {
        for (std::size_t j = 1; j < vsc.legs.size(); ++j) {
            coupled.join(net.bus_index(vsc.legs[0].bus), net.bus_index(vsc.legs[j].bus));
        }
    }
    if (!net.buses.empty()) {
        const int root = coupled.find(0);
        for (std::size_t k = 1; k < net.buses.size(); ++k) {
            if (coupled.find(k) != root) {
                issues.push_back({"disconnected_component", net.buses[k].id});
                break;
            }
        }
    }
    return issues;
}

NodeMap node_map(const Network& net) {
    NodeMap map;
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        for (int c = 0; c < kNumConductors; ++c) {
            if (net.buses[b].conductors[c]) {
                map.index[{static_cast<int>(b), c}] = static_cast<int>(map.nodes.size());
                map.nodes.emplace_back(static_cast<int>(b), c);
            }
        }
    }
    return map;
}

Eigen::SparseMatrix<Phasor> admittance(const Network& net, const NodeMap& map) {
    std::vector<Eigen::Triplet<Phasor>> triplets;
    for (const auto& branch : net.branches) {
        const auto conductors = branch_conductors(net, branch);
        const int n = static_cast<int>(conductors.size());
        CMat block(n, n);
        for (int r = 0; r < n; ++r) {
            for (int s = 0; s < n; ++s) {
                block(r, s) = branch.impedance_ohm(static_cast<int>(conductors[r]),
                                                   static_cast<int>(conductors[s]));
            }
        }
        Eigen::FullPivLU<CMat> lu(block);
        if (!lu.isInvertible()) {
            throw std::runtime_error("singular impedance block on branch " + branch.id);
        }
        const CMat y = lu.inverse();
        const int fi = net.bus_index(branch.from_bus);
        const int ti = net.bus_index(branch.to_bus);
        for (int r = 0; r < n; ++r) {
            const int fr = map.at(fi, conductors[r]);
            const int tr = map.at(ti, conductors[r]);
            for (int s = 0; s < n; ++s) {
                const int fs = map.at(fi, conductors[s]);
                const int ts = map.at(ti, conductors[s]);
                triplets.emplace_back(fr, fs, y(r, s));
                triplets.emplace_back(tr, ts, y(r, s));
                triplets.emplace_back(fr, ts, -y(r, s));
                triplets.emplace_back(tr, fs, -y(r, s));
            }
        }
    }
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        const auto& bus = net.buses[b];
        if (bus.grounding_ohm && bus.has(Conductor::N)) {
            const Real g = *bus.grounding_ohm > 0.0 ? 1.0 / *bus.grounding_ohm : 1e12;
            const int node = map.at(static_cast<int>(b), Conductor::N);
            triplets.emplace_back(node, node, Phasor(g, 0.0));
        }
    }
    Eigen::SparseMatrix<Phasor> y(map.size(), map.size());
    y.setFromTriplets(triplets.begin(), triplets.end());
    return y;
}

std::array<Phasor, kNumConductors> source_emf_v(const Network& net, const Source& source) {
    const Bus& bus = net.bus(source.bus);
    const PhaseTriple phase = to_phase(source.sequence_voltage_pu) * bus.v_nominal_v;
    return {phase(0), phase(1), phase(2), Phasor(0.0, 0.0)};
}

std::vector<Load> effective_loads(const Network& net) {
    std::vector<Load> loads = net.loads;
    for (const auto& machine : net.machines) {
        const Real q_kvar =
            machine.active_power_kw * std::tan(std::acos(machine.power_factor));
        for (auto c : {Conductor::A, Conductor::B, Conductor::C}) {
            loads.push_back({machine.bus, c, machine.active_power_kw / 3.0, q_kvar / 3.0});
        }
    }
    return loads;
}

Mat4c sequence_impedance_matrix(const Phasor& z1, const Phasor& z0, const Phasor& zn) {
    const Phasor zs = (z0 + 2.0 * z1) / 3.0;
    const Phasor zm = (z0 - z1) / 3.0;
    Mat4c z = Mat4c::Zero();
    for (int r = 0; r < 3; ++r) {
        for (int s = 0; s < 3; ++s) z(r, s) = r == s ? zs : zm;
    }
    z(3, 3) = zn;
    return z;
}

}  // namespace ropf

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ropf/power_quality.hpp"
#include "ropf/types.hpp"
#include "ropf/vsc.hpp"

namespace ropf {

struct Bus {
    std::string id;
    std::array<bool, kNumConductors> conductors{true, true, true, true};
    Real v_nominal_v = 230.0;  // phase-to-neutral
    Real v_min_pu = 0.94;
    Real v_max_pu = 1.10;
    /// Neutral-to-earth resistance; unset means ungrounded. Zero pins the
    /// neutral to earth exactly.
    std::optional<Real> grounding_ohm;
    std::optional<Real> vneg_limit_pu;

    bool has(Conductor c) const { return conductors[static_cast<int>(c)]; }
};

struct Branch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    /// Series impedance, conductor-ordered a,b,c,n. Rows/columns of
    /// conductors absent at either endpoint are ignored.
    Mat4c impedance_ohm = Mat4c::Zero();
    std::array<Real, kNumConductors> ampacity_a{
        std::numeric_limits<Real>::infinity(), std::numeric_limits<Real>::infinity(),
        std::numeric_limits<Real>::infinity(), std::numeric_limits<Real>::infinity()};
};

/// Thevenin source: a sequence-frame EMF (per unit of the bus nominal)
/// behind a 4x4 short-circuit impedance. The EMF star point is earthed.
struct Source {
    std::string bus;
    SequenceTriple sequence_voltage_pu{Phasor(0, 0), Phasor(1, 0), Phasor(0, 0)};
    Mat4c short_circuit_ohm = Mat4c::Zero();
};

/// Constant-power phase-to-neutral load on a single phase conductor.
struct Load {
    std::string bus;
    Conductor phase = Conductor::A;
    Real p_kw = 0.0;
    Real q_kvar = 0.0;
};

struct Network {
    Real frequency_hz = 50.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Source> sources;
    std::vector<Load> loads;
    std::vector<InductionMachine> machines;
    std::vector<VscSpec> vscs;

    int bus_index(const std::string& id) const;
    const Bus& bus(const std::string& id) const;
    Real omega() const { return 2.0 * M_PI * frequency_hz; }
};

struct Issue {
    std::string code;
    std::string detail;
};

/// Structural validation; empty result means every invariant holds and
/// all references resolve.
std::vector<Issue> validate(const Network& net);

/// Dense index of the (bus, conductor) nodes actually present.
struct NodeMap {
    std::map<std::pair<int, int>, int> index;  // (bus idx, conductor) -> node
    std::vector<std::pair<int, int>> nodes;    // node -> (bus idx, conductor)

    int at(int bus, Conductor c) const { return index.at({bus, static_cast<int>(c)}); }
    bool contains(int bus, Conductor c) const {
        return index.count({bus, static_cast<int>(c)}) > 0;
    }
    int size() const { return static_cast<int>(nodes.size()); }
};

NodeMap node_map(const Network& net);

/// Conductors carried by a branch: those present at both endpoints.
std::vector<Conductor> branch_conductors(const Network& net, const Branch& branch);

/// Nodal admittance over the node map: branch stamps plus grounding
/// paths (sources and devices are injections, not part of this matrix).
/// Solid grounding is stamped as a large finite conductance here; the
/// solvers treat it exactly. Throws on a singular impedance block.
Eigen::SparseMatrix<Phasor> admittance(const Network& net, const NodeMap& map);

/// Phase-to-earth EMF of a source at its bus nominal voltage (neutral
/// entry zero).
std::array<Phasor, kNumConductors> source_emf_v(const Network& net, const Source& source);

/// Loads plus induction machines expanded to balanced per-phase
/// constant-power loads at their lagging power factor.
std::vector<Load> effective_loads(const Network& net);

/// Expands sequence-parameter shorthand (z1 positive/negative, z0 zero,
/// zn neutral) to the full conductor-frame matrix.
Mat4c sequence_impedance_matrix(const Phasor& z1, const Phasor& z0, const Phasor& zn);

}  // namespace ropf

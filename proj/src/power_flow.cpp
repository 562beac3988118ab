#include "ropf/power_flow.hpp"

#include <Eigen/LU>
#include <Eigen/SparseLU>
#include <cmath>

#include "ropf/sequence.hpp"

namespace ropf {

namespace {

struct LoadEntry {
    int phase_node = -1;
    int neutral_node = -1;  // -1: earth return, no KCL entry
    Phasor s_va;            // drawn complex power
};

struct SourceEntry {
    int bus = -1;
    std::vector<int> nodes;      // node index per active conductor
    CMat y_sc;                   // inverse of the active short-circuit block
    CVec emf_v;                  // per active conductor
};

struct BranchEntry {
    std::vector<Conductor> conductors;
    std::vector<int> from_nodes;
    std::vector<int> to_nodes;
    CMat z;
    int current_offset = 0;  // complex index into the branch-current block
};

struct LegEntry {
    int node = -1;
};

struct PfContext {
    NodeMap map;
    std::vector<BranchEntry> branches;
    std::vector<SourceEntry> sources;
    std::vector<LoadEntry> loads;
    std::vector<std::vector<LegEntry>> devices;
    std::vector<bool> solid_ground;  // per node: neutral pinned to earth
    std::vector<Real> ground_conductance;  // per node, resistive grounding
    int n_nodes = 0;
    int n_branch_currents = 0;
};

PfContext build_context(const Network& net) {
    PfContext ctx;
    ctx.map = node_map(net);
    ctx.n_nodes = ctx.map.size();
    ctx.solid_ground.assign(ctx.n_nodes, false);
    ctx.ground_conductance.assign(ctx.n_nodes, 0.0);

    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        const auto& bus = net.buses[b];
        if (bus.grounding_ohm && bus.has(Conductor::N)) {
            const int node = ctx.map.at(static_cast<int>(b), Conductor::N);
            if (*bus.grounding_ohm <= 0.0) {
                ctx.solid_ground[node] = true;
            } else {
                ctx.ground_conductance[node] = 1.0 / *bus.grounding_ohm;
            }
        }
    }

    int current_offset = 0;
    for (const auto& branch : net.branches) {
        BranchEntry entry;
        entry.conductors = branch_conductors(net, branch);
        const int n = static_cast<int>(entry.conductors.size());
        entry.z = CMat(n, n);
        const int fi = net.bus_index(branch.from_bus);
        const int ti = net.bus_index(branch.to_bus);
        for (int r = 0; r < n; ++r) {
            entry.from_nodes.push_back(ctx.map.at(fi, entry.conductors[r]));
            entry.to_nodes.push_back(ctx.map.at(ti, entry.conductors[r]));
            for (int s = 0; s < n; ++s) {
                entry.z(r, s) = branch.impedance_ohm(static_cast<int>(entry.conductors[r]),
                                                     static_cast<int>(entry.conductors[s]));
            }
        }
        entry.current_offset = current_offset;
        current_offset += n;
        ctx.branches.push_back(std::move(entry));
    }
    ctx.n_branch_currents = current_offset;

    for (const auto& source : net.sources) {
        SourceEntry entry;
        entry.bus = net.bus_index(source.bus);
        const auto& bus = net.buses[entry.bus];
        std::vector<int> active;
        for (int c = 0; c < kNumConductors; ++c) {
            if (bus.conductors[c]) active.push_back(c);
        }
        const int n = static_cast<int>(active.size());
        CMat z(n, n);
        entry.emf_v = CVec(n);
        const auto emf = source_emf_v(net, source);
        for (int r = 0; r < n; ++r) {
            entry.nodes.push_back(ctx.map.at(entry.bus, static_cast<Conductor>(active[r])));
            entry.emf_v(r) = emf[active[r]];
            for (int s = 0; s < n; ++s) z(r, s) = source.short_circuit_ohm(active[r], active[s]);
        }
        entry.y_sc = z.fullPivLu().inverse();
        ctx.sources.push_back(std::move(entry));
    }

    for (const auto& load : effective_loads(net)) {
        LoadEntry entry;
        const int bi = net.bus_index(load.bus);
        entry.phase_node = ctx.map.at(bi, load.phase);
        if (net.buses[bi].has(Conductor::N)) {
            entry.neutral_node = ctx.map.at(bi, Conductor::N);
        }
        entry.s_va = Phasor(load.p_kw * 1e3, load.q_kvar * 1e3);
        ctx.loads.push_back(entry);
    }

    for (const auto& vsc : net.vscs) {
        std::vector<LegEntry> legs;
        for (const auto& leg : vsc.legs) {
            legs.push_back({ctx.map.at(net.bus_index(leg.bus), leg.conductor)});
        }
        ctx.devices.push_back(std::move(legs));
    }
    return ctx;
}

Phasor load_current(const LoadEntry& load, const CVec& v) {
    Phasor u = v(load.phase_node);
    if (load.neutral_node >= 0) u -= v(load.neutral_node);
    const Real mag2 = std::norm(u);
    if (mag2 < 1e-12) {
        throw std::runtime_error("load terminal voltage collapsed during evaluation");
    }
    return std::conj(load.s_va / u);
}

// d(I_L)/d(u_re, u_im) as a 2x2 real block.
Eigen::Matrix2d load_current_jacobian(const LoadEntry& load, const CVec& v) {
    Phasor u = v(load.phase_node);
    if (load.neutral_node >= 0) u -= v(load.neutral_node);
    const Real p = load.s_va.real(), q = load.s_va.imag();
    const Real ur = u.real(), ui = u.imag();
    const Real m2 = ur * ur + ui * ui;
    const Real m4 = m2 * m2;
    Eigen::Matrix2d jac;
    jac(0, 0) = (p * m2 - 2.0 * ur * (p * ur + q * ui)) / m4;
    jac(0, 1) = (q * m2 - 2.0 * ui * (p * ur + q * ui)) / m4;
    jac(1, 0) = (-q * m2 - 2.0 * ur * (p * ui - q * ur)) / m4;
    jac(1, 1) = (p * m2 - 2.0 * ui * (p * ui - q * ur)) / m4;
    return jac;
}

// Complex KCL residuals per node plus complex Ohm residuals per branch row.
void evaluate(const PfContext& ctx, const CVec& v, const CVec& i_br,
              const std::vector<std::vector<Phasor>>& device_currents, CVec& kcl, CVec& ohm) {
    kcl = CVec::Zero(ctx.n_nodes);
    ohm = CVec::Zero(ctx.n_branch_currents);

    for (const auto& branch : ctx.branches) {
        const int n = static_cast<int>(branch.conductors.size());
        for (int r = 0; r < n; ++r) {
            const Phasor current = i_br(branch.current_offset + r);
            kcl(branch.from_nodes[r]) += current;
            kcl(branch.to_nodes[r]) -= current;
            Phasor drop = v(branch.from_nodes[r]) - v(branch.to_nodes[r]);
            for (int s = 0; s < n; ++s) drop -= branch.z(r, s) * i_br(branch.current_offset + s);
            ohm(branch.current_offset + r) = drop;
        }
    }
    for (const auto& source : ctx.sources) {
        const int n = static_cast<int>(source.nodes.size());
        CVec dv(n);
        for (int r = 0; r < n; ++r) dv(r) = source.emf_v(r) - v(source.nodes[r]);
        const CVec i_src = source.y_sc * dv;
        for (int r = 0; r < n; ++r) kcl(source.nodes[r]) -= i_src(r);
    }
    for (const auto& load : ctx.loads) {
        const Phasor i_load = load_current(load, v);
        kcl(load.phase_node) += i_load;
        if (load.neutral_node >= 0) kcl(load.neutral_node) -= i_load;
    }
    for (int node = 0; node < ctx.n_nodes; ++node) {
        if (ctx.ground_conductance[node] > 0.0) {
            kcl(node) += ctx.ground_conductance[node] * v(node);
        }
    }
    for (std::size_t d = 0; d < ctx.devices.size(); ++d) {
        if (d >= device_currents.size()) break;
        for (std::size_t j = 0; j < ctx.devices[d].size(); ++j) {
            if (j < device_currents[d].size()) {
                kcl(ctx.devices[d][j].node) -= device_currents[d][j];
            }
        }
    }
    // neutral nodes pinned to earth take any mismatch into the ground path
    for (int node = 0; node < ctx.n_nodes; ++node) {
        if (ctx.solid_ground[node]) kcl(node) = v(node);  // replaced by V = 0 rows
    }
}

void add_complex_entry(std::vector<Triplet>& triplets, int row, int col, const Phasor& y) {
    triplets.emplace_back(2 * row, 2 * col, y.real());
    triplets.emplace_back(2 * row, 2 * col + 1, -y.imag());
    triplets.emplace_back(2 * row + 1, 2 * col, y.imag());
    triplets.emplace_back(2 * row + 1, 2 * col + 1, y.real());
}

}  // namespace

SystemState blank_state(const Network& net) {
    SystemState state;
    const NodeMap map = node_map(net);
    state.node_voltage_v = CVec::Zero(map.size());
    for (const auto& branch : net.branches) {
        state.branch_current_a.push_back(
            CVec::Zero(static_cast<int>(branch_conductors(net, branch).size())));
    }
    for (const auto& vsc : net.vscs) {
        state.device_current_a.push_back(CVec::Zero(static_cast<int>(vsc.legs.size())));
    }
    return state;
}

SystemState flat_state(const Network& net) {
    SystemState state = blank_state(net);
    const NodeMap map = node_map(net);

    // island -> source sequence EMF (pu)
    std::vector<int> island(net.buses.size());
    for (std::size_t b = 0; b < net.buses.size(); ++b) island[b] = static_cast<int>(b);
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& branch : net.branches) {
            const int f = net.bus_index(branch.from_bus);
            const int t = net.bus_index(branch.to_bus);
            const int m = std::min(island[f], island[t]);
            if (island[f] != m || island[t] != m) {
                island[f] = island[t] = m;
                changed = true;
            }
        }
    }
    std::map<int, SequenceTriple> island_seq;
    for (const auto& source : net.sources) {
        island_seq[island[net.bus_index(source.bus)]] = source.sequence_voltage_pu;
    }

    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        SequenceTriple seq{Phasor(0, 0), Phasor(1, 0), Phasor(0, 0)};
        auto it = island_seq.find(island[b]);
        if (it != island_seq.end()) seq = it->second;
        const PhaseTriple profile = to_phase(seq) * net.buses[b].v_nominal_v;
        for (int c = 0; c < 3; ++c) {
            const auto cond = static_cast<Conductor>(c);
            if (net.buses[b].has(cond)) {
                state.node_voltage_v(map.at(static_cast<int>(b), cond)) = profile(c);
            }
        }
    }
    return state;
}

ResidualReport residuals(const Network& net, const SystemState& state) {
    const PfContext ctx = build_context(net);

    CVec i_br = CVec::Zero(ctx.n_branch_currents);
    for (std::size_t k = 0; k < ctx.branches.size(); ++k) {
        const auto& entry = ctx.branches[k];
        for (int r = 0; r < static_cast<int>(entry.conductors.size()); ++r) {
            i_br(entry.current_offset + r) = state.branch_current_a[k](r);
        }
    }
    std::vector<std::vector<Phasor>> device_currents;
    for (const auto& legs : state.device_current_a) {
        device_currents.emplace_back(legs.data(), legs.data() + legs.size());
    }

    CVec kcl, ohm;
    evaluate(ctx, state.node_voltage_v, i_br, device_currents, kcl, ohm);

    ResidualReport report;
    for (int node = 0; node < ctx.n_nodes; ++node) {
        if (ctx.solid_ground[node]) {
            report.ohm_inf_norm_v = std::max(report.ohm_inf_norm_v, std::abs(kcl(node)));
        } else {
            report.kcl_inf_norm_a = std::max(report.kcl_inf_norm_a, std::abs(kcl(node)));
        }
    }
    for (int r = 0; r < ctx.n_branch_currents; ++r) {
        report.ohm_inf_norm_v = std::max(report.ohm_inf_norm_v, std::abs(ohm(r)));
    }

    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        const auto op = device_operating_point(net, ctx.map, state, static_cast<int>(d));
        Phasor balance{0, 0};
        for (const auto& i : op.leg_currents_a) balance += i;
        report.device_inf_norm = std::max(report.device_inf_norm, std::abs(balance));
        const Real p = dc_power(op);
        const auto& range = net.vscs[d].dc_link.dc_source_power_w;
        Real gap = 0.0;
        if (p < range.min_w) gap = range.min_w - p;
        if (p > range.max_w) gap = p - range.max_w;
        report.device_inf_norm = std::max(report.device_inf_norm, gap);
    }
    return report;
}

PowerFlowResult solve(const Network& net, const std::vector<std::vector<Phasor>>& device_setpoints,
                      const PowerFlowOptions& options, const SystemState* warm_start) {
    const PfContext ctx = build_context(net);
    PowerFlowResult result;
    result.state = warm_start ? *warm_start : flat_state(net);
    if (result.state.node_voltage_v.size() != ctx.n_nodes) {
        result.status = SolveStatus::NumericalBreakdown;
        result.message = "warm start has wrong dimensions";
        return result;
    }

    std::vector<std::vector<Phasor>> devices = device_setpoints;
    devices.resize(net.vscs.size());
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        devices[d].resize(net.vscs[d].legs.size(), Phasor(0, 0));
        // keep the reported state in sync with the setpoints
        result.state.device_current_a[d] =
            Eigen::Map<const CVec>(devices[d].data(), devices[d].size());
    }

    CVec v = result.state.node_voltage_v;
    CVec i_br = CVec::Zero(ctx.n_branch_currents);
    for (std::size_t k = 0; k < ctx.branches.size(); ++k) {
        const auto& entry = ctx.branches[k];
        for (int r = 0; r < static_cast<int>(entry.conductors.size()); ++r) {
            i_br(entry.current_offset + r) = result.state.branch_current_a[k](r);
        }
    }

    const int unknowns = 2 * (ctx.n_nodes + ctx.n_branch_currents);
    CVec kcl, ohm;

    auto residual_norm = [&](const CVec& vv, const CVec& ii) {
        CVec k, o;
        evaluate(ctx, vv, ii, devices, k, o);
        Real norm = 0.0;
        for (int r = 0; r < k.size(); ++r) norm = std::max(norm, std::abs(k(r)));
        for (int r = 0; r < o.size(); ++r) norm = std::max(norm, std::abs(o(r)));
        return norm;
    };

    try {
        for (result.iterations = 0; result.iterations < options.max_iterations;
             ++result.iterations) {
            evaluate(ctx, v, i_br, devices, kcl, ohm);
            Real norm = 0.0;
            for (int r = 0; r < kcl.size(); ++r) norm = std::max(norm, std::abs(kcl(r)));
            for (int r = 0; r < ohm.size(); ++r) norm = std::max(norm, std::abs(ohm(r)));
            result.residual_inf = norm;
            if (norm < options.tolerance) {
                result.status = SolveStatus::Converged;
                result.state.node_voltage_v = v;
                for (std::size_t k2 = 0; k2 < ctx.branches.size(); ++k2) {
                    const auto& entry = ctx.branches[k2];
                    for (int r = 0; r < static_cast<int>(entry.conductors.size()); ++r) {
                        result.state.branch_current_a[k2](r) = i_br(entry.current_offset + r);
                    }
                }
                return result;
            }

            // Assemble the Jacobian. Row/col layout: nodes first (2 per
            // complex), then branch currents.
            std::vector<Triplet> triplets;
            Vec rhs = Vec::Zero(unknowns);
            const int col_i0 = ctx.n_nodes;

            for (int node = 0; node < ctx.n_nodes; ++node) {
                rhs(2 * node) = -kcl(node).real();
                rhs(2 * node + 1) = -kcl(node).imag();
            }
            for (int r = 0; r < ctx.n_branch_currents; ++r) {
                rhs(2 * (col_i0 + r)) = -ohm(r).real();
                rhs(2 * (col_i0 + r) + 1) = -ohm(r).imag();
            }

            for (const auto& branch : ctx.branches) {
                const int n = static_cast<int>(branch.conductors.size());
                for (int r = 0; r < n; ++r) {
                    const int cur = col_i0 + branch.current_offset + r;
                    if (!ctx.solid_ground[branch.from_nodes[r]]) {
                        add_complex_entry(triplets, branch.from_nodes[r], cur, Phasor(1, 0));
                    }
                    if (!ctx.solid_ground[branch.to_nodes[r]]) {
                        add_complex_entry(triplets, branch.to_nodes[r], cur, Phasor(-1, 0));
                    }
                    const int row = col_i0 + branch.current_offset + r;
                    add_complex_entry(triplets, row, branch.from_nodes[r], Phasor(1, 0));
                    add_complex_entry(triplets, row, branch.to_nodes[r], Phasor(-1, 0));
                    for (int s = 0; s < n; ++s) {
                        add_complex_entry(triplets, row, col_i0 + branch.current_offset + s,
                                          -branch.z(r, s));
                    }
                }
            }
            for (const auto& source : ctx.sources) {
                const int n = static_cast<int>(source.nodes.size());
                for (int r = 0; r < n; ++r) {
                    if (ctx.solid_ground[source.nodes[r]]) continue;
                    for (int s = 0; s < n; ++s) {
                        add_complex_entry(triplets, source.nodes[r], source.nodes[s],
                                          source.y_sc(r, s));
                    }
                }
            }
            for (const auto& load : ctx.loads) {
                const Eigen::Matrix2d jac = load_current_jacobian(load, v);
                auto stamp = [&](int row_node, Real sign_row) {
                    if (ctx.solid_ground[row_node]) return;
                    auto stamp_col = [&](int col_node, Real sign_col) {
                        triplets.emplace_back(2 * row_node, 2 * col_node,
                                              sign_row * sign_col * jac(0, 0));
                        triplets.emplace_back(2 * row_node, 2 * col_node + 1,
                                              sign_row * sign_col * jac(0, 1));
                        triplets.emplace_back(2 * row_node + 1, 2 * col_node,
                                              sign_row * sign_col * jac(1, 0));
                        triplets.emplace_back(2 * row_node + 1, 2 * col_node + 1,
                                              sign_row * sign_col * jac(1, 1));
                    };
                    stamp_col(load.phase_node, 1.0);
                    if (load.neutral_node >= 0) stamp_col(load.neutral_node, -1.0);
                };
                stamp(load.phase_node, 1.0);
                if (load.neutral_node >= 0) stamp(load.neutral_node, -1.0);
            }
            for (int node = 0; node < ctx.n_nodes; ++node) {
                if (ctx.ground_conductance[node] > 0.0 && !ctx.solid_ground[node]) {
                    add_complex_entry(triplets, node, node,
                                      Phasor(ctx.ground_conductance[node], 0.0));
                }
                if (ctx.solid_ground[node]) {
                    add_complex_entry(triplets, node, node, Phasor(1, 0));
                }
            }

            Vec dx(unknowns);
            if (unknowns < options.dense_threshold) {
                Mat dense = Mat::Zero(unknowns, unknowns);
                for (const auto& t : triplets) dense(t.row(), t.col()) += t.value();
                Eigen::PartialPivLU<Mat> lu(dense);
                dx = lu.solve(rhs);
            } else {
                SpMat jac(unknowns, unknowns);
                jac.setFromTriplets(triplets.begin(), triplets.end());
                Eigen::SparseLU<SpMat> lu(jac);
                if (lu.info() != Eigen::Success) {
                    result.status = SolveStatus::SingularJacobian;
                    result.message = "sparse factorization failed";
                    return result;
                }
                dx = lu.solve(rhs);
            }
            if (!dx.allFinite()) {
                result.status = SolveStatus::SingularJacobian;
                result.message = "Newton step is not finite";
                return result;
            }

            // Backtrack if the full step overshoots.
            Real step = 1.0;
            for (int back = 0; back < 5; ++back) {
                CVec v_new = v;
                CVec i_new = i_br;
                for (int node = 0; node < ctx.n_nodes; ++node) {
                    v_new(node) += step * Phasor(dx(2 * node), dx(2 * node + 1));
                }
                for (int r = 0; r < ctx.n_branch_currents; ++r) {
                    i_new(r) += step * Phasor(dx(2 * (col_i0 + r)), dx(2 * (col_i0 + r) + 1));
                }
                if (residual_norm(v_new, i_new) < norm || back == 4) {
                    v = v_new;
                    i_br = i_new;
                    break;
                }
                step *= 0.5;
            }
        }
    } catch (const std::exception& e) {
        result.status = SolveStatus::NumericalBreakdown;
        result.message = e.what();
        return result;
    }

    result.status = SolveStatus::MaxIterations;
    result.message = "no convergence within the iteration budget";
    result.state.node_voltage_v = v;
    for (std::size_t k = 0; k < ctx.branches.size(); ++k) {
        const auto& entry = ctx.branches[k];
        for (int r = 0; r < static_cast<int>(entry.conductors.size()); ++r) {
            result.state.branch_current_a[k](r) = i_br(entry.current_offset + r);
        }
    }
    return result;
}

PhaseTriple bus_phase_voltages(const Network& net, const NodeMap& map, const SystemState& state,
                               int bus_index) {
    PhaseTriple v = PhaseTriple::Zero();
    Phasor v_n{0, 0};
    if (net.buses[bus_index].has(Conductor::N)) {
        v_n = state.node_voltage_v(map.at(bus_index, Conductor::N));
    }
    for (int c = 0; c < 3; ++c) {
        const auto cond = static_cast<Conductor>(c);
        if (net.buses[bus_index].has(cond)) {
            v(c) = state.node_voltage_v(map.at(bus_index, cond)) - v_n;
        }
    }
    return v;
}

VscOperatingPoint device_operating_point(const Network& net, const NodeMap& map,
                                         const SystemState& state, int vsc_index) {
    VscOperatingPoint op;
    const auto& vsc = net.vscs[vsc_index];
    for (std::size_t j = 0; j < vsc.legs.size(); ++j) {
        const auto& leg = vsc.legs[j];
        op.terminal_voltages_v.push_back(
            state.node_voltage_v(map.at(net.bus_index(leg.bus), leg.conductor)));
        op.leg_currents_a.push_back(state.device_current_a[vsc_index](static_cast<int>(j)));
    }
    return op;
}

}  // namespace ropf

#include "ropf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "ropf/sequence.hpp"

namespace ropf {

namespace {

// Apex rounding of the smoothed magnitude trackers used by the
// derating-plus-ripple objective.
constexpr Real kVnegEpsilonPu = 1e-3;
constexpr Real kRippleEpsilonFrac = 0.005;  // of the device power scale

// Accumulate coeff * (complex var) into a (re, im) expression pair.
void add_complex_linear(QuadExpr& re, QuadExpr& im, int var, const Phasor& coeff) {
    re.add_linear(var, coeff.real());
    re.add_linear(var + 1, -coeff.imag());
    im.add_linear(var, coeff.imag());
    im.add_linear(var + 1, coeff.real());
}

// Accumulate sign * a * b (or sign * a * conj(b)) into the pair.
void add_complex_product(QuadExpr& re, QuadExpr& im, int a, int b, bool conjugate_b, Real sign) {
    if (conjugate_b) {
        re.add_quadratic(a, b, sign);
        re.add_quadratic(a + 1, b + 1, sign);
        im.add_quadratic(a + 1, b, sign);
        im.add_quadratic(a, b + 1, -sign);
    } else {
        re.add_quadratic(a, b, sign);
        re.add_quadratic(a + 1, b + 1, -sign);
        im.add_quadratic(a, b + 1, sign);
        im.add_quadratic(a + 1, b, sign);
    }
}

struct LoadInfo {
    int phase_node = -1;
    int neutral_node = -1;
    Phasor s_va;
};

struct Builder {
    const OpfProblem& problem;
    const Network& net;
    AssembledOpf out;
    std::vector<Real> scales;
    std::vector<LoadInfo> loads;
    Real i_scale = 100.0;
    Real s_scale = 1.0;

    explicit Builder(const OpfProblem& p) : problem(p), net(p.network) {}

    int new_var(Real scale) {
        scales.push_back(scale);
        return out.vars.count++;
    }
    int new_complex(Real scale) {
        const int idx = new_var(scale);
        new_var(scale);
        return idx;
    }
    void add_equality(ScalarFunc f) { out.nlp.equalities.push_back(std::move(f)); }
    void add_inequality(ScalarFunc f) { out.nlp.inequalities.push_back(std::move(f)); }

    void build();
    void index_variables();
    void network_rows();
    void device_rows();
    void operating_limits();
    void objective_rows();

    QuadExpr vneg_expr(int bus, bool imag_part) const;
    void ripple_expr(int vsc, QuadExpr& re, QuadExpr& im, Real scale) const;
    int leg_voltage_var(int vsc, int leg) const;
};

int Builder::leg_voltage_var(int vsc, int leg) const {
    const auto& spec = net.vscs[vsc].legs[leg];
    return out.vars.node_voltage[out.vars.map.at(net.bus_index(spec.bus), spec.conductor)];
}

void Builder::index_variables() {
    auto& vars = out.vars;
    vars.map = node_map(net);

    Real max_leg = 0.0;
    for (const auto& vsc : net.vscs) {
        for (const auto& leg : vsc.legs) {
            if (std::isfinite(leg.i_max_a)) max_leg = std::max(max_leg, leg.i_max_a);
        }
    }
    i_scale = std::max(50.0, 2.0 * max_leg);
    Real vnom_max = 230.0;
    for (const auto& bus : net.buses) vnom_max = std::max(vnom_max, bus.v_nominal_v);
    s_scale = 3.0 * vnom_max * i_scale;

    for (int node = 0; node < vars.map.size(); ++node) {
        const auto [bus, cond] = vars.map.nodes[node];
        (void)cond;
        vars.node_voltage.push_back(new_complex(net.buses[bus].v_nominal_v));
    }
    for (const auto& branch : net.branches) {
        std::vector<int> slots;
        for (std::size_t c = 0; c < branch_conductors(net, branch).size(); ++c) {
            slots.push_back(new_complex(i_scale));
        }
        vars.branch_current.push_back(slots);
    }
    for (const auto& source : net.sources) {
        std::vector<int> slots;
        const auto& bus = net.bus(source.bus);
        for (int c = 0; c < kNumConductors; ++c) {
            if (bus.conductors[c]) slots.push_back(new_complex(i_scale));
        }
        vars.source_current.push_back(slots);
    }
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        if (net.buses[b].grounding_ohm && net.buses[b].has(Conductor::N)) {
            vars.grounded_nodes.push_back(vars.map.at(static_cast<int>(b), Conductor::N));
            vars.ground_current.push_back(new_complex(i_scale));
        }
    }
    for (const auto& load : effective_loads(net)) {
        const int bi = net.bus_index(load.bus);
        LoadInfo info;
        info.phase_node = vars.map.at(bi, load.phase);
        info.neutral_node =
            net.buses[bi].has(Conductor::N) ? vars.map.at(bi, Conductor::N) : -1;
        info.s_va = Phasor(load.p_kw * 1e3, load.q_kvar * 1e3);
        loads.push_back(info);
        vars.load_current.push_back({new_complex(i_scale)});
    }
    for (const auto& vsc : net.vscs) {
        std::vector<int> slots;
        for (std::size_t j = 0; j < vsc.legs.size(); ++j) slots.push_back(new_complex(i_scale));
        vars.leg_current.push_back(slots);
        const auto& range = vsc.dc_link.dc_source_power_w;
        vars.dc_source_power.push_back(range.is_fixed() ? -1 : new_var(s_scale));
    }

    if (problem.objective.kind == ObjectiveKind::MinMaxPhaseCurrent) {
        vars.epigraph = new_var(i_scale);
    } else {
        std::set<int> machine_buses;
        for (const auto& machine : net.machines) machine_buses.insert(net.bus_index(machine.bus));
        for (int bus : machine_buses) {
            vars.machine_bus_index.push_back(bus);
            vars.vneg_aux.push_back(new_var(0.02));
        }
        for (std::size_t d = 0; d < net.vscs.size(); ++d) {
            vars.ripple_aux.push_back(new_var(s_scale));
        }
    }
}

QuadExpr Builder::vneg_expr(int bus, bool imag_part) const {
    // (U_a + alpha^2 U_b + alpha U_c) / 3 in per unit of the bus nominal
    QuadExpr re, im;
    const Real inv = 1.0 / (3.0 * net.buses[bus].v_nominal_v);
    const Phasor w[3] = {inv * alpha_power(0), inv * alpha_power(2), inv * alpha_power(1)};
    const bool has_n = net.buses[bus].has(Conductor::N);
    const int vn = has_n ? out.vars.node_voltage[out.vars.map.at(bus, Conductor::N)] : -1;
    Phasor w_sum{0, 0};
    for (int c = 0; c < 3; ++c) {
        const auto cond = static_cast<Conductor>(c);
        if (!net.buses[bus].has(cond)) continue;
        add_complex_linear(re, im, out.vars.node_voltage[out.vars.map.at(bus, cond)], w[c]);
        w_sum += w[c];
    }
    if (vn >= 0) add_complex_linear(re, im, vn, -w_sum);
    return imag_part ? im : re;
}

void Builder::ripple_expr(int vsc, QuadExpr& re, QuadExpr& im, Real scale) const {
    for (std::size_t j = 0; j < net.vscs[vsc].legs.size(); ++j) {
        add_complex_product(re, im, leg_voltage_var(vsc, static_cast<int>(j)),
                            out.vars.leg_current[vsc][j], false, scale);
    }
}

void Builder::network_rows() {
    auto& vars = out.vars;
    const int n_nodes = vars.map.size();

    // KCL accumulators per node
    std::vector<ScalarFunc> kcl_re(n_nodes), kcl_im(n_nodes);

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto& branch = net.branches[k];
        const auto conductors = branch_conductors(net, branch);
        const int fi = net.bus_index(branch.from_bus);
        const int ti = net.bus_index(branch.to_bus);
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            const int from_node = vars.map.at(fi, conductors[r]);
            const int to_node = vars.map.at(ti, conductors[r]);
            const int cur = vars.branch_current[k][r];
            add_complex_linear(kcl_re[from_node].base, kcl_im[from_node].base, cur, {1, 0});
            add_complex_linear(kcl_re[to_node].base, kcl_im[to_node].base, cur, {-1, 0});

            // Ohm row: V_f - V_t - sum Z I = 0
            ScalarFunc ohm_re, ohm_im;
            add_complex_linear(ohm_re.base, ohm_im.base, vars.node_voltage[from_node], {1, 0});
            add_complex_linear(ohm_re.base, ohm_im.base, vars.node_voltage[to_node], {-1, 0});
            for (std::size_t s = 0; s < conductors.size(); ++s) {
                const Phasor z = branch.impedance_ohm(static_cast<int>(conductors[r]),
                                                      static_cast<int>(conductors[s]));
                add_complex_linear(ohm_re.base, ohm_im.base, vars.branch_current[k][s], -z);
            }
            add_equality(std::move(ohm_re));
            add_equality(std::move(ohm_im));
        }
    }

    for (std::size_t k = 0; k < net.sources.size(); ++k) {
        const auto& source = net.sources[k];
        const int bi = net.bus_index(source.bus);
        const auto emf = source_emf_v(net, source);
        std::vector<int> active;
        for (int c = 0; c < kNumConductors; ++c) {
            if (net.buses[bi].conductors[c]) active.push_back(c);
        }
        for (std::size_t r = 0; r < active.size(); ++r) {
            const int node = vars.map.at(bi, static_cast<Conductor>(active[r]));
            add_complex_linear(kcl_re[node].base, kcl_im[node].base, vars.source_current[k][r],
                               {-1, 0});
            // E - V - Z_sc I = 0
            ScalarFunc row_re, row_im;
            row_re.base.add_constant(emf[active[r]].real());
            row_im.base.add_constant(emf[active[r]].imag());
            add_complex_linear(row_re.base, row_im.base, vars.node_voltage[node], {-1, 0});
            for (std::size_t s = 0; s < active.size(); ++s) {
                const Phasor z = source.short_circuit_ohm(active[r], active[s]);
                add_complex_linear(row_re.base, row_im.base, vars.source_current[k][s], -z);
            }
            add_equality(std::move(row_re));
            add_equality(std::move(row_im));
        }
    }

    for (std::size_t g = 0; g < vars.grounded_nodes.size(); ++g) {
        const int node = vars.grounded_nodes[g];
        const auto [bus, cond] = vars.map.nodes[node];
        (void)cond;
        const Real r_g = *net.buses[bus].grounding_ohm;
        add_complex_linear(kcl_re[node].base, kcl_im[node].base, vars.ground_current[g], {1, 0});
        // V_n - R I_g = 0
        ScalarFunc row_re, row_im;
        add_complex_linear(row_re.base, row_im.base, vars.node_voltage[node], {1, 0});
        add_complex_linear(row_re.base, row_im.base, vars.ground_current[g], {-r_g, 0});
        add_equality(std::move(row_re));
        add_equality(std::move(row_im));
    }

    for (std::size_t l = 0; l < loads.size(); ++l) {
        const auto& load = loads[l];
        const int cur = vars.load_current[l][0];
        add_complex_linear(kcl_re[load.phase_node].base, kcl_im[load.phase_node].base, cur,
                           {1, 0});
        if (load.neutral_node >= 0) {
            add_complex_linear(kcl_re[load.neutral_node].base, kcl_im[load.neutral_node].base,
                               cur, {-1, 0});
        }
        // (V_p - V_n) conj(I_L) = S
        ScalarFunc def_re, def_im;
        add_complex_product(def_re.base, def_im.base, vars.node_voltage[load.phase_node], cur,
                            true, 1.0);
        if (load.neutral_node >= 0) {
            add_complex_product(def_re.base, def_im.base, vars.node_voltage[load.neutral_node],
                                cur, true, -1.0);
        }
        def_re.base.add_constant(-load.s_va.real());
        def_im.base.add_constant(-load.s_va.imag());
        add_equality(std::move(def_re));
        add_equality(std::move(def_im));
    }

    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        for (std::size_t j = 0; j < net.vscs[d].legs.size(); ++j) {
            const auto& leg = net.vscs[d].legs[j];
            const int node = vars.map.at(net.bus_index(leg.bus), leg.conductor);
            add_complex_linear(kcl_re[node].base, kcl_im[node].base, vars.leg_current[d][j],
                               {-1, 0});
        }
    }

    for (int node = 0; node < n_nodes; ++node) {
        add_equality(std::move(kcl_re[node]));
        add_equality(std::move(kcl_im[node]));
    }
}

void Builder::device_rows() {
    auto& vars = out.vars;
    out.info.ripple_equality_per_vsc.assign(net.vscs.size(), false);
    out.info.ripple_inequality_per_vsc.assign(net.vscs.size(), false);

    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        const auto& vsc = net.vscs[d];

        // current balance over every leg sharing the dc link
        ScalarFunc bal_re, bal_im;
        for (std::size_t j = 0; j < vsc.legs.size(); ++j) {
            add_complex_linear(bal_re.base, bal_im.base, vars.leg_current[d][j], {1, 0});
        }
        add_equality(std::move(bal_re));
        add_equality(std::move(bal_im));

        // dc power balance sum Re(V conj I) = P_source
        ScalarFunc power;
        QuadExpr unused_im;
        for (std::size_t j = 0; j < vsc.legs.size(); ++j) {
            add_complex_product(power.base, unused_im, leg_voltage_var(d, static_cast<int>(j)),
                                vars.leg_current[d][j], true, 1.0);
        }
        if (vars.dc_source_power[d] >= 0) {
            power.base.add_linear(vars.dc_source_power[d], -1.0);
            const auto& range = vsc.dc_link.dc_source_power_w;
            ScalarFunc low, high;
            low.base.add_linear(vars.dc_source_power[d], -1.0);
            low.base.add_constant(range.min_w);
            high.base.add_linear(vars.dc_source_power[d], 1.0);
            high.base.add_constant(-range.max_w);
            add_inequality(std::move(low));
            add_inequality(std::move(high));
        } else {
            power.base.add_constant(-vsc.dc_link.dc_source_power_w.min_w);
        }
        add_equality(std::move(power));

        // leg limits: zero-rated legs become equalities
        for (std::size_t j = 0; j < vsc.legs.size(); ++j) {
            const Real i_max = vsc.legs[j].i_max_a;
            if (i_max == 0.0) {
                ScalarFunc zr, zi;
                zr.base.add_linear(vars.leg_current[d][j], 1.0);
                zi.base.add_linear(vars.leg_current[d][j] + 1, 1.0);
                add_equality(std::move(zr));
                add_equality(std::move(zi));
                out.info.leg_zero_equalities += 2;
            } else if (std::isfinite(i_max)) {
                ScalarFunc amp;
                amp.base.add_square_pair(vars.leg_current[d][j], vars.leg_current[d][j] + 1, 1.0);
                amp.base.add_constant(-i_max * i_max);
                add_inequality(std::move(amp));
                out.info.leg_ampacity_inequalities++;
            }
        }

        // 2w ripple handling
        if (problem.toggles.ripple_limit && vsc.dc_link.ripple_limit_w) {
            const Real limit = *vsc.dc_link.ripple_limit_w;
            if (limit == 0.0) {
                QuadExpr rip_re, rip_im;
                ripple_expr(static_cast<int>(d), rip_re, rip_im, 1.0 / s_scale);
                ScalarFunc zr, zi;
                zr.base = rip_re;
                zi.base = rip_im;
                add_equality(std::move(zr));
                add_equality(std::move(zi));
                out.info.ripple_equality_per_vsc[d] = true;
            } else {
                QuadExpr rip_re, rip_im;
                ripple_expr(static_cast<int>(d), rip_re, rip_im, 1.0 / limit);
                ScalarFunc cap;
                cap.squares.push_back({1.0, rip_re});
                cap.squares.push_back({1.0, rip_im});
                cap.base.add_constant(-1.0);
                add_inequality(std::move(cap));
                out.info.ripple_inequality_per_vsc[d] = true;
            }
        }
    }
}

void Builder::operating_limits() {
    auto& vars = out.vars;

    if (problem.toggles.branch_ampacity) {
        for (std::size_t k = 0; k < net.branches.size(); ++k) {
            const auto conductors = branch_conductors(net, net.branches[k]);
            for (std::size_t r = 0; r < conductors.size(); ++r) {
                const Real amp = net.branches[k].ampacity_a[static_cast<int>(conductors[r])];
                if (!std::isfinite(amp)) continue;
                ScalarFunc f;
                f.base.add_square_pair(vars.branch_current[k][r], vars.branch_current[k][r] + 1,
                                       1.0);
                f.base.add_constant(-amp * amp);
                add_inequality(std::move(f));
            }
        }
    }

    if (problem.toggles.voltage_bounds) {
        for (std::size_t b = 0; b < net.buses.size(); ++b) {
            const auto& bus = net.buses[b];
            const bool has_n = bus.has(Conductor::N);
            const int vn =
                has_n ? vars.node_voltage[vars.map.at(static_cast<int>(b), Conductor::N)] : -1;
            for (int c = 0; c < 3; ++c) {
                const auto cond = static_cast<Conductor>(c);
                if (!bus.has(cond)) continue;
                const int vp = vars.node_voltage[vars.map.at(static_cast<int>(b), cond)];
                const Real inv = 1.0 / bus.v_nominal_v;
                QuadExpr u_re, u_im;
                add_complex_linear(u_re, u_im, vp, {inv, 0});
                if (vn >= 0) add_complex_linear(u_re, u_im, vn, {-inv, 0});

                ScalarFunc upper;
                upper.squares.push_back({1.0, u_re});
                upper.squares.push_back({1.0, u_im});
                upper.base.add_constant(-bus.v_max_pu * bus.v_max_pu);
                add_inequality(std::move(upper));

                ScalarFunc lower;
                lower.squares.push_back({-1.0, u_re});
                lower.squares.push_back({-1.0, u_im});
                lower.base.add_constant(bus.v_min_pu * bus.v_min_pu);
                add_inequality(std::move(lower));
            }
        }
    }

    if (problem.toggles.vneg_limit) {
        for (std::size_t b = 0; b < net.buses.size(); ++b) {
            if (!net.buses[b].vneg_limit_pu) continue;
            const Real limit = *net.buses[b].vneg_limit_pu;
            ScalarFunc f;
            f.squares.push_back({1.0, vneg_expr(static_cast<int>(b), false)});
            f.squares.push_back({1.0, vneg_expr(static_cast<int>(b), true)});
            f.base.add_constant(-limit * limit);
            add_inequality(std::move(f));
        }
    }
}

void Builder::objective_rows() {
    auto& vars = out.vars;

    if (problem.objective.kind == ObjectiveKind::MinMaxPhaseCurrent) {
        int branch_index = -1;
        for (std::size_t k = 0; k < net.branches.size(); ++k) {
            if (net.branches[k].id == problem.objective.target_branch) {
                branch_index = static_cast<int>(k);
            }
        }
        if (branch_index < 0) {
            throw std::runtime_error("objective target branch not found: " +
                                     problem.objective.target_branch);
        }
        out.nlp.objective.base.add_linear(vars.epigraph, 1.0);
        const auto conductors = branch_conductors(net, net.branches[branch_index]);
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            ScalarFunc f;
            f.base.add_square_pair(vars.branch_current[branch_index][r],
                                   vars.branch_current[branch_index][r] + 1, 1.0);
            f.base.add_quadratic(vars.epigraph, vars.epigraph, -1.0);
            add_inequality(std::move(f));
            out.info.epigraph_rows++;
        }
        ScalarFunc nonneg;
        nonneg.base.add_linear(vars.epigraph, -1.0);
        add_inequality(std::move(nonneg));
        return;
    }

    // derating surrogate plus weighted ripple magnitudes
    std::vector<Real> rating_by_bus(vars.machine_bus_index.size(), 0.0);
    for (const auto& machine : net.machines) {
        for (std::size_t k = 0; k < vars.machine_bus_index.size(); ++k) {
            if (vars.machine_bus_index[k] == net.bus_index(machine.bus)) {
                rating_by_bus[k] += machine.rating_kva;
            }
        }
    }
    const auto& curve = problem.derating_curve;
    for (std::size_t k = 0; k < vars.machine_bus_index.size(); ++k) {
        const int m = vars.vneg_aux[k];
        const Real w = problem.objective.derating_weight * rating_by_bus[k];
        out.nlp.objective.base.add_quadratic(m, m, w * curve.a2);
        out.nlp.objective.base.add_linear(m, w * curve.a1);

        // m tracks the smoothed unbalance magnitude exactly:
        // m^2 = |Vneg_pu|^2 + eps^2 with m > 0, so its gradient never
        // degenerates as the unbalance is driven to zero
        ScalarFunc smooth_mag;
        smooth_mag.squares.push_back({1.0, vneg_expr(vars.machine_bus_index[k], false)});
        smooth_mag.squares.push_back({1.0, vneg_expr(vars.machine_bus_index[k], true)});
        smooth_mag.base.add_quadratic(m, m, -1.0);
        smooth_mag.base.add_constant(kVnegEpsilonPu * kVnegEpsilonPu);
        add_equality(std::move(smooth_mag));
        ScalarFunc nonneg;
        nonneg.base.add_linear(m, -1.0);
        add_inequality(std::move(nonneg));
    }
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        const int r = vars.ripple_aux[d];
        out.nlp.objective.base.add_linear(r, problem.objective.ripple_weight);
        QuadExpr rip_re, rip_im;
        ripple_expr(static_cast<int>(d), rip_re, rip_im, 1.0 / s_scale);
        const Real eps_pu = kRippleEpsilonFrac;
        ScalarFunc smooth_mag;
        smooth_mag.squares.push_back({1.0, rip_re});
        smooth_mag.squares.push_back({1.0, rip_im});
        smooth_mag.base.add_quadratic(r, r, -1.0 / (s_scale * s_scale));
        smooth_mag.base.add_constant(eps_pu * eps_pu);
        add_equality(std::move(smooth_mag));
        ScalarFunc nonneg;
        nonneg.base.add_linear(r, -1.0);
        add_inequality(std::move(nonneg));
    }
}

void Builder::build() {
    const auto issues = validate(net);
    if (!issues.empty()) {
        throw std::runtime_error("network validation failed: " + issues.front().code + " (" +
                                 issues.front().detail + ")");
    }
    index_variables();
    network_rows();
    device_rows();
    operating_limits();
    objective_rows();
    out.nlp.n = out.vars.count;
    out.nlp.variable_scale = Eigen::Map<const Vec>(scales.data(), scales.size());
}

SystemState state_from_vector(const AssembledOpf& assembled, const Network& net, const Vec& x) {
    SystemState state;
    const auto& vars = assembled.vars;
    state.node_voltage_v = CVec(vars.map.size());
    for (int node = 0; node < vars.map.size(); ++node) {
        state.node_voltage_v(node) =
            Phasor(x(vars.node_voltage[node]), x(vars.node_voltage[node] + 1));
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        CVec currents(vars.branch_current[k].size());
        for (std::size_t r = 0; r < vars.branch_current[k].size(); ++r) {
            currents(r) = Phasor(x(vars.branch_current[k][r]), x(vars.branch_current[k][r] + 1));
        }
        state.branch_current_a.push_back(currents);
    }
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        CVec currents(vars.leg_current[d].size());
        for (std::size_t j = 0; j < vars.leg_current[d].size(); ++j) {
            currents(j) = Phasor(x(vars.leg_current[d][j]), x(vars.leg_current[d][j] + 1));
        }
        state.device_current_a.push_back(currents);
    }
    return state;
}

}  // namespace

AssembledOpf assemble(const OpfProblem& problem) {
    Builder builder(problem);
    builder.build();
    return std::move(builder.out);
}

Vec starting_point(const AssembledOpf& assembled, const OpfProblem& problem,
                   const SystemState& state) {
    const auto& vars = assembled.vars;
    const Network& net = problem.network;
    Vec x = Vec::Zero(vars.count);

    for (int node = 0; node < vars.map.size(); ++node) {
        x(vars.node_voltage[node]) = state.node_voltage_v(node).real();
        x(vars.node_voltage[node] + 1) = state.node_voltage_v(node).imag();
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        for (std::size_t r = 0; r < vars.branch_current[k].size(); ++r) {
            x(vars.branch_current[k][r]) = state.branch_current_a[k](r).real();
            x(vars.branch_current[k][r] + 1) = state.branch_current_a[k](r).imag();
        }
    }
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        for (std::size_t j = 0; j < vars.leg_current[d].size(); ++j) {
            x(vars.leg_current[d][j]) = state.device_current_a[d](j).real();
            x(vars.leg_current[d][j] + 1) = state.device_current_a[d](j).imag();
        }
    }

    // nodal injection bookkeeping for derived currents
    CVec mismatch = CVec::Zero(vars.map.size());
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto conductors = branch_conductors(net, net.branches[k]);
        const int fi = net.bus_index(net.branches[k].from_bus);
        const int ti = net.bus_index(net.branches[k].to_bus);
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            mismatch(vars.map.at(fi, conductors[r])) += state.branch_current_a[k](r);
            mismatch(vars.map.at(ti, conductors[r])) -= state.branch_current_a[k](r);
        }
    }
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& source = net.sources[s];
        const int bi = net.bus_index(source.bus);
        std::vector<int> active;
        for (int c = 0; c < kNumConductors; ++c) {
            if (net.buses[bi].conductors[c]) active.push_back(c);
        }
        const int n = static_cast<int>(active.size());
        CMat z(n, n);
        CVec dv(n);
        const auto emf = source_emf_v(net, source);
        for (int r = 0; r < n; ++r) {
            dv(r) = emf[active[r]] -
                    state.node_voltage_v(vars.map.at(bi, static_cast<Conductor>(active[r])));
            for (int c2 = 0; c2 < n; ++c2) {
                z(r, c2) = source.short_circuit_ohm(active[r], active[c2]);
            }
        }
        const CVec i_src = z.fullPivLu().solve(dv);
        for (int r = 0; r < n; ++r) {
            x(vars.source_current[s][r]) = i_src(r).real();
            x(vars.source_current[s][r] + 1) = i_src(r).imag();
            mismatch(vars.map.at(bi, static_cast<Conductor>(active[r]))) -= i_src(r);
        }
    }
    {
        const auto all_loads = effective_loads(net);
        for (std::size_t l = 0; l < all_loads.size(); ++l) {
            const auto& load = all_loads[l];
            const int bi = net.bus_index(load.bus);
            const int pn = vars.map.at(bi, load.phase);
            Phasor u = state.node_voltage_v(pn);
            int nn = -1;
            if (net.buses[bi].has(Conductor::N)) {
                nn = vars.map.at(bi, Conductor::N);
                u -= state.node_voltage_v(nn);
            }
            const Phasor s_va(load.p_kw * 1e3, load.q_kvar * 1e3);
            const Phasor i_load = std::abs(u) > 1e-6 ? std::conj(s_va / u) : Phasor(0, 0);
            x(vars.load_current[l][0]) = i_load.real();
            x(vars.load_current[l][0] + 1) = i_load.imag();
            mismatch(pn) += i_load;
            if (nn >= 0) mismatch(nn) -= i_load;
        }
    }
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        for (std::size_t j = 0; j < vars.leg_current[d].size(); ++j) {
            const auto& leg = net.vscs[d].legs[j];
            mismatch(vars.map.at(net.bus_index(leg.bus), leg.conductor)) -=
                state.device_current_a[d](j);
        }
    }
    for (std::size_t g = 0; g < vars.grounded_nodes.size(); ++g) {
        const int node = vars.grounded_nodes[g];
        const auto [bus, cond] = vars.map.nodes[node];
        (void)cond;
        const Real r_g = *net.buses[bus].grounding_ohm;
        Phasor i_g;
        if (r_g > 0.0) {
            i_g = state.node_voltage_v(node) / r_g;
        } else {
            i_g = -mismatch(node);  // absorbs whatever the node carries
        }
        x(vars.ground_current[g]) = i_g.real();
        x(vars.ground_current[g] + 1) = i_g.imag();
    }

    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        if (vars.dc_source_power[d] >= 0) {
            const auto op = device_operating_point(net, vars.map, state, static_cast<int>(d));
            const auto& range = net.vscs[d].dc_link.dc_source_power_w;
            x(vars.dc_source_power[d]) = std::clamp(dc_power(op), range.min_w, range.max_w);
        }
    }

    if (vars.epigraph >= 0) {
        Real t0 = 1.0;
        for (std::size_t k = 0; k < net.branches.size(); ++k) {
            if (net.branches[k].id == problem.objective.target_branch) {
                for (int r = 0; r < state.branch_current_a[k].size(); ++r) {
                    t0 = std::max(t0, std::abs(state.branch_current_a[k](r)));
                }
            }
        }
        x(vars.epigraph) = 1.05 * t0 + 1.0;
    }
    for (std::size_t k = 0; k < vars.vneg_aux.size(); ++k) {
        const int bus = vars.machine_bus_index[k];
        const PhaseTriple u = bus_phase_voltages(net, vars.map, state, bus);
        const Real vneg = std::abs(to_sequence(u).negative) / net.buses[bus].v_nominal_v;
        x(vars.vneg_aux[k]) = std::hypot(vneg, kVnegEpsilonPu);
    }
    for (std::size_t d = 0; d < vars.ripple_aux.size(); ++d) {
        const auto op = device_operating_point(net, vars.map, state, static_cast<int>(d));
        Real vnom = 230.0, rating = 50.0;
        for (const auto& bus : net.buses) vnom = std::max(vnom, bus.v_nominal_v);
        for (const auto& leg : net.vscs[d].legs) {
            if (std::isfinite(leg.i_max_a)) rating = std::max(rating, leg.i_max_a);
        }
        const Real power_scale = 3.0 * vnom * std::max(50.0, 2.0 * rating);
        x(vars.ripple_aux[d]) =
            std::hypot(std::abs(ripple_phasor(op)), kRippleEpsilonFrac * power_scale);
    }
    return x;
}

Real evaluate_objective(const OpfProblem& problem, const SystemState& state) {
    const Network& net = problem.network;
    const NodeMap map = node_map(net);

    if (problem.objective.kind == ObjectiveKind::MinMaxPhaseCurrent) {
        Real worst = 0.0;
        for (std::size_t k = 0; k < net.branches.size(); ++k) {
            if (net.branches[k].id != problem.objective.target_branch) continue;
            for (int r = 0; r < state.branch_current_a[k].size(); ++r) {
                worst = std::max(worst, std::abs(state.branch_current_a[k](r)));
            }
        }
        return worst;
    }

    std::map<std::string, Real> vneg_by_bus;
    for (const auto& machine : net.machines) {
        const int bus = net.bus_index(machine.bus);
        const PhaseTriple u = bus_phase_voltages(net, map, state, bus);
        vneg_by_bus[machine.bus] =
            std::abs(to_sequence(u).negative) / net.buses[bus].v_nominal_v;
    }
    Real cost = derating_cost(net.machines, vneg_by_bus, problem.objective.derating_weight,
                              problem.derating_curve);
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        const auto op = device_operating_point(net, map, state, static_cast<int>(d));
        cost += problem.objective.ripple_weight * std::abs(ripple_phasor(op));
    }
    return cost;
}

OpfSolution solve_opf(const OpfProblem& problem, const SystemState* warm_start,
                      const OpfOptions& options) {
    const Network& net = problem.network;
    AssembledOpf assembled = assemble(problem);

    SystemState base_state;
    if (warm_start) {
        base_state = *warm_start;
    } else {
        const auto pf = solve(net);
        base_state = pf.state;  // even a poor flat start is a usable seed
    }

    std::mt19937 rng(options.seed);
    std::uniform_real_distribution<Real> jitter(-0.05, 0.05);

    struct Candidate {
        NlpResult nlp;
        SystemState state;
        Real objective;
        Real ripple_total;
    };
    std::optional<Candidate> best;
    NlpResult last_failed;
    int starts = std::max(1, options.multi_starts);

    for (int attempt = 0; attempt < starts; ++attempt) {
        Vec x0 = starting_point(assembled, problem, base_state);
        if (attempt > 0) {
            for (std::size_t d = 0; d < assembled.vars.leg_current.size(); ++d) {
                for (int slot : assembled.vars.leg_current[d]) {
                    const Real amp = std::isfinite(net.vscs[d].legs[0].i_max_a)
                                         ? net.vscs[d].legs[0].i_max_a
                                         : 30.0;
                    x0(slot) += jitter(rng) * amp;
                    x0(slot + 1) += jitter(rng) * amp;
                }
            }
        }
        const NlpResult nlp = solve_nlp(assembled.nlp, x0, options.nlp);
        if (nlp.status != NlpStatus::LocalOptimum) {
            last_failed = nlp;
            continue;
        }
        Candidate cand;
        cand.nlp = nlp;
        cand.state = state_from_vector(assembled, net, nlp.x);
        cand.objective = evaluate_objective(problem, cand.state);
        cand.ripple_total = 0.0;
        for (std::size_t d = 0; d < net.vscs.size(); ++d) {
            const auto op =
                device_operating_point(net, assembled.vars.map, cand.state, static_cast<int>(d));
            cand.ripple_total += std::abs(ripple_phasor(op));
        }
        if (!best || cand.objective < best->objective - 1e-9 ||
            (std::abs(cand.objective - best->objective) <= 1e-9 &&
             cand.ripple_total < best->ripple_total)) {
            best = std::move(cand);
        }
    }

    OpfSolution solution;
    solution.stats.starts_tried = starts;
    if (!best) {
        solution.stats.status = last_failed.status == NlpStatus::MaxIterations
                                    ? OpfStatus::MaxIterations
                                    : OpfStatus::InfeasibleDetected;
        solution.stats.message = last_failed.message;
        solution.stats.iterations = last_failed.iterations;
        solution.state =
            last_failed.x.size() ? state_from_vector(assembled, net, last_failed.x) : base_state;
        solution.feasibility = residuals(net, solution.state);
        return solution;
    }

    // polish the network part of the state with a frozen-setpoint power
    // flow so the reported state verifies at solver precision
    SystemState polished = best->state;
    {
        std::vector<std::vector<Phasor>> setpoints;
        for (const auto& legs : best->state.device_current_a) {
            setpoints.emplace_back(legs.data(), legs.data() + legs.size());
        }
        PowerFlowOptions pf_options;
        pf_options.tolerance = 1e-10;
        const auto pf = solve(net, setpoints, pf_options, &best->state);
        if (pf.status == SolveStatus::Converged) polished = pf.state;
    }

    solution.state = polished;
    solution.objective_value = evaluate_objective(problem, polished);
    solution.feasibility = residuals(net, polished);
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        const auto op =
            device_operating_point(net, assembled.vars.map, polished, static_cast<int>(d));
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

    // physical inequality violation of the reported (polished) point
    {
        Vec x_final = starting_point(assembled, problem, polished);
        // auxiliaries sit exactly on their definitions for the check
        if (assembled.vars.epigraph >= 0) {
            x_final(assembled.vars.epigraph) = solution.objective_value;
        }
        // the smoothed-magnitude equalities fix the auxiliaries already;
        // starting_point set them consistently
        Real worst = 0.0;
        // relative to each constraint's own magnitude floor
        const Vec ci = assembled.nlp.inequality_values(x_final);
        for (int j = 0; j < ci.size(); ++j) worst = std::max(worst, ci(j));
        solution.max_inequality_violation = worst;
    }

    solution.stats.status = OpfStatus::LocalOptimum;
    solution.stats.iterations = best->nlp.iterations;
    solution.stats.stationarity = best->nlp.stationarity;

    // the optimizer ran on the smooth shortfall surrogate; the point is
    // only acceptable when the exact piecewise curve prices it the same
    if (problem.objective.kind == ObjectiveKind::DeratingPlusRipple && !net.machines.empty()) {
        Real surrogate = 0.0, exact = 0.0, rating_weighted = 0.0;
        const NodeMap& map = assembled.vars.map;
        for (const auto& machine : net.machines) {
            const int bus = net.bus_index(machine.bus);
            const PhaseTriple u = bus_phase_voltages(net, map, polished, bus);
            const Real vneg = std::abs(to_sequence(u).negative) / net.buses[bus].v_nominal_v;
            const Real w = problem.objective.derating_weight * machine.rating_kva;
            surrogate += w * derating_shortfall_smooth(problem.derating_curve, vneg);
            exact += w * (100.0 - derating_factor(problem.derating_curve, vneg));
            rating_weighted += w * 100.0;
        }
        if (std::abs(surrogate - exact) > 1e-3 * rating_weighted) {
            solution.stats.status = OpfStatus::InfeasibleDetected;
            solution.stats.message = "surrogate and exact derating costs disagree by " +
                                     std::to_string(surrogate - exact);
        }
    }
    return solution;
}

}  // namespace ropf

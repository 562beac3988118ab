#include "ropf/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "ropf/sequence.hpp"

namespace ropf {

namespace {

constexpr Real kSqrt2 = 1.4142135623730950488;

Real wave(const Phasor& rms_phasor, Real omega_t) {
    // x(t) = sqrt(2) |X| cos(wt + angle)
    return kSqrt2 * (rms_phasor.real() * std::cos(omega_t) - rms_phasor.imag() * std::sin(omega_t));
}

void check_config(const OracleConfig& cfg) {
    if (cfg.frequency_hz <= 0.0 || cfg.dt_s <= 0.0 || cfg.duration_s <= 0.0) {
        throw std::runtime_error("oracle: frequency, dt and duration must be positive");
    }
    if (cfg.dt_s > 1.0 / (200.0 * cfg.frequency_hz)) {
        throw std::runtime_error("oracle: dt must resolve the fundamental (dt <= 1/(200 f))");
    }
    if (cfg.duration_s < 20.0 / cfg.frequency_hz) {
        throw std::runtime_error("oracle: duration must cover at least 20 fundamental periods");
    }
    if (cfg.leg_currents_a.size() != 3) {
        throw std::runtime_error("oracle: expected the three phase-leg currents");
    }
    if (cfg.dc_link.capacitance_f <= 0.0 || cfg.dc_link.vdc_nominal_v <= 0.0) {
        throw std::runtime_error("oracle: dc link capacitance and voltage must be positive");
    }
}

}  // namespace

std::vector<Phasor> leg_currents_with_neutral(const OracleConfig& cfg) {
    std::vector<Phasor> currents(cfg.leg_currents_a.begin(), cfg.leg_currents_a.end());
    Phasor sum{0.0, 0.0};
    for (const auto& i : currents) sum += i;
    currents.push_back(-sum);
    return currents;
}

std::vector<Phasor> terminal_voltages(const OracleConfig& cfg) {
    const Real omega = 2.0 * M_PI * cfg.frequency_hz;
    const Phasor z{cfg.filter_resistance_ohm, omega * cfg.filter_inductance_h};
    const auto currents = leg_currents_with_neutral(cfg);
    std::vector<Phasor> v(4);
    for (int j = 0; j < 3; ++j) v[j] = cfg.grid_voltage_v(j) + z * currents[j];
    v[3] = z * currents[3];  // grid neutral held at 0 V
    return v;
}

Real instantaneous_power(const OracleConfig& cfg, Real t) {
    const Real wt = 2.0 * M_PI * cfg.frequency_hz * t;
    const auto voltages = terminal_voltages(cfg);
    const auto currents = leg_currents_with_neutral(cfg);
    Real p = 0.0;
    for (int j = 0; j < 4; ++j) p += wave(voltages[j], wt) * wave(currents[j], wt);
    return p;
}

SimTrace simulate(const OracleConfig& cfg) {
    check_config(cfg);

    const Real omega = 2.0 * M_PI * cfg.frequency_hz;
    const Real c = cfg.dc_link.capacitance_f;
    const Real vdc0 = cfg.dc_link.vdc_nominal_v;
    const Real h = cfg.dt_s;

    // Series RL source sized from the requested second-order low-pass
    // response against the dc-link capacitor.
    const Real wn = 2.0 * M_PI * cfg.dc_source_cutoff_hz;
    const Real ls = 1.0 / (wn * wn * c);
    const Real rs = 2.0 * cfg.dc_source_damping * std::sqrt(ls / c);

    const auto voltages = terminal_voltages(cfg);
    const auto currents = leg_currents_with_neutral(cfg);

    // EMF offset so the mean capacitor voltage settles at nominal despite
    // the resistive drop under net active power draw.
    Real p_mean = 0.0;
    for (int j = 0; j < 4; ++j) p_mean += std::real(voltages[j] * std::conj(currents[j]));
    const Real v_src_emf = vdc0 + rs * p_mean / vdc0;

    const std::size_t n_steps = static_cast<std::size_t>(std::llround(cfg.duration_s / h));
    SimTrace trace;
    trace.frequency_hz = cfg.frequency_hz;
    trace.time_s.reserve(n_steps + 1);
    trace.p_dc_w.reserve(n_steps + 1);
    trace.v_dc_v.reserve(n_steps + 1);
    trace.i_cap_a.reserve(n_steps + 1);
    trace.i_src_a.reserve(n_steps + 1);
    trace.v_terminal_v.reserve(n_steps + 1);

    auto power_at = [&](Real t) {
        const Real wt = omega * t;
        Real p = 0.0;
        for (int j = 0; j < 4; ++j) p += wave(voltages[j], wt) * wave(currents[j], wt);
        return p;
    };
    auto record = [&](Real t, Real v, Real i, Real p) {
        trace.time_s.push_back(t);
        trace.p_dc_w.push_back(p);
        trace.v_dc_v.push_back(v);
        trace.i_cap_a.push_back(i - p / v);
        trace.i_src_a.push_back(i);
        const Real wt = omega * t;
        trace.v_terminal_v.emplace_back(Phasor(wave(voltages[0], wt), 0.0),
                                        Phasor(wave(voltages[1], wt), 0.0),
                                        Phasor(wave(voltages[2], wt), 0.0));
    };

    Real v = vdc0;
    Real i = 0.0;
    Real p_now = power_at(0.0);
    record(0.0, v, i, p_now);

    const Real kl = h / (2.0 * ls);
    const Real il_den = 1.0 + kl * rs;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const Real t_next = (k + 1) * h;
        const Real p_next = power_at(t_next);

        // i_next = a - b*v_next (source row is linear in the unknowns)
        const Real a = (i + kl * (2.0 * v_src_emf - rs * i - v)) / il_den;
        const Real b = kl / il_den;

        // 1D Newton on the capacitor row after eliminating i_next
        Real v_next = v;
        for (int it = 0; it < 8; ++it) {
            const Real g = v_next - v -
                           h / (2.0 * c) * (i + a - b * v_next - p_now / v - p_next / v_next);
            const Real dg = 1.0 + h / (2.0 * c) * (b - p_next / (v_next * v_next));
            const Real dv = g / dg;
            v_next -= dv;
            if (std::abs(dv) < 1e-12 * vdc0) break;
        }
        const Real i_next = a - b * v_next;

        if (!std::isfinite(v_next) || v_next < 0.2 * vdc0 || v_next > 5.0 * vdc0) {
            throw std::runtime_error("oracle: dc-link integration diverged at t = " +
                                     std::to_string(t_next) + " s (reduce dt)");
        }

        v = v_next;
        i = i_next;
        p_now = p_next;
        record(t_next, v, i, p_now);
    }

    // Steady-state check: compare the last two fundamental periods of v_dc.
    const std::size_t per = static_cast<std::size_t>(std::llround(1.0 / (cfg.frequency_hz * h)));
    if (trace.v_dc_v.size() > 2 * per) {
        const std::size_t n = trace.v_dc_v.size();
        Real diff2 = 0.0, mean = 0.0;
        for (std::size_t k = 0; k < per; ++k) {
            const Real d = trace.v_dc_v[n - 1 - k] - trace.v_dc_v[n - 1 - k - per];
            diff2 += d * d;
            mean += trace.v_dc_v[n - 1 - k];
        }
        mean /= per;
        if (std::sqrt(diff2 / per) > 1e-6 * mean) {
            throw std::runtime_error("oracle: dc link did not reach steady state; extend duration");
        }
    }
    return trace;
}

Phasor extract_harmonic(const std::vector<Real>& time_s, const std::vector<Real>& x, Real f0,
                        int harmonic, int window_periods) {
    if (time_s.size() != x.size() || time_s.size() < 2) {
        throw std::runtime_error("oracle: malformed trace for spectral extraction");
    }
    const Real dt = time_s[1] - time_s[0];
    const std::size_t per = static_cast<std::size_t>(std::llround(1.0 / (f0 * dt)));
    const std::size_t window = per * static_cast<std::size_t>(window_periods);
    if (x.size() < window) {
        throw std::runtime_error("oracle: trace shorter than the spectral window");
    }
    const std::size_t start = x.size() - window;
    Phasor acc{0.0, 0.0};
    for (std::size_t k = start; k < x.size(); ++k) {
        const Real theta = 2.0 * M_PI * harmonic * f0 * time_s[k];
        acc += x[k] * Phasor(std::cos(theta), -std::sin(theta));
    }
    acc /= static_cast<Real>(window);
    return harmonic == 0 ? acc : 2.0 * acc;
}

Phasor extract_component(const SimTrace& trace, TraceSignal signal, int harmonic) {
    const std::vector<Real>* x = nullptr;
    switch (signal) {
        case TraceSignal::PDc: x = &trace.p_dc_w; break;
        case TraceSignal::ICap: x = &trace.i_cap_a; break;
        case TraceSignal::VDc: x = &trace.v_dc_v; break;
    }
    return extract_harmonic(trace.time_s, *x, trace.frequency_hz, harmonic);
}

RippleComparison compare_to_bilinear(const OracleConfig& cfg) {
    const SimTrace trace = simulate(cfg);

    const auto voltages = terminal_voltages(cfg);
    const auto currents = leg_currents_with_neutral(cfg);
    VscOperatingPoint op{voltages, currents};

    RippleComparison out;
    out.proposed_ripple_w = std::abs(ripple_phasor(op));
    out.proposed_ir_a = out.proposed_ripple_w / cfg.dc_link.vdc_nominal_v;
    out.simulated_ripple_w = std::abs(extract_component(trace, TraceSignal::PDc, 2));
    out.simulated_ir_a = std::abs(extract_component(trace, TraceSignal::ICap, 2));

    Real rss_w = 0.0, rss_a = 0.0;
    for (int harmonic = 1; harmonic <= 50; ++harmonic) {
        const Real pw = std::abs(extract_component(trace, TraceSignal::PDc, harmonic));
        const Real ia = std::abs(extract_component(trace, TraceSignal::ICap, harmonic));
        rss_w += pw * pw;
        rss_a += ia * ia;
    }
    out.lowfreq_rms_w = std::sqrt(rss_w);
    out.lowfreq_rms_a = std::sqrt(rss_a);
    return out;
}

OracleConfig ripple_case_preset(const std::string& id) {
    OracleConfig cfg;
    cfg.frequency_hz = 50.0;
    cfg.dt_s = 1e-5;
    cfg.duration_s = 1.0;
    const Real v_phase = 416.0 / std::sqrt(3.0);
    cfg.grid_voltage_v =
        PhaseTriple(v_phase * alpha_power(0), v_phase * alpha_power(-1), v_phase * alpha_power(-2));
    cfg.filter_inductance_h = 5e-3;
    cfg.filter_resistance_ohm = 1e-3;
    cfg.dc_link.capacitance_f = 50e-3;
    cfg.dc_link.vdc_nominal_v = 700.0;
    cfg.dc_source_cutoff_hz = 7.5;
    cfg.dc_source_damping = 0.89;

    const Real i_ref = 14.14;
    const Phasor j{0.0, 1.0};
    if (id == "3a") {
        cfg.leg_currents_a = {i_ref * alpha_power(0), i_ref * alpha_power(-1),
                              i_ref * alpha_power(-2)};
    } else if (id == "3b") {
        cfg.leg_currents_a = {Phasor(i_ref, 0.0), Phasor(0.0, 0.0), Phasor(0.0, 0.0)};
    } else if (id == "3c") {
        cfg.leg_currents_a = {Phasor(i_ref, 0.0), Phasor(-i_ref / 2.0, 0.0),
                              Phasor(-i_ref / 2.0, 0.0)};
    } else if (id == "3d") {
        cfg.leg_currents_a = {i_ref * alpha_power(0), i_ref * alpha_power(1),
                              i_ref * alpha_power(2)};
    } else if (id == "3e") {
        cfg.leg_currents_a = {j * i_ref * alpha_power(0), j * i_ref * alpha_power(-1),
                              j * i_ref * alpha_power(-2)};
    } else if (id == "3f") {
        cfg.leg_currents_a = {j * i_ref, Phasor(0.0, 0.0), Phasor(0.0, 0.0)};
    } else {
        throw std::runtime_error("unknown ripple case preset: " + id);
    }
    return cfg;
}

std::vector<std::string> ripple_case_names() { return {"3a", "3b", "3c", "3d", "3e", "3f"}; }

}  // namespace ropf

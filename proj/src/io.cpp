#include "ropf/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ropf {

namespace {

using json = nlohmann::ordered_json;

json pair_json(const Phasor& z) {
    return json::array({z.real(), z.imag()});
}

Phasor pair_from(const json& j) { return {j.at(0).get<Real>(), j.at(1).get<Real>()}; }

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    return fields;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text,
                                               const std::string& expected_header) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line != expected_header) {
                throw std::runtime_error("unexpected CSV header: " + line);
            }
            continue;
        }
        rows.push_back(split_line(line));
    }
    return rows;
}

const char* status_name(OpfStatus status) {
    switch (status) {
        case OpfStatus::LocalOptimum: return "local_optimum";
        case OpfStatus::MaxIterations: return "max_iter";
        case OpfStatus::InfeasibleDetected: return "infeasible_detected";
    }
    return "unknown";
}

}  // namespace

std::string format_real(Real value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.12g", value);
    return buffer;
}

std::string solution_to_json(const Network& net, const OpfSolution& solution) {
    const NodeMap map = node_map(net);
    json doc;
    doc["status"] = status_name(solution.stats.status);
    doc["objective_value"] = solution.objective_value;
    doc["iterations"] = solution.stats.iterations;
    doc["starts_tried"] = solution.stats.starts_tried;
    doc["stationarity"] = solution.stats.stationarity;
    doc["feasibility"] = {{"kcl_inf_a", solution.feasibility.kcl_inf_norm_a},
                          {"ohm_inf_v", solution.feasibility.ohm_inf_norm_v},
                          {"device_inf", solution.feasibility.device_inf_norm},
                          {"max_inequality_violation", solution.max_inequality_violation}};

    doc["devices"] = json::array();
    for (std::size_t d = 0; d < net.vscs.size(); ++d) {
        json dev;
        dev["id"] = net.vscs[d].id;
        dev["ripple_w"] = solution.ripple_per_vsc_w[d];
        dev["ripple_phasor_w"] = pair_json(solution.ripple_phasor_per_vsc[d]);
        dev["neutral_current_a"] = solution.neutral_current_per_vsc_a[d];
        dev["dc_power_w"] = solution.dc_power_per_vsc_w[d];
        json legs = json::array();
        for (int j = 0; j < solution.state.device_current_a[d].size(); ++j) {
            legs.push_back(pair_json(solution.state.device_current_a[d](j)));
        }
        dev["leg_currents_a"] = legs;
        doc["devices"].push_back(dev);
    }

    json voltages;
    for (std::size_t b = 0; b < net.buses.size(); ++b) {
        json per_bus;
        for (int c = 0; c < kNumConductors; ++c) {
            const auto cond = static_cast<Conductor>(c);
            if (!net.buses[b].has(cond)) continue;
            per_bus[conductor_name(cond)] =
                pair_json(solution.state.node_voltage_v(map.at(static_cast<int>(b), cond)));
        }
        voltages[net.buses[b].id] = per_bus;
    }
    doc["voltages_v"] = voltages;

    json currents;
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        json per_branch;
        const auto conductors = branch_conductors(net, net.branches[k]);
        for (std::size_t r = 0; r < conductors.size(); ++r) {
            per_branch[conductor_name(conductors[r])] =
                pair_json(solution.state.branch_current_a[k](r));
        }
        currents[net.branches[k].id] = per_branch;
    }
    doc["branch_currents_a"] = currents;

    return doc.dump(2) + "\n";
}

SolutionDocument solution_from_json(const std::string& text) {
    const json doc = json::parse(text);
    SolutionDocument out;
    out.status = doc.at("status").get<std::string>();
    out.objective_value = doc.at("objective_value").get<Real>();
    out.iterations = doc.at("iterations").get<int>();
    for (const auto& dev : doc.at("devices")) {
        SolutionDocument::Device device;
        device.id = dev.at("id").get<std::string>();
        device.ripple_w = dev.at("ripple_w").get<Real>();
        device.ripple_phasor_w = pair_from(dev.at("ripple_phasor_w"));
        device.neutral_current_a = dev.at("neutral_current_a").get<Real>();
        device.dc_power_w = dev.at("dc_power_w").get<Real>();
        for (const auto& leg : dev.at("leg_currents_a")) {
            device.leg_currents_a.push_back(pair_from(leg));
        }
        out.devices.push_back(device);
    }
    for (const auto& [bus, per_bus] : doc.at("voltages_v").items()) {
        for (const auto& [cond, value] : per_bus.items()) {
            out.voltages_v[bus][cond] = pair_from(value);
        }
    }
    for (const auto& [branch, per_branch] : doc.at("branch_currents_a").items()) {
        for (const auto& [cond, value] : per_branch.items()) {
            out.branch_currents_a[branch][cond] = pair_from(value);
        }
    }
    return out;
}

std::string summary_csv(const TimeseriesResult& result) {
    std::string csv =
        "step,timestamp,status,objective,max_i_mitigated_a,max_i_unmitigated_a,"
        "max_i_monitored_a,ripple_w,neutral_a\n";
    for (const auto& record : result.records) {
        Real ripple = 0.0, neutral = 0.0;
        for (Real r : record.ripple_w) ripple = std::max(ripple, r);
        for (Real n : record.neutral_a) neutral = std::max(neutral, n);
        csv += std::to_string(record.step) + "," + record.timestamp + "," +
               status_name(record.status) + "," + format_real(record.objective) + "," +
               format_real(record.max_phase_current_a) + "," +
               format_real(record.max_phase_current_unmitigated_a) + "," +
               format_real(record.max_monitored_current_a) + "," + format_real(ripple) + "," +
               format_real(neutral) + "\n";
    }
    return csv;
}

std::vector<StepRecord> parse_summary_csv(const std::string& text) {
    const auto rows = csv_rows(text,
                               "step,timestamp,status,objective,max_i_mitigated_a,"
                               "max_i_unmitigated_a,max_i_monitored_a,ripple_w,neutral_a");
    std::vector<StepRecord> records;
    for (const auto& fields : rows) {
        if (fields.size() != 9) throw std::runtime_error("bad summary row");
        StepRecord record;
        record.step = std::stoi(fields[0]);
        record.timestamp = fields[1];
        record.status = fields[2] == "local_optimum" ? OpfStatus::LocalOptimum
                        : fields[2] == "max_iter"    ? OpfStatus::MaxIterations
                                                     : OpfStatus::InfeasibleDetected;
        record.objective = std::stod(fields[3]);
        record.max_phase_current_a = std::stod(fields[4]);
        record.max_phase_current_unmitigated_a = std::stod(fields[5]);
        record.max_monitored_current_a = std::stod(fields[6]);
        record.ripple_w = {std::stod(fields[7])};
        record.neutral_a = {std::stod(fields[8])};
        records.push_back(record);
    }
    return records;
}

std::string duration_curve_csv(const TimeseriesResult& result) {
    std::string csv = "rank,max_i_mitigated_a,max_i_unmitigated_a\n";
    for (std::size_t k = 0; k < result.duration_mitigated_a.size(); ++k) {
        csv += std::to_string(k) + "," + format_real(result.duration_mitigated_a[k]) + "," +
               format_real(result.duration_unmitigated_a[k]) + "\n";
    }
    return csv;
}

DurationCurve parse_duration_csv(const std::string& text) {
    const auto rows = csv_rows(text, "rank,max_i_mitigated_a,max_i_unmitigated_a");
    DurationCurve curve;
    for (const auto& fields : rows) {
        if (fields.size() != 3) throw std::runtime_error("bad duration row");
        curve.mitigated_a.push_back(std::stod(fields[1]));
        curve.unmitigated_a.push_back(std::stod(fields[2]));
    }
    return curve;
}

std::string trace_csv(const SimTrace& trace, int decimate) {
    std::string csv = "time_s,p_dc_w,v_dc_v,i_cap_a,i_src_a,vt_a_v,vt_b_v,vt_c_v\n";
    for (std::size_t k = 0; k < trace.time_s.size(); k += decimate) {
        csv += format_real(trace.time_s[k]) + "," + format_real(trace.p_dc_w[k]) + "," +
               format_real(trace.v_dc_v[k]) + "," + format_real(trace.i_cap_a[k]) + "," +
               format_real(trace.i_src_a[k]) + "," +
               format_real(trace.v_terminal_v[k](0).real()) + "," +
               format_real(trace.v_terminal_v[k](1).real()) + "," +
               format_real(trace.v_terminal_v[k](2).real()) + "\n";
    }
    return csv;
}

SimTrace parse_trace_csv(const std::string& text) {
    const auto rows =
        csv_rows(text, "time_s,p_dc_w,v_dc_v,i_cap_a,i_src_a,vt_a_v,vt_b_v,vt_c_v");
    SimTrace trace;
    for (const auto& fields : rows) {
        if (fields.size() != 8) throw std::runtime_error("bad trace row");
        trace.time_s.push_back(std::stod(fields[0]));
        trace.p_dc_w.push_back(std::stod(fields[1]));
        trace.v_dc_v.push_back(std::stod(fields[2]));
        trace.i_cap_a.push_back(std::stod(fields[3]));
        trace.i_src_a.push_back(std::stod(fields[4]));
        trace.v_terminal_v.emplace_back(Phasor(std::stod(fields[5]), 0),
                                        Phasor(std::stod(fields[6]), 0),
                                        Phasor(std::stod(fields[7]), 0));
    }
    return trace;
}

std::string spectrum_csv(const SimTrace& trace, int max_harmonic) {
    std::string csv =
        "harmonic,frequency_hz,p_mag_w,p_phase_deg,icap_mag_a,icap_phase_deg,"
        "vdc_mag_v,vdc_phase_deg\n";
    for (int h = 0; h <= max_harmonic; ++h) {
        const Phasor p = extract_component(trace, TraceSignal::PDc, h);
        const Phasor i = extract_component(trace, TraceSignal::ICap, h);
        const Phasor v = extract_component(trace, TraceSignal::VDc, h);
        csv += std::to_string(h) + "," + format_real(h * trace.frequency_hz) + "," +
               format_real(std::abs(p)) + "," + format_real(angle_deg(p)) + "," +
               format_real(std::abs(i)) + "," + format_real(angle_deg(i)) + "," +
               format_real(std::abs(v)) + "," + format_real(angle_deg(v)) + "\n";
    }
    return csv;
}

std::vector<SpectrumRow> parse_spectrum_csv(const std::string& text) {
    const auto rows = csv_rows(text,
                               "harmonic,frequency_hz,p_mag_w,p_phase_deg,icap_mag_a,"
                               "icap_phase_deg,vdc_mag_v,vdc_phase_deg");
    std::vector<SpectrumRow> out;
    for (const auto& fields : rows) {
        if (fields.size() != 8) throw std::runtime_error("bad spectrum row");
        SpectrumRow row;
        row.harmonic = std::stoi(fields[0]);
        row.frequency_hz = std::stod(fields[1]);
        row.p_mag_w = std::stod(fields[2]);
        row.p_phase_deg = std::stod(fields[3]);
        row.icap_mag_a = std::stod(fields[4]);
        row.icap_phase_deg = std::stod(fields[5]);
        row.vdc_mag_v = std::stod(fields[6]);
        row.vdc_phase_deg = std::stod(fields[7]);
        out.push_back(row);
    }
    return out;
}

std::string gamma_sweep_csv(const std::vector<GammaSweepRow>& rows) {
    std::string csv = "gamma,neutral_a,ripple_w\n";
    for (const auto& row : rows) {
        csv += format_real(row.gamma) + "," + format_real(row.neutral_a) + "," +
               format_real(row.ripple_w) + "\n";
    }
    return csv;
}

std::vector<GammaSweepRow> parse_gamma_sweep_csv(const std::string& text) {
    const auto rows = csv_rows(text, "gamma,neutral_a,ripple_w");
    std::vector<GammaSweepRow> out;
    for (const auto& fields : rows) {
        if (fields.size() != 3) throw std::runtime_error("bad sweep row");
        out.push_back({std::stod(fields[0]), std::stod(fields[1]), std::stod(fields[2])});
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("RIPPLE_OPF_LOG");
        if (!env) return LogLevel::Off;
        const std::string value(env);
        if (value == "debug") return LogLevel::Debug;
        if (value == "info") return LogLevel::Info;
        return LogLevel::Off;
    }();
    return level;
}

void log_info(const std::string& message) {
    if (log_level() >= LogLevel::Info) std::cerr << "[ripple-opf] " << message << "\n";
}

void log_debug(const std::string& message) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[ripple-opf] " << message << "\n";
}

}  // namespace ropf

#pragma once

#include <map>
#include <string>
#include <vector>

#include "ropf/opf.hpp"
#include "ropf/oracle.hpp"
#include "ropf/timeseries.hpp"

namespace ropf {

/// Deterministic shortest-ish float formatting used by every emitter.
std::string format_real(Real value);

/// Solution document: voltages and currents keyed by (bus, conductor),
/// device summaries, solver statistics.
std::string solution_to_json(const Network& net, const OpfSolution& solution);

/// Light-weight parsed view of an emitted solution document.
struct SolutionDocument {
    std::string status;
    Real objective_value = 0.0;
    int iterations = 0;
    std::map<std::string, std::map<std::string, Phasor>> voltages_v;
    std::map<std::string, std::map<std::string, Phasor>> branch_currents_a;
    struct Device {
        std::string id;
        Real ripple_w = 0.0;
        Phasor ripple_phasor_w;
        Real neutral_current_a = 0.0;
        Real dc_power_w = 0.0;
        std::vector<Phasor> leg_currents_a;
    };
    std::vector<Device> devices;
};

SolutionDocument solution_from_json(const std::string& text);

/// Per-step series summary, one row per timestep.
std::string summary_csv(const TimeseriesResult& result);
std::vector<StepRecord> parse_summary_csv(const std::string& text);

/// Descending per-step maxima with and without the devices.
std::string duration_curve_csv(const TimeseriesResult& result);
struct DurationCurve {
    std::vector<Real> mitigated_a;
    std::vector<Real> unmitigated_a;
};
DurationCurve parse_duration_csv(const std::string& text);

/// Sampled dc-link waveforms.
std::string trace_csv(const SimTrace& trace, int decimate = 1);
SimTrace parse_trace_csv(const std::string& text);

/// Harmonic table of the dc-link power, capacitor current and voltage.
std::string spectrum_csv(const SimTrace& trace, int max_harmonic = 50);
struct SpectrumRow {
    int harmonic = 0;
    Real frequency_hz = 0.0;
    Real p_mag_w = 0.0, p_phase_deg = 0.0;
    Real icap_mag_a = 0.0, icap_phase_deg = 0.0;
    Real vdc_mag_v = 0.0, vdc_phase_deg = 0.0;
};
std::vector<SpectrumRow> parse_spectrum_csv(const std::string& text);

/// (gamma, |I_n|, |ripple|) sweep rows.
struct GammaSweepRow {
    Real gamma = 0.0;
    Real neutral_a = 0.0;
    Real ripple_w = 0.0;
};
std::string gamma_sweep_csv(const std::vector<GammaSweepRow>& rows);
std::vector<GammaSweepRow> parse_gamma_sweep_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Verbosity from the RIPPLE_OPF_LOG environment variable
/// (off | info | debug).
enum class LogLevel { Off = 0, Info = 1, Debug = 2 };
LogLevel log_level();
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace ropf

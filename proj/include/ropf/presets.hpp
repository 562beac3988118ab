#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ropf/network.hpp"

namespace ropf {

/// Two-bus feeder with a heavy phase-a load and a 30 A/leg four-wire
/// shunt compensator at the load bus. The base instance leaves neutral
/// capacity and ripple unconstrained.
Network toy_feeder();

/// Five-bus radial feeder with mixed single-phase loads; exercises the
/// data model and the power-flow solver, carries no devices.
Network demo_feeder();

/// Two radial feeders joined only by a back-to-back converter sharing
/// one dc link: feeder 1 has an unbalanced source (3.18% negative
/// sequence) and three induction machines, feeder 2 a stiff balanced
/// 1.05 pu source and light load.
Network two_feeder_sop();

/// Applies one of the bundled compensator operating envelopes to the toy
/// feeder device: "1a" unconstrained neutral/ripple, "1b" no neutral leg,
/// "1c" zero ripple, "1d" 30 A neutral and 5.4 kW ripple cap.
void apply_statcom_case(Network& net, const std::string& id);

std::vector<std::string> statcom_case_names();

/// 48-step half-hourly demand for the toy feeder with an evening peak on
/// phase a and a midday peak on phase c; CSV with header
/// timestamp,bus,phase,p_kw,q_kvar.
std::string demand_profile_csv();

}  // namespace ropf

#pragma once

#include <optional>
#include <string>

#include "ropf/opf.hpp"

namespace ropf {

/// Batch front end configuration; mirrors the command-line flags.
struct RunConfig {
    std::string command;  // pf | opf | opf-series | oracle | gamma-sweep
    std::string network_path;
    std::string demand_path;
    std::string preset;        // case1a..case1d, case2; oracle cases 3a..3f
    std::string objective = "of1";
    std::string target_branch;
    std::string output_dir = ".";
    int workers = 1;
    int sweep_points = 11;
    Real sweep_i_mag_a = 20.0;
    int multi_starts = 3;
    std::optional<Real> ripple_limit_w;  // override for every device
    Real beta = 1e-4;
    Real derating_weight = 1.0;
    std::optional<Real> nlp_tol;
    bool vneg_limit = false;
    bool voltage_bounds = false;
    bool branch_ampacity = false;
};

/// Executes one batch command, writing artifacts into the output
/// directory. Returns 0 on success, 1 on configuration/validation
/// errors, 2 on solver failures; failures also leave an error.json.
int run(const RunConfig& config);

}  // namespace ropf

#pragma once

#include <string>

#include "ropf/network.hpp"

namespace ropf {

/// Serializes to the versioned network schema (schema_version 1).
std::string emit_network(const Network& net);

/// Parses a network document. Accepts both explicit 4x4 impedance
/// matrices and sequence-parameter shorthand for branches. Throws
/// std::runtime_error with a descriptive message on malformed input.
Network parse_network(const std::string& text);

Network load_network_file(const std::string& path);
void save_network_file(const Network& net, const std::string& path);

}  // namespace ropf

#pragma once

#include "ropf/types.hpp"

namespace ropf {

/// Integer power of the 120-degree rotation operator alpha = exp(j*2*pi/3).
/// Exact for every k (reduced modulo 3 before lookup, so |result| == 1).
Phasor alpha_power(int k);

/// Symmetrical basis with columns [zero, positive, negative]:
///   [1, 1,    1   ]
///   [1, a^-1, a^-2]
///   [1, a^-2, a^-1]
const Mat3c& fortescue_basis();

/// Closed-form inverse of the basis, (1/3) * B^H.
const Mat3c& fortescue_inverse();

SequenceTriple to_sequence(const PhaseTriple& v);
PhaseTriple to_phase(const SequenceTriple& s);

/// Sum of the per-phase complex products v_j * i_j (no conjugation).
/// Equals 3*(V0*I0 + V+*I- + V-*I+) for any pair of triples.
Phasor phase_product_sum(const PhaseTriple& v, const PhaseTriple& i);

}  // namespace ropf

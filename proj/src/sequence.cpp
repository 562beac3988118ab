#include "ropf/sequence.hpp"

namespace ropf {

namespace {
constexpr Real kHalfSqrt3 = 0.86602540378443864676372317075294;  // sqrt(3)/2
}

bool conductor_from_name(const std::string& name, Conductor& out) {
    if (name == "a") { out = Conductor::A; return true; }
    if (name == "b") { out = Conductor::B; return true; }
    if (name == "c") { out = Conductor::C; return true; }
    if (name == "n") { out = Conductor::N; return true; }
    return false;
}

Phasor alpha_power(int k) {
    int r = k % 3;
    if (r < 0) r += 3;
    switch (r) {
        case 1: return {-0.5, kHalfSqrt3};
        case 2: return {-0.5, -kHalfSqrt3};
        default: return {1.0, 0.0};
    }
}

const Mat3c& fortescue_basis() {
    static const Mat3c basis = [] {
        Mat3c b;
        b << alpha_power(0), alpha_power(0), alpha_power(0),
             alpha_power(0), alpha_power(-1), alpha_power(-2),
             alpha_power(0), alpha_power(-2), alpha_power(-4);
        return b;
    }();
    return basis;
}

const Mat3c& fortescue_inverse() {
    // Columns of the basis are orthogonal with squared norm 3, so the
    // inverse is (1/3) B^H in closed form.
    static const Mat3c inv = (fortescue_basis().adjoint() / 3.0).eval();
    return inv;
}

SequenceTriple to_sequence(const PhaseTriple& v) {
    const PhaseTriple s = fortescue_inverse() * v;
    return {s(0), s(1), s(2)};
}

PhaseTriple to_phase(const SequenceTriple& s) {
    return fortescue_basis() * PhaseTriple(s.zero, s.positive, s.negative);
}

Phasor phase_product_sum(const PhaseTriple& v, const PhaseTriple& i) {
    return v(0) * i(0) + v(1) * i(1) + v(2) * i(2);
}

}  // namespace ropf

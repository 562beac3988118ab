#pragma once

#include <complex>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace ropf {

using Real = double;
using Phasor = std::complex<Real>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Mat3c = Eigen::Matrix3cd;
using Mat4c = Eigen::Matrix4cd;
using SpMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;

/// Phase-frame triple, ordered a, b, c.
using PhaseTriple = Eigen::Vector3cd;

/// Fortescue-frame triple.
struct SequenceTriple {
    Phasor zero{0.0, 0.0};
    Phasor positive{0.0, 0.0};
    Phasor negative{0.0, 0.0};
};

inline Phasor from_polar(Real magnitude, Real angle_rad) {
    return std::polar(magnitude, angle_rad);
}

inline Phasor from_polar_deg(Real magnitude, Real angle_deg) {
    return std::polar(magnitude, angle_deg * M_PI / 180.0);
}

inline Real angle_deg(const Phasor& p) { return std::arg(p) * 180.0 / M_PI; }

/// Conductors of a four-wire feeder, in storage order.
enum class Conductor : int { A = 0, B = 1, C = 2, N = 3 };

constexpr int kNumConductors = 4;

inline const char* conductor_name(Conductor c) {
    switch (c) {
        case Conductor::A: return "a";
        case Conductor::B: return "b";
        case Conductor::C: return "c";
        case Conductor::N: return "n";
    }
    return "?";
}

bool conductor_from_name(const std::string& name, Conductor& out);

}  // namespace ropf

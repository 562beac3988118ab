#include <catch2/catch_amalgamated.hpp>

#include "ropf/power_quality.hpp"
#include "ropf/sequence.hpp"

using namespace ropf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("derating factor branches") {
    DeratingCurve curve;
    CHECK(derating_factor(curve, 0.005) == 100.0);
    CHECK(derating_factor(curve, 0.00999) == 100.0);
    CHECK(derating_factor(curve, 0.05) == 0.0);
    CHECK(derating_factor(curve, 0.06) == 0.0);
    CHECK_THAT(derating_factor(curve, 0.03), WithinAbs(99.83375, 1e-12));

    // strictly decreasing on the middle branch
    double prev = derating_factor(curve, 0.01);
    for (int k = 1; k <= 40; ++k) {
        const double v = 0.01 + k * 0.001 * 0.999;
        const double d = derating_factor(curve, v);
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("smooth shortfall surrogate tracks g between the knees") {
    DeratingCurve curve;
    for (int k = 0; k <= 20; ++k) {
        const double v = 0.011 + k * 0.0019;
        CHECK_THAT(derating_shortfall_smooth(curve, v), WithinRel(100.0 - derating_factor(curve, v), 1e-12));
    }
    CHECK(derating_shortfall_smooth(curve, 0.0) > 0.0);  // extends below the knee
    CHECK(derating_shortfall_smooth(curve, 10.0) == 100.0);
}

TEST_CASE("derating cost accumulates rating-weighted shortfall") {
    DeratingCurve curve;
    std::vector<InductionMachine> machines = {{"m1", 12.0, 10.0, 0.85}};
    std::map<std::string, Real> vneg = {{"m1", 0.03}};
    CHECK_THAT(derating_cost(machines, vneg, 1.0, curve), WithinAbs(12.0 * 0.16625, 1e-9));

    vneg["m1"] = 0.005;
    CHECK(derating_cost(machines, vneg, 1.0, curve) == 0.0);

    // non-decreasing in the unbalance
    double prev = -1.0;
    for (int k = 0; k <= 30; ++k) {
        vneg["m1"] = k * 0.002;
        const double c = derating_cost(machines, vneg, 1.0, curve);
        CHECK(c >= prev);
        prev = c;
    }

    std::map<std::string, Real> missing;
    CHECK_THROWS_AS(derating_cost(machines, missing, 1.0, curve), std::out_of_range);
}

TEST_CASE("negative-sequence limit check") {
    const PhaseTriple balanced(Phasor(1, 0), alpha_power(-1), alpha_power(-2));
    CHECK_FALSE(check_vneg_limit(balanced, 0.02).violation_pu.has_value());

    PhaseTriple skewed(Phasor(1, 0), 0.97 * alpha_power(-1), 1.03 * alpha_power(-2));
    const auto res = check_vneg_limit(skewed, 0.02);
    const double expected = std::abs(to_sequence(skewed).negative);
    CHECK_THAT(res.v_neg_pu, WithinRel(expected, 1e-12));

    // 3.18% unbalance against the 2% limit
    PhaseTriple unbalanced = to_phase({Phasor(0, 0), Phasor(1, 0), Phasor(0.0318, 0)});
    const auto bad = check_vneg_limit(unbalanced, 0.02);
    REQUIRE(bad.violation_pu.has_value());
    CHECK_THAT(*bad.violation_pu, WithinAbs(0.0118, 1e-9));
}

TEST_CASE("limit check is invariant to common rotation") {
    PhaseTriple v = to_phase({Phasor(0.01, 0.005), Phasor(1, 0.1), Phasor(0.025, -0.01)});
    const double base = check_vneg_limit(v, 0.02).v_neg_pu;
    for (int k = 1; k < 12; ++k) {
        const Phasor rot = from_polar_deg(1.0, 30.0 * k);
        CHECK_THAT(check_vneg_limit((rot * v).eval(), 0.02).v_neg_pu, WithinRel(base, 1e-12));
    }
}

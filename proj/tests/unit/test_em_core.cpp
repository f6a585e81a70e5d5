#include <doctest.h>

#include "siwforge/em_core.hpp"
#include "siwforge/errors.hpp"

#include <cmath>

using namespace siwforge;

namespace {

// Frozen from an independent mpmath evaluation (50 digits).
constexpr double kLambda12 = 24.9827048333e-3;
constexpr double kLambda15 = 19.9861638667e-3;
constexpr double kWeqTable1 = 10.7368421053e-3;
constexpr double kWeqD1P2 = 10.4736842105e-3;
constexpr double kWsiwFrom1073 = 10.9931578947e-3;
constexpr double kRuleA15 = 6.73733446504e-3;
constexpr double kFc1 = 9.41245256145e9;
constexpr double kFc2 = 18.8249051229e9;
constexpr double kBeta12 = 231.391751294;
constexpr double kBeta10 = 104.986190714;
constexpr double kBeta15 = 363.067039308;
constexpr double kCoupledWidth = 21.4736842105e-3;
constexpr double kBetaTe20At125 = 255.695343909;
constexpr double kBetaTe10At125 = 359.987331153;
constexpr double kDphi16mm = 1.66867179591;
constexpr double kRequiredAperture = 15.0615245552e-3;
constexpr double kFerriteRadius = 1.89752873364e-3;

const Substrate kSub{2.2, 0.8e-3};
const RsiwCrossSection kTable1{11e-3, 0.5e-3, 1e-3, kSub};

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

}  // namespace

TEST_CASE("free-space wavelength") {
    CHECK(rel_close(free_space_wavelength(12e9), kLambda12, 1e-10));
    CHECK(rel_close(free_space_wavelength(15e9), kLambda15, 1e-10));
    CHECK(free_space_wavelength(kSpeedOfLight) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(free_space_wavelength(0.0), DomainError);
    CHECK_THROWS_AS(free_space_wavelength(-1e9), DomainError);
}

TEST_CASE("equivalent width and its inverse") {
    CHECK(rel_close(equivalent_width(kTable1).w_eq, kWeqTable1, 1e-10));
    CHECK(std::abs(equivalent_width(kTable1).w_eq - 10.73e-3) < 0.01e-3);
    CHECK(rel_close(equivalent_width({11e-3, 1e-3, 2e-3, kSub}).w_eq, kWeqD1P2, 1e-10));
    CHECK(equivalent_width({11e-3, 0.0, 1e-3, kSub}).w_eq == 11e-3);
    CHECK(equivalent_width(kTable1).substrate.epsilon_r == 2.2);

    const RsiwCrossSection back = siw_width_from_equivalent({10.73e-3, kSub}, 0.5e-3, 1e-3);
    CHECK(rel_close(back.w_siw, kWsiwFrom1073, 1e-10));
    CHECK(std::abs(back.w_siw - 11e-3) < 0.01e-3);
    CHECK(siw_width_from_equivalent({7e-3, kSub}, 0.0, 1e-3).w_siw == 7e-3);

    CHECK_THROWS_AS(equivalent_width({11e-3, 1e-3, 0.5e-3, kSub}), DomainError);  // d >= p
    CHECK_THROWS_AS(equivalent_width({0.2003e-3, 0.2e-3, 0.21e-3, kSub}), GeometryError);
}

TEST_CASE("equivalent width round trip and monotonicity over a parameter grid") {
    for (double w = 4e-3; w <= 30e-3; w += 1.7e-3)
        for (double p = 0.4e-3; p <= 3e-3; p += 0.37e-3)
            for (double d = 0.0; d < p; d += 0.13e-3) {
                const RsiwCrossSection x{w, d, p, kSub};
                EquivalentGuide g;
                try {
                    g = equivalent_width(x);
                } catch (const GeometryError&) {
                    continue;
                } catch (const DomainError&) {
                    continue;
                }
                if (d > 0.0) CHECK(g.w_eq < w);
                CHECK(rel_close(siw_width_from_equivalent(g, d, p).w_siw, w, 1e-12));
            }
}

TEST_CASE("design rules") {
    const auto report = check_design_rules(kTable1, {10e9, 15e9});
    REQUIRE(report.rules.size() == 2);
    CHECK(report.all_passed());
    CHECK(rel_close(report.rules[0].bound, kRuleA15, 1e-10));
    CHECK(report.rules[1].bound == doctest::Approx(2e-3));
    CHECK(report.rules[0].margin() > 0.0);

    // Strict inequality at p = 4d.
    const auto edge = check_design_rules({11e-3, 0.25e-3, 1e-3, kSub}, {10e9, 15e9});
    CHECK_FALSE(edge.rules[1].passed);

    const auto bad = check_design_rules({40e-3, 0.5e-3, 10e-3, kSub}, {10e9, 15e9});
    CHECK_FALSE(bad.rules[0].passed);
    CHECK_FALSE(bad.rules[1].passed);
    CHECK_FALSE(bad.all_passed());
}

TEST_CASE("cutoff frequencies") {
    const EquivalentGuide g = equivalent_width(kTable1);
    CHECK(rel_close(cutoff_frequency(g, {1}), kFc1, 1e-10));
    CHECK(rel_close(cutoff_frequency(g, {2}), kFc2, 1e-10));
    CHECK(cutoff_frequency(g, {2}) == 2.0 * cutoff_frequency(g, {1}));
    CHECK(cutoff_frequency(g, {3}) == doctest::Approx(3.0 * cutoff_frequency(g, {1})).epsilon(1e-14));
    CHECK_THROWS_AS(cutoff_frequency(g, {0}), DomainError);
}

TEST_CASE("propagation constant") {
    const EquivalentGuide g = equivalent_width(kTable1);
    CHECK(rel_close(propagation_constant(g, {1}, 12e9).real(), kBeta12, 1e-9));
    CHECK(rel_close(propagation_constant(g, {1}, 10e9).real(), kBeta10, 1e-9));
    CHECK(rel_close(propagation_constant(g, {1}, 15e9).real(), kBeta15, 1e-9));
    CHECK(propagation_constant(g, {1}, 12e9).imag() == 0.0);

    const Complex below = propagation_constant(g, {1}, 8e9);
    CHECK(below.real() == 0.0);
    CHECK(below.imag() > 0.0);
    CHECK(std::abs(propagation_constant(g, {1}, cutoff_frequency(g, {1}))) < 1e-4);

    const EquivalentGuide coupled{kCoupledWidth, kSub};
    CHECK(rel_close(propagation_constant(coupled, {2}, 12.5e9).real(), kBetaTe20At125, 1e-9));
    CHECK(rel_close(propagation_constant(coupled, {1}, 12.5e9).real(), kBetaTe10At125, 1e-9));
    CHECK_THROWS_AS(propagation_constant(g, {1}, 0.0), DomainError);
}

TEST_CASE("propagation constant satisfies the dispersion relation on both branches") {
    for (int n = 1; n <= 3; ++n) {
        for (double w : {3e-3, 10.7e-3, 22e-3}) {
            const EquivalentGuide g{w, kSub};
            double previous = -1.0;
            for (double f = 1e9; f <= 40e9; f += 0.37e9) {
                const Complex b = propagation_constant(g, {n}, f);
                const double k0 = 2.0 * kPi * f / kSpeedOfLight;
                const double kc = n * kPi / w;
                const double lhs = (b * b).real() + kc * kc;
                const double rhs = 2.2 * k0 * k0;
                CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(rhs, kc * kc));
                CHECK(std::abs((b * b).imag()) <= 1e-12 * kc * kc);
                if (b.imag() == 0.0 && b.real() > 0.0) {
                    CHECK(b.real() > previous);
                    previous = b.real();
                }
            }
        }
    }
}

TEST_CASE("dispersion curve sampling") {
    const EquivalentGuide g = equivalent_width(kTable1);
    const auto table = dispersion_curve(g, {1}, {10e9, 15e9}, 11);
    REQUIRE(table.size() == 11);
    CHECK(table.front().frequency == 10e9);
    CHECK(table.back().frequency == 15e9);
    for (std::size_t i = 1; i < table.size(); ++i) {
        CHECK(table[i].beta.imag() == 0.0);
        CHECK(table[i].beta.real() > table[i - 1].beta.real());
    }
    for (const auto& row : dispersion_curve(g, {1}, {5e9, 9e9}, 5)) {
        CHECK(row.beta.real() == 0.0);
        CHECK(row.beta.imag() > 0.0);
    }
    const auto ends = dispersion_curve(g, {1}, {10e9, 15e9}, 2);
    CHECK(ends.size() == 2);
    CHECK_THROWS_AS(dispersion_curve(g, {1}, {10e9, 15e9}, 1), DomainError);
    CHECK_THROWS_AS(dispersion_curve(g, {1}, {15e9, 10e9}, 5), DomainError);
}

TEST_CASE("ferrite radius") {
    CHECK(rel_close(ferrite_radius(12.5e9, 13.7), kFerriteRadius, 1e-10));
    CHECK(std::abs(ferrite_radius(12.5e9, 13.7) - 1.897e-3) < 0.01e-3);
    CHECK(ferrite_radius(1.84 * kSpeedOfLight / (2.0 * kPi), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(ferrite_radius(0.0, 13.7), DomainError);
    CHECK_THROWS_AS(ferrite_radius(12.5e9, 0.5), DomainError);
}

TEST_CASE("coupler phase difference and required aperture") {
    const EquivalentGuide coupled{kCoupledWidth, kSub};
    CHECK(rel_close(coupler_phase_difference(coupled, 16e-3, 12.5e9), kDphi16mm, 1e-9));
    CHECK(coupler_phase_difference(coupled, 0.0, 12.5e9) == 0.0);
    for (double len : {1e-3, 7.3e-3, 16e-3})
        CHECK(coupler_phase_difference(coupled, 2.0 * len, 12.5e9) ==
              2.0 * coupler_phase_difference(coupled, len, 12.5e9));
    const double l = required_aperture_length(coupled, 12.5e9);
    CHECK(rel_close(l, kRequiredAperture, 1e-9));
    CHECK(std::abs(l - 15.1e-3) <= 0.3e-3);
    CHECK(coupler_phase_difference(coupled, l, 12.5e9) == doctest::Approx(kPi / 2).epsilon(1e-14));

    // TE20 of the coupled region cuts off near 9.4 GHz.
    CHECK_THROWS_AS(coupler_phase_difference(coupled, 16e-3, 9e9), ModeCutoffError);
    try {
        required_aperture_length(coupled, 9e9);
    } catch (const ModeCutoffError& e) {
        CHECK(e.cutoff_hz() == doctest::Approx(cutoff_frequency(coupled, {2})));
    }
    // The even/odd difference shrinks with frequency, so the length grows.
    double previous = 0.0;
    for (double f = 9.5e9; f <= 15e9; f += 0.5e9) {
        const double len = required_aperture_length(coupled, f);
        CHECK(len > previous);
        previous = len;
    }
    CHECK_THROWS_AS(coupler_phase_difference(coupled, -1e-3, 12.5e9), DomainError);
}

TEST_CASE("ideal circulator matrix") {
    const ScatteringMatrix s0 = ideal_circulator_matrix(0.0);
    CHECK(s0.order() == 3);
    CHECK_FALSE(s0.frequency.has_value());
    CHECK(s0(2, 1) == Complex(1.0, 0.0));
    CHECK(s0(3, 2) == Complex(1.0, 0.0));
    CHECK(s0(1, 3) == Complex(1.0, 0.0));
    CHECK(std::abs(s0(1, 1)) + std::abs(s0(1, 2)) + std::abs(s0(2, 3)) == 0.0);
    for (double phi = -3.0; phi <= 3.0; phi += 0.25) {
        const ScatteringMatrix s = ideal_circulator_matrix(phi);
        CHECK(s.unitarity_error() <= 1e-14);
        CHECK(s.reciprocity_error() > 0.5);
    }
}

TEST_CASE("ideal coupler matrix") {
    const ScatteringMatrix s = ideal_coupler_matrix();
    CHECK(s.order() == 4);
    CHECK(s.unitarity_error() <= 1e-14);
    CHECK(s.reciprocity_error() == 0.0);
    CHECK(std::norm(s(2, 1)) + std::norm(s(3, 1)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(to_db(std::abs(s(2, 1))) == doctest::Approx(-3.0103).epsilon(1e-5));
    CHECK(std::arg(s(3, 1)) - std::arg(s(2, 1)) == doctest::Approx(kPi / 2));
}

#pragma once

// Physical constants, TE_n0 dispersion of the dielectric-filled equivalent
// guide, the via-wall design equations, and the ideal scattering matrices of
// the circulator and the quadrature coupler.
//
// All quantities are SI: meters, hertz, radians.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace siwforge {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact
inline constexpr double kPi = 3.14159265358979323846;

struct Substrate {
    double epsilon_r = 1.0;
    double height = 0.0;  // m
};

/// Two via rows: center-to-center spacing w_siw, via diameter d, pitch p.
struct RsiwCrossSection {
    double w_siw = 0.0;
    double via_diameter = 0.0;
    double pitch = 0.0;
    Substrate substrate;
};

/// Solid-wall dielectric-filled guide with the same fundamental-mode dispersion.
struct EquivalentGuide {
    double w_eq = 0.0;
    Substrate substrate;
};

/// TE_n0 mode number.
struct ModeIndex {
    int n = 1;
};

struct Band {
    double f_low = 0.0;
    double f_high = 0.0;
    double center() const { return 0.5 * (f_low + f_high); }
};

struct FerriteSpec {
    double epsilon_f = 1.0;
    double saturation_4pi_ms_gauss = 0.0;
    double radius = 0.0;  // m
    double height = 0.0;  // m
    // Bias field is informational only; no implemented equation consumes it.
    std::optional<double> bias_field_oe;
};

/// Complex N x N scattering matrix. Ideal (frequency-flat) matrices carry no frequency.
struct ScatteringMatrix {
    Eigen::MatrixXcd entries;
    std::optional<double> frequency;

    int order() const { return static_cast<int>(entries.rows()); }
    /// 1-based port access, S(i, j) = b_i / a_j.
    Complex operator()(int i, int j) const { return entries(i - 1, j - 1); }
    /// max |(S S^H - I)_ij|
    double unitarity_error() const;
    /// max |S_ij - S_ji|
    double reciprocity_error() const;
};

// Type invariants. Each throws DomainError naming the violated condition.
void validate(const Substrate& s);
void validate(const RsiwCrossSection& x);
void validate(const EquivalentGuide& g);
void validate(const ModeIndex& m);
void validate(const Band& b);
void validate(const FerriteSpec& f);

double free_space_wavelength(double frequency);

/// W_eq = W_SIW - d^2 / (0.95 p). Throws GeometryError if the result is not positive.
EquivalentGuide equivalent_width(const RsiwCrossSection& x);

/// Algebraic inverse of equivalent_width for a chosen via diameter and pitch.
RsiwCrossSection siw_width_from_equivalent(const EquivalentGuide& g, double via_diameter,
                                           double pitch);

struct RuleResult {
    std::string name;
    bool passed = false;
    double value = 0.0;  // the constrained quantity (pitch), m
    double bound = 0.0;  // strict upper bound, m
    double margin() const { return bound - value; }
};

struct DesignRuleReport {
    std::vector<RuleResult> rules;
    bool all_passed() const;
};

/// Anti-leakage pitch rules, evaluated at the top of the band:
///   p < lambda0(f_high) / (2 sqrt(eps_r))   and   p < 4 d.
DesignRuleReport check_design_rules(const RsiwCrossSection& x, const Band& band);

double cutoff_frequency(const EquivalentGuide& g, ModeIndex m);

/// Longitudinal wavenumber of TE_n0. Real and positive above cutoff,
/// +j|alpha| below.
Complex propagation_constant(const EquivalentGuide& g, ModeIndex m, double frequency);

struct DispersionPoint {
    double frequency = 0.0;
    Complex beta;
};

std::vector<DispersionPoint> dispersion_curve(const EquivalentGuide& g, ModeIndex m,
                                              const Band& band, int n_points);

/// Ferrite puck radius 1.84 c / (omega0 sqrt(eps_f)).
double ferrite_radius(double f0, double epsilon_f);

/// Even/odd phase difference (beta_TE10 - beta_TE20) * aperture_length in the
/// coupled region. Throws ModeCutoffError if TE20 is evanescent.
double coupler_phase_difference(const EquivalentGuide& coupled, double aperture_length,
                                double frequency);

/// Aperture length giving a pi/2 even/odd phase difference.
double required_aperture_length(const EquivalentGuide& coupled, double frequency);

/// S13 = S21 = S32 = e^{j phi}, circulation 1 -> 2 -> 3 -> 1.
ScatteringMatrix ideal_circulator_matrix(double phase);

/// (1/sqrt 2) [[0,1,j,0],[1,0,0,j],[j,0,0,1],[0,j,1,0]]
ScatteringMatrix ideal_coupler_matrix();

inline double to_db(double magnitude) { return 20.0 * std::log10(magnitude); }

}  // namespace siwforge

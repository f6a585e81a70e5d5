#include "siwforge/em_core.hpp"

#include "siwforge/errors.hpp"

#include <cmath>
#include <sstream>

namespace siwforge {

namespace {

void require(bool condition, const char* message) {
    if (!condition) throw DomainError(message);
}

double wavenumber(double frequency) { return 2.0 * kPi * frequency / kSpeedOfLight; }

}  // namespace

double ScatteringMatrix::unitarity_error() const {
    const Eigen::MatrixXcd product = entries * entries.adjoint();
    return (product - Eigen::MatrixXcd::Identity(order(), order())).cwiseAbs().maxCoeff();
}

double ScatteringMatrix::reciprocity_error() const {
    return (entries - entries.transpose()).cwiseAbs().maxCoeff();
}

void validate(const Substrate& s) {
    require(std::isfinite(s.epsilon_r) && s.epsilon_r >= 1.0, "substrate: epsilon_r must be >= 1");
    require(std::isfinite(s.height) && s.height > 0.0, "substrate: height must be > 0");
}

void validate(const RsiwCrossSection& x) {
    validate(x.substrate);
    require(x.via_diameter >= 0.0, "cross-section: via diameter must be >= 0");
    require(x.pitch > 0.0, "cross-section: pitch must be > 0");
    require(x.via_diameter < x.pitch, "cross-section: vias overlap (d >= p)");
    require(x.w_siw > x.via_diameter, "cross-section: w_siw must exceed the via diameter");
}

void validate(const EquivalentGuide& g) {
    validate(g.substrate);
    require(std::isfinite(g.w_eq) && g.w_eq > 0.0, "equivalent guide: w_eq must be > 0");
}

void validate(const ModeIndex& m) { require(m.n >= 1, "mode index must be >= 1"); }

void validate(const Band& b) {
    require(b.f_low > 0.0 && b.f_low < b.f_high, "band: require 0 < f_low < f_high");
}

void validate(const FerriteSpec& f) {
    require(f.epsilon_f >= 1.0, "ferrite: epsilon_f must be >= 1");
    require(f.radius > 0.0, "ferrite: radius must be > 0");
    require(f.height > 0.0, "ferrite: height must be > 0");
}

double free_space_wavelength(double frequency) {
    if (!(frequency > 0.0)) throw DomainError("frequency must be positive");
    return kSpeedOfLight / frequency;
}

EquivalentGuide equivalent_width(const RsiwCrossSection& x) {
    validate(x);
    const double d = x.via_diameter;
    const double w_eq = x.w_siw - d * d / (0.95 * x.pitch);
    if (!(w_eq > 0.0)) throw GeometryError("equivalent width is not positive");
    return {w_eq, x.substrate};
}

RsiwCrossSection siw_width_from_equivalent(const EquivalentGuide& g, double via_diameter,
                                           double pitch) {
    validate(g);
    RsiwCrossSection x{g.w_eq + via_diameter * via_diameter / (0.95 * pitch), via_diameter, pitch,
                       g.substrate};
    validate(x);
    return x;
}

bool DesignRuleReport::all_passed() const {
    for (const auto& r : rules)
        if (!r.passed) return false;
    return true;
}

DesignRuleReport check_design_rules(const RsiwCrossSection& x, const Band& band) {
    validate(x);
    validate(band);
    DesignRuleReport report;
    const double leakage_bound =
        free_space_wavelength(band.f_high) / (2.0 * std::sqrt(x.substrate.epsilon_r));
    report.rules.push_back(
        {"pitch < lambda0/(2 sqrt(er))", x.pitch < leakage_bound, x.pitch, leakage_bound});
    const double spacing_bound = 4.0 * x.via_diameter;
    report.rules.push_back({"pitch < 4 d", x.pitch < spacing_bound, x.pitch, spacing_bound});
    return report;
}

double cutoff_frequency(const EquivalentGuide& g, ModeIndex m) {
    validate(g);
    validate(m);
    return m.n * kSpeedOfLight / (2.0 * g.w_eq * std::sqrt(g.substrate.epsilon_r));
}

Complex propagation_constant(const EquivalentGuide& g, ModeIndex m, double frequency) {
    validate(g);
    validate(m);
    if (!(frequency > 0.0)) throw DomainError("frequency must be positive");
    const double k0 = wavenumber(frequency);
    const double kc = m.n * kPi / g.w_eq;
    const double beta_sq = g.substrate.epsilon_r * k0 * k0 - kc * kc;
    if (beta_sq >= 0.0) return {std::sqrt(beta_sq), 0.0};
    return {0.0, std::sqrt(-beta_sq)};
}

std::vector<DispersionPoint> dispersion_curve(const EquivalentGuide& g, ModeIndex m,
                                              const Band& band, int n_points) {
    validate(band);
    if (n_points < 2) throw DomainError("dispersion curve needs at least 2 points");
    std::vector<DispersionPoint> table;
    table.reserve(static_cast<std::size_t>(n_points));
    const double step = (band.f_high - band.f_low) / (n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        const double f = i + 1 == n_points ? band.f_high : band.f_low + i * step;
        table.push_back({f, propagation_constant(g, m, f)});
    }
    return table;
}

double ferrite_radius(double f0, double epsilon_f) {
    if (!(f0 > 0.0)) throw DomainError("operating frequency must be positive");
    if (!(epsilon_f >= 1.0)) throw DomainError("ferrite permittivity must be >= 1");
    const double omega0 = 2.0 * kPi * f0;
    return 1.84 * kSpeedOfLight / (omega0 * std::sqrt(epsilon_f));
}

namespace {

double even_odd_beta_difference(const EquivalentGuide& coupled, double frequency) {
    const Complex even = propagation_constant(coupled, ModeIndex{1}, frequency);
    const Complex odd = propagation_constant(coupled, ModeIndex{2}, frequency);
    if (even.imag() > 0.0 || odd.imag() > 0.0 || odd.real() == 0.0) {
        const double fc = cutoff_frequency(coupled, ModeIndex{2});
        std::ostringstream msg;
        msg << "TE20 of the coupled region is evanescent at " << frequency * 1e-9
            << " GHz (cutoff " << fc * 1e-9 << " GHz)";
        throw ModeCutoffError(msg.str(), fc);
    }
    return even.real() - odd.real();
}

}  // namespace

double coupler_phase_difference(const EquivalentGuide& coupled, double aperture_length,
                                double frequency) {
    if (aperture_length < 0.0) throw DomainError("aperture length must be >= 0");
    return even_odd_beta_difference(coupled, frequency) * aperture_length;
}

double required_aperture_length(const EquivalentGuide& coupled, double frequency) {
    return (0.5 * kPi) / even_odd_beta_difference(coupled, frequency);
}

ScatteringMatrix ideal_circulator_matrix(double phase) {
    const Complex t = std::polar(1.0, phase);
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(3, 3);
    s(1, 0) = t;  // S21
    s(2, 1) = t;  // S32
    s(0, 2) = t;  // S13
    return {s, std::nullopt};
}

ScatteringMatrix ideal_coupler_matrix() {
    const Complex j{0.0, 1.0};
    const double a = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXcd s(4, 4);
    s << 0, 1, j, 0,
         1, 0, 0, j,
         j, 0, 0, 1,
         0, j, 1, 0;
    return {a * s, std::nullopt};
}

}  // namespace siwforge

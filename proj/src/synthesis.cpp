#include "siwforge/synthesis.hpp"

#include "siwforge/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace siwforge {

namespace {

constexpr double kGeomTol = 1e-12;  // m

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }

// Number of vias on a wall segment of the given length at the given pitch.
int vias_on_segment(double length, double pitch) {
    return static_cast<int>(std::floor(length / pitch * (1.0 + 1e-12))) + 1;
}

// Via row of floor(length/p)+1 vias centered on [start, start+length] along x.
void add_centered_row_x(std::vector<Via>& vias, double x_start, double length, double y,
                        double pitch, double radius) {
    const int n = vias_on_segment(length, pitch);
    const double first = x_start + 0.5 * (length - (n - 1) * pitch);
    for (int k = 0; k < n; ++k) vias.push_back({{first + k * pitch, y}, radius});
}

Rect bounding_box(const std::vector<Point2>& points) {
    Rect r{points.front().x, points.front().y, points.front().x, points.front().y};
    for (const auto& p : points) {
        r.x_min = std::min(r.x_min, p.x);
        r.y_min = std::min(r.y_min, p.y);
        r.x_max = std::max(r.x_max, p.x);
        r.y_max = std::max(r.y_max, p.y);
    }
    return r;
}

bool on_outline_edge(Point2 p, const Rect& r) {
    constexpr double tol = 1e-9;
    const bool in_x = p.x >= r.x_min - tol && p.x <= r.x_max + tol;
    const bool in_y = p.y >= r.y_min - tol && p.y <= r.y_max + tol;
    return (in_y && (std::abs(p.x - r.x_min) < tol || std::abs(p.x - r.x_max) < tol)) ||
           (in_x && (std::abs(p.y - r.y_min) < tol || std::abs(p.y - r.y_max) < tol));
}

bool inside_with_tol(Point2 p, const Rect& r) {
    return p.x >= r.x_min - kGeomTol && p.x <= r.x_max + kGeomTol && p.y >= r.y_min - kGeomTol &&
           p.y <= r.y_max + kGeomTol;
}

}  // namespace

std::string_view to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::straight: return "straight";
        case DeviceKind::divider: return "divider";
        case DeviceKind::circulator: return "circulator";
        case DeviceKind::coupler: return "coupler";
    }
    return "unknown";
}

DeviceKind device_kind_from_string(std::string_view name) {
    for (auto k : {DeviceKind::straight, DeviceKind::divider, DeviceKind::circulator,
                   DeviceKind::coupler})
        if (to_string(k) == name) return k;
    throw DomainError("unknown device kind '" + std::string(name) + "'");
}

int expected_port_count(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::straight: return 2;
        case DeviceKind::divider: return 3;
        case DeviceKind::circulator: return 3;
        case DeviceKind::coupler: return 4;
    }
    return 0;
}

void validate_layout(const ViaLayout& layout) {
    validate(layout.substrate);
    const Rect& o = layout.outline;
    if (!(o.x_max > o.x_min && o.y_max > o.y_min)) throw GeometryError("outline is empty");
    for (std::size_t i = 0; i < layout.vias.size(); ++i) {
        const Via& a = layout.vias[i];
        if (!(a.radius > 0.0)) throw GeometryError("via radius must be positive");
        if (!inside_with_tol(a.center, o)) {
            std::ostringstream msg;
            msg << "via " << i << " at (" << a.center.x * 1e3 << ", " << a.center.y * 1e3
                << ") mm lies outside the outline";
            throw GeometryError(msg.str());
        }
        for (std::size_t j = i + 1; j < layout.vias.size(); ++j) {
            const Via& b = layout.vias[j];
            if (a.wall_contact || b.wall_contact) continue;
            if (distance(a.center, b.center) <= a.radius + b.radius) {
                std::ostringstream msg;
                msg << "vias " << i << " and " << j << " overlap at (" << a.center.x * 1e3 << ", "
                    << a.center.y * 1e3 << ") mm";
                throw GeometryError(msg.str());
            }
        }
    }
    for (const Rect& r : layout.rects) {
        if (!(r.x_max > r.x_min && r.y_max > r.y_min)) throw GeometryError("empty rod rectangle");
        if (!inside_with_tol({r.x_min, r.y_min}, o) || !inside_with_tol({r.x_max, r.y_max}, o))
            throw GeometryError("rod rectangle outside the outline");
    }
}

void validate_blueprint(const DeviceBlueprint& bp) {
    validate(bp.cross_section);
    validate_layout(bp.layout);
    const int n = expected_port_count(bp.kind);
    if (static_cast<int>(bp.ports.size()) != n)
        throw GeometryError(std::string(to_string(bp.kind)) + " needs " + std::to_string(n) +
                            " ports");
    std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
    for (const PortSpec& p : bp.ports) {
        if (p.id < 1 || p.id > n || seen[static_cast<std::size_t>(p.id)])
            throw GeometryError("port ids must be 1.." + std::to_string(n) + " without repeats");
        seen[static_cast<std::size_t>(p.id)] = true;
        if (!(p.width > 0.0)) throw GeometryError("port width must be positive");
        if (std::abs(std::hypot(p.normal.x, p.normal.y) - 1.0) > 1e-9)
            throw GeometryError("port normal must be a unit vector");
        const bool axis_aligned = std::abs(p.normal.x) < 1e-12 || std::abs(p.normal.y) < 1e-12;
        if (!inside_with_tol(p.position, bp.layout.outline) ||
            (axis_aligned && !on_outline_edge(p.position, bp.layout.outline)))
            throw GeometryError("port " + std::to_string(p.id) + " is not on the outline");
    }
}

// ---------------------------------------------------------------------------

RsiwCrossSection synthesize_rsiw(const Band& band, const Substrate& substrate,
                                 double via_diameter, double pitch) {
    validate(band);
    validate(substrate);
    const double fc = band.f_low / kCutoffPlacementFactor;
    const EquivalentGuide g{kSpeedOfLight / (2.0 * fc * std::sqrt(substrate.epsilon_r)),
                            substrate};
    const RsiwCrossSection x = siw_width_from_equivalent(g, via_diameter, pitch);

    const double fc2 = cutoff_frequency(g, ModeIndex{2});
    if (fc2 <= band.f_high) {
        std::ostringstream msg;
        msg << "band too wide: TE20 cutoff " << fc2 * 1e-9 << " GHz <= f_high "
            << band.f_high * 1e-9 << " GHz";
        throw BandTooWideError(msg.str());
    }
    const DesignRuleReport rules = check_design_rules(x, band);
    if (!rules.all_passed()) {
        std::ostringstream msg;
        msg << "design rule violated:";
        for (const auto& r : rules.rules)
            if (!r.passed)
                msg << " [" << r.name << ": p = " << r.value * 1e3 << " mm, bound "
                    << r.bound * 1e3 << " mm]";
        throw DesignRuleError(msg.str());
    }
    return x;
}

// Hammerstad-Jensen quasi-static microstrip model.
double microstrip_effective_permittivity(double width, const Substrate& s) {
    validate(s);
    const double u = width / s.height;
    const double er = s.epsilon_r;
    const double a = 1.0 + std::log((std::pow(u, 4) + std::pow(u / 52.0, 2)) /
                                    (std::pow(u, 4) + 0.432)) / 49.0 +
                     std::log(1.0 + std::pow(u / 18.1, 3)) / 18.7;
    const double b = 0.564 * std::pow((er - 0.9) / (er + 3.0), 0.053);
    return 0.5 * (er + 1.0) + 0.5 * (er - 1.0) * std::pow(1.0 + 10.0 / u, -a * b);
}

double microstrip_impedance(double width, const Substrate& s) {
    if (!(width > 0.0)) throw DomainError("microstrip width must be positive");
    constexpr double eta0 = 4.0e-7 * kPi * kSpeedOfLight;
    const double u = width / s.height;
    const double f = 6.0 + (2.0 * kPi - 6.0) * std::exp(-std::pow(30.666 / u, 0.7528));
    const double z_air = eta0 / (2.0 * kPi) * std::log(f / u + std::sqrt(1.0 + 4.0 / (u * u)));
    return z_air / std::sqrt(microstrip_effective_permittivity(width, s));
}

double microstrip_50ohm_width(const Substrate& s) {
    validate(s);
    if (s.epsilon_r > 20.0) throw DomainError("microstrip synthesis requires epsilon_r <= 20");
    constexpr double target = 50.0;
    double lo = std::log(0.01), hi = std::log(100.0);
    auto z_at = [&](double log_u) { return microstrip_impedance(std::exp(log_u) * s.height, s); };
    if (!(z_at(lo) > target && z_at(hi) < target))
        throw NumericError("50 ohm width not bracketed in 0.01 <= w/h <= 100");
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (z_at(mid) > target ? lo : hi) = mid;
    }
    const double w = std::exp(0.5 * (lo + hi)) * s.height;
    if (std::abs(microstrip_impedance(w, s) - target) > 0.005 * target)
        throw NumericError("50 ohm width search did not converge");
    return w;
}

TaperTransition synthesize_taper(const RsiwCrossSection& x, double f_center) {
    validate(x);
    if (!(f_center > 0.0)) throw DomainError("frequency must be positive");
    TaperTransition t;
    t.w_mst = microstrip_50ohm_width(x.substrate);
    t.w_t = std::max(t.w_mst, kTaperWidthRatio * x.w_siw);
    const double lambda_g = free_space_wavelength(f_center) /
                            std::sqrt(microstrip_effective_permittivity(t.w_t, x.substrate));
    const double quarter = 0.25 * lambda_g;
    t.l_t = quarter * std::max(1.0, std::ceil(2.0e-3 / quarter));
    return t;
}

// ---------------------------------------------------------------------------

DeviceBlueprint generate_straight_guide(const RsiwCrossSection& x, double length) {
    validate(x);
    if (!(length >= 2.0 * x.pitch * (1.0 - 1e-12)))
        throw GeometryError("straight guide must be at least two pitches long");
    const double r = 0.5 * x.via_diameter;
    const double half = 0.5 * x.w_siw;
    DeviceBlueprint bp;
    bp.kind = DeviceKind::straight;
    bp.cross_section = x;
    bp.layout.substrate = x.substrate;
    add_centered_row_x(bp.layout.vias, 0.0, length, half, x.pitch, r);
    add_centered_row_x(bp.layout.vias, 0.0, length, -half, x.pitch, r);
    bp.layout.outline = {0.0, -half - x.pitch, length, half + x.pitch};
    bp.ports = {{1, {0.0, 0.0}, x.w_siw, {1.0, 0.0}}, {2, {length, 0.0}, x.w_siw, {-1.0, 0.0}}};
    bp.extras.arm_length = length;
    validate_blueprint(bp);
    return bp;
}

DeviceBlueprint generate_divider(const RsiwCrossSection& x, double arm_length, double post_radius,
                                 double post_offset_xp) {
    validate(x);
    if (!(arm_length >= 2.0 * x.pitch)) throw GeometryError("divider arm shorter than 2 pitches");
    if (post_radius < 0.0) throw GeometryError("post radius must be >= 0");
    const double r = 0.5 * x.via_diameter;
    const double h = 0.5 * x.w_siw;
    const double reach = h + arm_length;  // port planes at |x| = reach and y = -reach

    DeviceBlueprint bp;
    bp.kind = DeviceKind::divider;
    bp.cross_section = x;
    bp.layout.substrate = x.substrate;
    auto& vias = bp.layout.vias;

    // Back wall spans both output arms and closes the junction.
    add_centered_row_x(vias, -reach, 2.0 * reach, h, x.pitch, r);
    // Output-arm lower walls and input-arm side walls start at the shared corner vertices.
    const int n_arm = vias_on_segment(arm_length, x.pitch);
    for (int side : {1, -1}) {
        for (int k = 0; k < n_arm; ++k) vias.push_back({{side * (h + k * x.pitch), -h}, r});
        for (int k = 1; k < n_arm; ++k) vias.push_back({{side * h, -h - k * x.pitch}, r});
    }

    if (post_radius > 0.0) {
        InductivePost post{post_radius, post_offset_xp, {0.0, h - post_offset_xp}};
        if (std::abs(post.center.y) > h - post_radius)
            throw GeometryError("inductive post lies outside the junction");
        for (const Via& v : vias)
            if (distance(v.center, post.center) <= v.radius + post_radius)
                throw GeometryError("inductive post collides with a wall via");
        vias.push_back({post.center, post_radius});
        bp.extras.post = post;
    }

    bp.layout.outline = {-reach, -reach, reach, h + x.pitch};
    bp.ports = {{1, {0.0, -reach}, x.w_siw, {0.0, 1.0}},
                {2, {reach, 0.0}, x.w_siw, {-1.0, 0.0}},
                {3, {-reach, 0.0}, x.w_siw, {1.0, 0.0}}};
    bp.extras.arm_length = arm_length;
    validate_blueprint(bp);
    return bp;
}

DeviceBlueprint generate_circulator(const RsiwCrossSection& x, double arm_length,
                                    const FerriteSpec& ferrite) {
    validate(x);
    validate(ferrite);
    if (!(arm_length >= 2.0 * x.pitch)) throw GeometryError("circulator arm shorter than 2 pitches");
    const double r = 0.5 * x.via_diameter;
    const double h = 0.5 * x.w_siw;
    // Adjacent arm walls meet at vertices on the bisectors, w/sqrt(3) from the center.
    const double vertex_radius = x.w_siw / std::sqrt(3.0);
    const double vertex_axial = 0.5 * vertex_radius;  // projection on each arm axis
    const int n_arm = vias_on_segment(arm_length, x.pitch);

    DeviceBlueprint bp;
    bp.kind = DeviceKind::circulator;
    bp.cross_section = x;
    bp.layout.substrate = x.substrate;
    auto& vias = bp.layout.vias;

    // Arms at -90, 30, 150 degrees; ports numbered counterclockwise.
    std::vector<Point2> extent;
    for (int k = 0; k < 3; ++k) {
        const double theta = kPi * (-0.5 + 2.0 * k / 3.0);
        Point2 axis{std::cos(theta), std::sin(theta)};
        if (std::abs(axis.x) < 1e-12) axis = {0.0, axis.y > 0.0 ? 1.0 : -1.0};
        const Point2 left{-axis.y, axis.x};
        // Left wall starts on its vertex; the right wall's vertex belongs to the previous arm.
        for (int side : {1, -1}) {
            const Point2 start = vertex_axial * axis + (side * h) * left;
            for (int j = side == 1 ? 0 : 1; j < n_arm; ++j) {
                vias.push_back({start + (j * x.pitch) * axis, r});
                extent.push_back(vias.back().center);
            }
        }
        const Point2 port = (vertex_axial + arm_length) * axis;
        bp.ports.push_back({k + 1, port, x.w_siw, {-axis.x, -axis.y}});
        extent.push_back(port);
    }
    for (const Via& v : vias)
        if (std::hypot(v.center.x, v.center.y) - v.radius <= ferrite.radius)
            throw GeometryError("ferrite puck collides with the junction walls");

    Rect box = bounding_box(extent);
    // Port 1 faces -y, so the lower edge is its port plane.
    box = {box.x_min - x.pitch, bp.ports[0].position.y, box.x_max + x.pitch, box.y_max + x.pitch};
    bp.layout.outline = box;
    bp.extras.arm_length = arm_length;
    bp.extras.ferrite = ferrite;
    bp.extras.ferrite_center = Point2{0.0, 0.0};
    validate_blueprint(bp);
    return bp;
}

DeviceBlueprint generate_coupler(const RsiwCrossSection& x, double total_length,
                                 const ApertureParams& ap) {
    validate(x);
    if (!(ap.w_ap > 0.0) || ap.w_s < 0.0 || ap.l_s < 0.0 || ap.l_ap < 0.0)
        throw GeometryError("aperture parameters must be non-negative, window positive");
    if (!(ap.w_ap < total_length)) throw GeometryError("aperture exceeds the guide length");
    const double span = ap.w_ap + 2.0 * ap.w_s;
    if (!(span < total_length)) throw GeometryError("aperture and rods exceed the guide length");

    const double r = 0.5 * x.via_diameter;
    const double w = x.w_siw;
    const double mid = 0.5 * total_length;

    DeviceBlueprint bp;
    bp.kind = DeviceKind::coupler;
    bp.cross_section = x;
    bp.layout.substrate = x.substrate;
    auto& vias = bp.layout.vias;
    add_centered_row_x(vias, 0.0, total_length, w, x.pitch, r);
    add_centered_row_x(vias, 0.0, total_length, -w, x.pitch, r);

    std::vector<Via> common;
    add_centered_row_x(common, 0.0, total_length, 0.0, x.pitch, r);
    // Common-wall vias survive only with l_ap clearance from the window and rods.
    for (const Via& v : common)
        if (std::abs(v.center.x - mid) - v.radius >= 0.5 * span + ap.l_ap) vias.push_back(v);

    if (ap.w_s > 0.0 && ap.l_s > 0.0) {
        const double t = 0.5 * ap.l_s;
        bp.layout.rects.push_back({mid - 0.5 * span, -t, mid - 0.5 * ap.w_ap, t});
        bp.layout.rects.push_back({mid + 0.5 * ap.w_ap, -t, mid + 0.5 * span, t});
    }

    bp.layout.outline = {0.0, -w - x.pitch, total_length, w + x.pitch};
    const double yc = 0.5 * w;
    bp.ports = {{1, {0.0, yc}, w, {1.0, 0.0}},
                {2, {total_length, yc}, w, {-1.0, 0.0}},
                {3, {total_length, -yc}, w, {-1.0, 0.0}},
                {4, {0.0, -yc}, w, {1.0, 0.0}}};
    bp.extras.arm_length = total_length;
    bp.extras.aperture = ap;
    validate_blueprint(bp);
    return bp;
}

EquivalentGuide coupled_region_guide(const RsiwCrossSection& x) {
    const EquivalentGuide single = equivalent_width(x);
    return {2.0 * single.w_eq, single.substrate};
}

// ---------------------------------------------------------------------------

namespace reference {

Substrate substrate() { return {kEpsilonR, kHeight}; }
RsiwCrossSection cross_section() { return {kWSiw, kViaDiameter, kPitch, substrate()}; }
Band band() { return {kBandLow, kBandHigh}; }
TaperTransition taper() { return {kMicrostripWidth, kTaperWidth, kTaperLength}; }
FerriteSpec ferrite() {
    return {kFerritePermittivity, kFerrite4PiMs, kFerriteRadius, kFerriteHeight, std::nullopt};
}
ApertureParams aperture() { return {kCouplerWap, kCouplerLap, kCouplerWs, kCouplerLs}; }

DeviceBlueprint straight() { return generate_straight_guide(cross_section(), kStraightLength); }
DeviceBlueprint divider() {
    return generate_divider(cross_section(), kDividerArmLength, kDividerPostRadius,
                            kDividerPostOffset);
}
DeviceBlueprint circulator() {
    return generate_circulator(cross_section(), kCirculatorArmLength, ferrite());
}
DeviceBlueprint coupler() { return generate_coupler(cross_section(), kCouplerLength, aperture()); }

DeviceBlueprint fixture(std::string_view name) {
    switch (device_kind_from_string(name)) {
        case DeviceKind::straight: return straight();
        case DeviceKind::divider: return divider();
        case DeviceKind::circulator: return circulator();
        case DeviceKind::coupler: return coupler();
    }
    throw DomainError("unknown fixture");
}

}  // namespace reference

}  // namespace siwforge

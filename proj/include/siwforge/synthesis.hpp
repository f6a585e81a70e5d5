#pragma once

#include "siwforge/em_core.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace siwforge {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Rect {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    bool contains(Point2 p) const {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
    }
};

/// Metallized cylinder through the substrate.
struct Via {
    Point2 center;
    double radius = 0.0;
    // Set when a via deliberately touches another metal feature (post against wall).
    bool wall_contact = false;
};

struct ViaLayout {
    std::vector<Via> vias;
    std::vector<Rect> rects;  // rectangular metal rods, rasterized exactly
    Rect outline;
    Substrate substrate;
};

/// Waveguide port on the outline. `position` is the center of the port
/// aperture on the reference plane; `normal` points into the device.
struct PortSpec {
    int id = 0;
    Point2 position;
    double width = 0.0;
    Point2 normal;
};

struct TaperTransition {
    double w_mst = 0.0;
    double w_t = 0.0;
    double l_t = 0.0;
};

enum class DeviceKind { straight, divider, circulator, coupler };

std::string_view to_string(DeviceKind kind);
DeviceKind device_kind_from_string(std::string_view name);

/// Inductive matching post of the T-junction divider.
struct InductivePost {
    double radius = 0.0;
    double offset_xp = 0.0;  // from the back wall, along the input-arm centerline
    Point2 center;
};

/// Aperture coupler parameters. The roles of the rod block are an
/// interpretation of the published drawing, isolated here:
///   w_ap  window length in the common wall (wall vias removed)
///   w_s   length of each solid rod continuing the wall beyond a window end
///   l_s   rod thickness across the wall
///   l_ap  width of the common wall (metal between the two guides)
struct ApertureParams {
    double w_ap = 0.0;
    double l_ap = 0.0;
    double w_s = 0.0;
    double l_s = 0.0;
};

struct DeviceExtras {
    double arm_length = 0.0;  // arm / total length, per kind
    std::optional<InductivePost> post;
    std::optional<FerriteSpec> ferrite;
    std::optional<Point2> ferrite_center;
    std::optional<ApertureParams> aperture;
};

struct DeviceBlueprint {
    DeviceKind kind = DeviceKind::straight;
    RsiwCrossSection cross_section;
    ViaLayout layout;
    std::vector<PortSpec> ports;
    DeviceExtras extras;
};

/// Checks non-overlap of vias (unless flagged wall_contact), that vias and
/// rods are inside the outline, and that port ids/widths/positions are sane.
/// Throws GeometryError.
void validate_layout(const ViaLayout& layout);
void validate_blueprint(const DeviceBlueprint& blueprint);

int expected_port_count(DeviceKind kind);

// ---------------------------------------------------------------------------
// Synthesis

/// Ratio f_low / f_c(TE10) used to place the fundamental cutoff below the band.
inline constexpr double kCutoffPlacementFactor = 1.062;

RsiwCrossSection synthesize_rsiw(const Band& band, const Substrate& substrate,
                                 double via_diameter, double pitch);

/// Quasi-static characteristic impedance of a microstrip of width w.
double microstrip_impedance(double width, const Substrate& substrate);
/// Quasi-static effective permittivity of a microstrip of width w.
double microstrip_effective_permittivity(double width, const Substrate& substrate);
/// Width giving 50 ohm.
double microstrip_50ohm_width(const Substrate& substrate);

/// Taper width as a fraction of w_siw.
inline constexpr double kTaperWidthRatio = 0.35;

TaperTransition synthesize_taper(const RsiwCrossSection& x, double f_center);

DeviceBlueprint generate_straight_guide(const RsiwCrossSection& x, double length);
DeviceBlueprint generate_divider(const RsiwCrossSection& x, double arm_length,
                                 double post_radius, double post_offset_xp);
DeviceBlueprint generate_circulator(const RsiwCrossSection& x, double arm_length,
                                    const FerriteSpec& ferrite);
DeviceBlueprint generate_coupler(const RsiwCrossSection& x, double total_length,
                                 const ApertureParams& aperture);

/// Width of the guide formed by both coupler halves with the common wall
/// removed, taken as twice the single-guide equivalent width.
EquivalentGuide coupled_region_guide(const RsiwCrossSection& x);

// ---------------------------------------------------------------------------
// Published reference designs (stored constants, SI).

namespace reference {

inline constexpr double kEpsilonR = 2.2;
inline constexpr double kHeight = 0.8e-3;
inline constexpr double kViaDiameter = 0.5e-3;
inline constexpr double kPitch = 1.0e-3;
inline constexpr double kWSiw = 11.0e-3;
inline constexpr double kWEqTable = 10.73e-3;

inline constexpr double kTaperLength = 2.1e-3;
inline constexpr double kTaperWidth = 3.81e-3;
inline constexpr double kMicrostripWidth = 2.41e-3;
inline constexpr double kStraightLength = 40.016e-3;

inline constexpr double kDividerArmLength = 14.5e-3;
inline constexpr double kDividerPostRadius = 0.254e-3;
inline constexpr double kDividerPostOffset = 5.25e-3;

inline constexpr double kCirculatorArmLength = 9.016e-3;
inline constexpr double kFerriteRadius = 2.3e-3;
inline constexpr double kFerriteHeight = 0.8e-3;
inline constexpr double kFerritePermittivity = 13.7;
inline constexpr double kFerrite4PiMs = 1250.0;  // gauss
inline constexpr double kCirculatorCenterFrequency = 12.5e9;

inline constexpr double kCouplerLength = 31.016e-3;
inline constexpr double kCouplerWs = 6.0e-3;
inline constexpr double kCouplerLs = 0.3e-3;
inline constexpr double kCouplerWap = 16.0e-3;
inline constexpr double kCouplerLap = 0.5e-3;

inline constexpr double kBandLow = 10.0e9;
inline constexpr double kBandHigh = 15.0e9;

Substrate substrate();
RsiwCrossSection cross_section();
Band band();
TaperTransition taper();
FerriteSpec ferrite();
ApertureParams aperture();

DeviceBlueprint straight();
DeviceBlueprint divider();
DeviceBlueprint circulator();
DeviceBlueprint coupler();

/// "straight" | "divider" | "circulator" | "coupler"
DeviceBlueprint fixture(std::string_view name);

}  // namespace reference

}  // namespace siwforge

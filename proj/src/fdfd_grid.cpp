#include "siwforge/errors.hpp"
#include "siwforge/fdfd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace siwforge {

namespace {

// Smallest wall fraction kept in the stencil; closer walls are snapped to it.
constexpr double kMinWallFraction = 0.05;

// Samples per link when probing for metal between two open nodes.
constexpr int kLinkSamples = 16;
// Any cut link has a fraction strictly below one; assembly relies on that.
constexpr double kCutLink = 1.0 - 1e-9;

// Empirical UMFPACK footprint for 5-point complex systems of this size class.
constexpr double kFactorBytesPerNode = 1600.0;

// Effectively unbounded length for port slabs running out through the absorber.
constexpr double kFarAway = 1.0;  // m

}  // namespace

void MetalScene::add_circle(Point2 center, double radius) {
    circles_.push_back({center, radius});
}

void MetalScene::add_rect(const Rect& rect) { rects_.push_back(rect); }

void MetalScene::add_exterior(const Rect& rect) { exteriors_.push_back(rect); }

bool MetalScene::contains(Point2 p) const {
    for (const Rect& r : rects_)
        if (p.x > r.x_min && p.x < r.x_max && p.y > r.y_min && p.y < r.y_max) return true;
    for (const Rect& r : exteriors_)
        if (p.x <= r.x_min || p.x >= r.x_max || p.y <= r.y_min || p.y >= r.y_max) return true;
    for (const Circle& c : circles_) {
        const double dx = p.x - c.center.x;
        const double dy = p.y - c.center.y;
        if (dx * dx + dy * dy < c.radius * c.radius) return true;
    }
    return false;
}

std::size_t Grid::pec_count() const {
    return static_cast<std::size_t>(std::count(pec.begin(), pec.end(), std::uint8_t{1}));
}

double mandated_cell_size(const RsiwCrossSection& x, double f_max) {
    if (!(f_max > 0.0)) throw DomainError("f_max must be positive");
    const double lambda_d = free_space_wavelength(f_max) / std::sqrt(x.substrate.epsilon_r);
    double h = lambda_d / 20.0;
    if (x.via_diameter > 0.0) h = std::min(h, x.via_diameter / 4.0);
    return h;
}

Grid rasterize_scene(const MetalScene& scene, const Rect& domain, double cell_size,
                     double epsilon_r, int pml_x, int pml_y) {
    if (!(cell_size > 0.0)) throw DomainError("cell size must be positive");
    Grid g;
    g.cell_size = cell_size;
    g.nx = static_cast<int>(std::ceil(domain.width() / cell_size - 1e-9));
    g.ny = static_cast<int>(std::ceil(domain.height() / cell_size - 1e-9));
    if (g.nx < 3 || g.ny < 3) throw GeometryError("domain smaller than three cells");
    // Center the node lattice on the domain so mirror-symmetric devices get
    // mirror-symmetric grids.
    g.x0 = 0.5 * (domain.x_min + domain.x_max) - 0.5 * g.nx * cell_size;
    g.y0 = 0.5 * (domain.y_min + domain.y_max) - 0.5 * g.ny * cell_size;
    g.pml_x = pml_x;
    g.pml_y = pml_y;

    const std::size_t n = g.size();
    g.epsilon_r.assign(n, epsilon_r);
    g.pec.assign(n, 0);
    g.wall_fraction.assign(n, {1.0, 1.0, 1.0, 1.0});
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (scene.contains(g.node(i, j))) g.pec[g.index(i, j)] = 1;

    constexpr std::array<std::array<int, 2>, 4> dirs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    auto metal_along = [&](Point2 p, int d, double t) {
        return scene.contains({p.x + t * cell_size * dirs[d][0], p.y + t * cell_size * dirs[d][1]});
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.index(i, j);
            if (g.pec[k]) continue;
            const Point2 p = g.node(i, j);
            for (int d = 0; d < 4; ++d) {
                const int ni = i + dirs[d][0];
                const int nj = j + dirs[d][1];
                if (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) continue;
                double hi = 1.0;
                if (!g.pec[g.index(ni, nj)]) {
                    // Links between two open nodes can still graze a via.
                    int s = 1;
                    while (s < kLinkSamples && !metal_along(p, d, double(s) / kLinkSamples)) ++s;
                    if (s == kLinkSamples) continue;
                    hi = double(s) / kLinkSamples;
                }
                double lo = 0.0;
                for (int it = 0; it < 40; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (metal_along(p, d, mid) ? hi : lo) = mid;
                }
                g.wall_fraction[k][d] = std::max(kMinWallFraction, std::min(hi, kCutLink));
            }
        }
    }
    return g;
}

double estimated_factor_memory_mb(const Grid& grid) {
    return static_cast<double>(grid.size()) * kFactorBytesPerNode / (1024.0 * 1024.0);
}

namespace {

struct AxisFrame {
    double origin;
    int count;
};

GridPort locate_port(const Grid& g, const PortSpec& spec, const RsiwCrossSection& x,
                     const SolverOptions& opt) {
    GridPort port;
    port.id = spec.id;
    port.axis = std::abs(spec.normal.x) > 0.5 ? 0 : 1;
    port.inward = (port.axis == 0 ? spec.normal.x : spec.normal.y) > 0.0 ? 1 : -1;
    const int outward = -port.inward;
    const double h = g.cell_size;
    const AxisFrame along = port.axis == 0 ? AxisFrame{g.x0, g.nx} : AxisFrame{g.y0, g.ny};
    const AxisFrame across = port.axis == 0 ? AxisFrame{g.y0, g.ny} : AxisFrame{g.x0, g.nx};
    const int pml = port.axis == 0 ? g.pml_x : g.pml_y;

    port.plane_coord = port.axis == 0 ? spec.position.x : spec.position.y;
    port.plane_node = static_cast<int>(std::lround((port.plane_coord - along.origin) / h - 0.5));
    const int n_ref = static_cast<int>(std::lround(opt.ref_plane_pitches * x.pitch / h));
    const int n_src = static_cast<int>(std::lround(opt.source_pitches * x.pitch / h));
    if (n_ref < 1 || n_src <= n_ref) throw DomainError("source must lie outward of the reference plane");
    port.ref_node = port.plane_node + outward * n_ref;
    port.source_node = port.plane_node + outward * n_src;
    port.nodes_to_absorber =
        outward < 0 ? port.plane_node - pml : (along.count - pml - 1) - port.plane_node;
    if (n_src >= port.nodes_to_absorber)
        throw GeometryError("port " + std::to_string(spec.id) + ": source plane inside the absorber");
    port.ref_to_plane = std::abs(along.origin + (port.ref_node + 0.5) * h - port.plane_coord);

    auto node_index = [&](int a, int t) { return port.axis == 0 ? g.index(a, t) : g.index(t, a); };
    const double center = port.axis == 0 ? spec.position.y : spec.position.x;
    const int mid = static_cast<int>(std::lround((center - across.origin) / h - 0.5));
    if (g.pec[node_index(port.ref_node, mid)])
        throw GeometryError("port " + std::to_string(spec.id) + ": channel center is metal");
    int lo = mid, hi = mid;
    while (lo - 1 >= 0 && !g.pec[node_index(port.ref_node, lo - 1)]) --lo;
    while (hi + 1 < across.count && !g.pec[node_index(port.ref_node, hi + 1)]) ++hi;
    if (lo == 0 || hi == across.count - 1)
        throw GeometryError("port " + std::to_string(spec.id) + ": channel is not enclosed");
    port.lateral_first = lo;
    port.lateral_count = hi - lo + 1;
    const int d_low = port.axis == 0 ? 2 : 0;  // wall_fraction slot toward -lateral
    port.theta_low = g.wall_fraction[node_index(port.ref_node, lo)][d_low];
    port.theta_high = g.wall_fraction[node_index(port.ref_node, hi)][d_low + 1];

    // The channel must be uniform from the reference plane out to the absorber.
    for (int s = 1; s <= n_src - n_ref + 1; ++s) {
        const int a = port.ref_node + outward * s;
        for (int t = lo - 1; t <= hi + 1; ++t) {
            const bool metal = t < lo || t > hi;
            if (static_cast<bool>(g.pec[node_index(a, t)]) != metal)
                throw GeometryError("port " + std::to_string(spec.id) + ": channel is obstructed");
        }
    }
    return port;
}

}  // namespace

Grid rasterize(const DeviceBlueprint& bp, double f_max, const SolverOptions& opt) {
    validate_blueprint(bp);
    for (const PortSpec& p : bp.ports)
        if (std::abs(p.normal.x) > 1e-12 && std::abs(p.normal.y) > 1e-12)
            throw GeometryError("rasterize supports axis-aligned ports only");
    if (opt.pml_cells < 1) throw DomainError("absorber needs at least one cell");

    const RsiwCrossSection& x = bp.cross_section;
    const double mandated = mandated_cell_size(x, f_max);
    double h = mandated;
    if (opt.cell_size > 0.0) {
        if (opt.cell_size > mandated * (1.0 + 1e-9)) {
            std::ostringstream msg;
            msg << "cell size " << opt.cell_size * 1e3 << " mm exceeds the mandated "
                << mandated * 1e3 << " mm";
            throw DomainError(msg.str());
        }
        h = opt.cell_size;
    }

    const double half_channel = 0.5 * equivalent_width(x).w_eq;
    const double slab = std::max(x.pitch, 4.0 * h);
    const double extension = opt.extension_pitches * x.pitch;

    MetalScene scene;
    for (const Via& v : bp.layout.vias) scene.add_circle(v.center, v.radius);
    for (const Rect& r : bp.layout.rects) scene.add_rect(r);

    Rect core = bp.layout.outline;
    auto grow = [&core](const Rect& r) {
        core.x_min = std::min(core.x_min, r.x_min);
        core.y_min = std::min(core.y_min, r.y_min);
        core.x_max = std::max(core.x_max, r.x_max);
        core.y_max = std::max(core.y_max, r.y_max);
    };
    for (const PortSpec& p : bp.ports) {
        const bool along_x = std::abs(p.normal.x) > 0.5;
        const double out = -(along_x ? p.normal.x : p.normal.y);
        const double plane = along_x ? p.position.x : p.position.y;
        const double c = along_x ? p.position.y : p.position.x;
        const double a0 = out < 0 ? plane - kFarAway : plane;
        const double a1 = out < 0 ? plane : plane + kFarAway;
        const double e0 = out < 0 ? plane - extension : plane;
        const double e1 = out < 0 ? plane : plane + extension;
        auto make = [along_x](double a_lo, double a_hi, double t_lo, double t_hi) {
            return along_x ? Rect{a_lo, t_lo, a_hi, t_hi} : Rect{t_lo, a_lo, t_hi, a_hi};
        };
        scene.add_rect(make(a0, a1, c + half_channel, c + half_channel + slab));
        scene.add_rect(make(a0, a1, c - half_channel - slab, c - half_channel));
        grow(make(e0, e1, c - half_channel - slab, c + half_channel + slab));
    }
    const double frame = opt.pml_cells * h;
    const Rect domain{core.x_min - frame, core.y_min - frame, core.x_max + frame,
                      core.y_max + frame};

    const double nodes_estimate = std::ceil(domain.width() / h) * std::ceil(domain.height() / h);
    if (nodes_estimate * kFactorBytesPerNode / (1024.0 * 1024.0) > opt.max_memory_mb) {
        std::ostringstream msg;
        msg << "grid of ~" << nodes_estimate << " nodes needs ~"
            << nodes_estimate * kFactorBytesPerNode / (1024.0 * 1024.0) << " MB, cap is "
            << opt.max_memory_mb << " MB";
        throw ResourceError(msg.str());
    }

    Grid g = rasterize_scene(scene, domain, h, x.substrate.epsilon_r, opt.pml_cells,
                             opt.pml_cells);
    for (const PortSpec& p : bp.ports) g.ports.push_back(locate_port(g, p, x, opt));
    std::sort(g.ports.begin(), g.ports.end(),
              [](const GridPort& a, const GridPort& b) { return a.id < b.id; });
    return g;
}

}  // namespace siwforge

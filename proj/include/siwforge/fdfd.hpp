#pragma once

// Two-dimensional frequency-domain solver for the TE_n0 family. The unknown is
// the out-of-plane electric field Ez on cell centers of a uniform grid; vias
// and rods are perfect conductors, ports are solid-wall equivalent-guide
// channels terminated in a stretched-coordinate absorber.

#include "siwforge/em_core.hpp"
#include "siwforge/sparameters.hpp"
#include "siwforge/synthesis.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace siwforge {

struct SolverOptions {
    double cell_size = 0.0;        // m; 0 selects min(lambda_d(f_max)/20, d/4)
    int pml_cells = 32;
    int pml_grade = 3;
    double pml_reflection = 1e-6;  // design normal-incidence reflection of the absorber
    double ref_plane_pitches = 2;  // reference plane, outward from the port plane
    double source_pitches = 4;     // modal source plane, outward from the port plane
    double extension_pitches = 6;  // absorber starts here, outward from the port plane
    double max_memory_mb = 4096;
    int threads = 0;                      // 0 uses std::thread::hardware_concurrency()
    bool allow_evanescent_ports = false;  // report field ratios instead of failing below cutoff
};

/// Metal primitives used to rasterize a device or a test cavity.
class MetalScene {
public:
    void add_circle(Point2 center, double radius);
    void add_rect(const Rect& rect);
    /// Everything outside `rect` is metal.
    void add_exterior(const Rect& rect);
    bool contains(Point2 p) const;

private:
    struct Circle {
        Point2 center;
        double radius;
    };
    std::vector<Circle> circles_;
    std::vector<Rect> rects_;
    std::vector<Rect> exteriors_;
};

/// Port channel as seen by the grid.
struct GridPort {
    int id = 0;
    int axis = 0;         // 0: channel runs along x, 1: along y
    int inward = 1;       // +1 or -1 along `axis`
    double plane_coord = 0.0;
    int plane_node = 0;
    int ref_node = 0;
    int source_node = 0;
    int lateral_first = 0;  // first channel node along the other axis
    int lateral_count = 0;
    double theta_low = 1.0;  // wall distance / cell at the channel ends
    double theta_high = 1.0;
    int nodes_to_absorber = 0;   // non-absorbing nodes outward of the plane node
    double ref_to_plane = 0.0;   // m
};

struct Grid {
    double cell_size = 0.0;
    int nx = 0;
    int ny = 0;
    double x0 = 0.0;  // lower-left corner of cell (0, 0)
    double y0 = 0.0;
    int pml_x = 0;    // absorber layers on each x side
    int pml_y = 0;
    std::vector<double> epsilon_r;
    std::vector<std::uint8_t> pec;
    // Distance to the first metal along -x, +x, -y, +y, in cells. Exactly 1
    // for an open link; below 1 when the link touches metal.
    std::vector<std::array<double, 4>> wall_fraction;
    std::vector<GridPort> ports;

    int index(int i, int j) const { return j * nx + i; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    Point2 node(int i, int j) const { return {x0 + (i + 0.5) * cell_size, y0 + (j + 0.5) * cell_size}; }
    std::size_t pec_count() const;
};

/// Cell size mandated for a blueprint: min(lambda in dielectric at f_max / 20, d / 4).
double mandated_cell_size(const RsiwCrossSection& x, double f_max);

/// Generic rasterization: node is metal when its center is inside the scene.
Grid rasterize_scene(const MetalScene& scene, const Rect& domain, double cell_size,
                     double epsilon_r, int pml_x, int pml_y);

/// Device rasterization with port channels and absorbing frame.
/// Throws ResourceError above the memory cap.
Grid rasterize(const DeviceBlueprint& blueprint, double f_max, const SolverOptions& options = {});

/// Rough memory needed to factor the grid's system, in MB.
double estimated_factor_memory_mb(const Grid& grid);

/// Longitudinal wavenumber used to size the absorber at a frequency.
double absorber_reference_beta(const Grid& grid, double frequency);

/// Complex-symmetric system: 5-point stretched-coordinate Laplacian plus
/// eps_r k0^2, identity rows on metal nodes.
Eigen::SparseMatrix<Complex> assemble(const Grid& grid, double frequency,
                                      const SolverOptions& options = {});
Eigen::SparseMatrix<Complex> assemble(const Grid& grid, double frequency, double absorber_beta,
                                      const SolverOptions& options);

/// Modes of a port channel: eigenvectors of the discrete transverse operator
/// (sampled half-sines), with discrete longitudinal wavenumbers.
struct PortModeBasis {
    int port = 0;
    int mode_count = 0;
    std::vector<Eigen::VectorXd> profiles;  // unit 2-norm, lowest order positive
    std::vector<double> kappa;              // transverse wavenumbers, ascending
    std::vector<Complex> betas;             // +real above cutoff, +j alpha below
};

PortModeBasis port_mode_basis(const Grid& grid, const GridPort& port, double frequency,
                              int mode_count);

/// Sampled complex Ez over the grid at one frequency, scaled to unit incident
/// modal amplitude at the excited port's reference plane.
struct FieldMap {
    double frequency = 0.0;
    std::shared_ptr<const Grid> grid;
    std::vector<Complex> ez;
};

struct PortSolution {
    FieldMap field;
    Eigen::VectorXcd s_column;  // S_{i, excited}, i = 1..N (0-based storage)
};

/// Reusable solver for one blueprint: grid built once, one factorization per
/// frequency shared by all excitations, calibration runs cached per channel.
class FdfdSolver {
public:
    FdfdSolver(const DeviceBlueprint& blueprint, double f_max, SolverOptions options = {});

    const Grid& grid() const { return *grid_; }
    std::shared_ptr<const Grid> shared_grid() const { return grid_; }
    const DeviceBlueprint& blueprint() const { return blueprint_; }

    struct Result {
        ScatteringMatrix s;             // columns of unexcited ports are zero
        std::vector<FieldMap> fields;   // one per excited port when requested
    };

    /// Excites each listed port (1-based ids) with its TE10 modal source.
    Result solve(double frequency, const std::vector<int>& excited_ports, int mode_count = 1,
                 bool keep_fields = false) const;

    /// Incident TE10 amplitude at the reference plane of `port`, from a
    /// matched straight channel of identical discretization.
    Complex calibration_amplitude(const GridPort& port, double frequency) const;

private:
    DeviceBlueprint blueprint_;
    SolverOptions options_;
    std::shared_ptr<const Grid> grid_;
};

PortSolution solve_at_frequency(const DeviceBlueprint& blueprint, double frequency,
                                int excited_port, int mode_count = 1,
                                const SolverOptions& options = {});

/// Full S-matrix at n_freq uniformly spaced frequencies.
SParameterBlock sweep(const DeviceBlueprint& blueprint, const Band& band, int n_freq,
                      int mode_count = 1, const SolverOptions& options = {});
SParameterBlock sweep(const FdfdSolver& solver, const std::vector<double>& frequencies,
                      int mode_count = 1, int threads = 0);

std::vector<double> uniform_frequencies(const Band& band, int n_freq);

struct DispersionRow {
    double frequency = 0.0;
    double beta_measured = 0.0;
    double beta_analytic = 0.0;
    double rel_err = 0.0;
};

struct DispersionLengths {
    double l1 = 0.0;
    double l2 = 0.0;
};

/// Default guide lengths: 20 pitches, plus the shortest pitch multiple >= 5 mm.
DispersionLengths default_dispersion_lengths(const RsiwCrossSection& x);

/// Two-length de-embedding: beta = unwrap(arg S21(L1) - arg S21(L2)) / (L2 - L1),
/// compared with the closed-form equivalent-guide TE10 wavenumber.
std::vector<DispersionRow> extract_dispersion(const RsiwCrossSection& x, const Band& band,
                                              int n_freq, const SolverOptions& options = {});
std::vector<DispersionRow> extract_dispersion(const RsiwCrossSection& x, const Band& band,
                                              int n_freq, const DispersionLengths& lengths,
                                              const SolverOptions& options);

double max_relative_error(const std::vector<DispersionRow>& rows);

}  // namespace siwforge

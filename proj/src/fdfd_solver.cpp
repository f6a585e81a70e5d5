#include "siwforge/errors.hpp"
#include "siwforge/fdfd.hpp"

#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace siwforge {

namespace {

using SparseMatrix = Eigen::SparseMatrix<Complex>;

double k0_of(double f) { return 2.0 * kPi * f / kSpeedOfLight; }

// Depth into the absorber, 0 at its inner boundary and 1 at the domain edge,
// for node n (half = 0.5) or for the face after node n (half = 1.0).
double absorber_depth(double position, int count, int layers) {
    if (layers <= 0) return 0.0;
    if (position < layers) return (layers - position) / layers;
    if (position > count - layers) return (position - (count - layers)) / layers;
    return 0.0;
}

struct Stretch {
    std::vector<Complex> node;
    std::vector<Complex> face;  // face k lies between nodes k and k+1; face -1 at index 0
};

Stretch make_stretch(int count, int layers, double strength, int grade) {
    Stretch s;
    s.node.resize(static_cast<std::size_t>(count));
    s.face.resize(static_cast<std::size_t>(count) + 1);
    auto value = [&](double depth) {
        return Complex(1.0, -strength * std::pow(depth, grade));
    };
    for (int n = 0; n < count; ++n) s.node[n] = value(absorber_depth(n + 0.5, count, layers));
    for (int f = 0; f <= count; ++f) s.face[f] = value(absorber_depth(f, count, layers));
    return s;
}

// Transfer of a port mode over distance d: exp(-j beta d) or exp(-alpha d).
Complex transfer(Complex beta, double d) {
    if (beta.imag() > 0.0) return {std::exp(-beta.imag() * d), 0.0};
    return std::polar(1.0, -beta.real() * d);
}

bool propagating(Complex beta) { return beta.imag() == 0.0 && beta.real() > 0.0; }

int lateral_to_index(const Grid& g, const GridPort& p, int along, int lateral) {
    return p.axis == 0 ? g.index(along, lateral) : g.index(lateral, along);
}

Eigen::VectorXcd source_vector(const Grid& g, const GridPort& p, const Eigen::VectorXd& profile) {
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(g.size()));
    for (int t = 0; t < p.lateral_count; ++t)
        b[lateral_to_index(g, p, p.source_node, p.lateral_first + t)] = profile[t];
    return b;
}

Complex project(const Grid& g, const GridPort& p, const Eigen::VectorXd& profile,
                const Eigen::VectorXcd& u) {
    Complex sum = 0.0;
    for (int t = 0; t < p.lateral_count; ++t)
        sum += profile[t] * u[lateral_to_index(g, p, p.ref_node, p.lateral_first + t)];
    return sum;
}

struct Factorization {
    Eigen::UmfPackLU<SparseMatrix> lu;
    const SparseMatrix* matrix = nullptr;

    explicit Factorization(const SparseMatrix& a) : matrix(&a) {
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw NumericError("sparse LU factorization failed");
    }

    Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const {
        Eigen::VectorXcd u = lu.solve(b);
        const double residual = (*matrix * u - b).norm() / b.norm();
        if (!(residual < 1e-8)) {
            std::ostringstream msg;
            msg << "linear solve did not converge: relative residual " << residual;
            throw NumericError(msg.str());
        }
        return u;
    }
};

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

void SParameterBlock::validate() const {
    if (frequencies.size() != matrices.size())
        throw DomainError("S-parameter block: one matrix per frequency required");
    for (std::size_t k = 0; k < matrices.size(); ++k) {
        if (matrices[k].order() != port_count)
            throw DomainError("S-parameter block: inconsistent port count");
        if (k > 0 && !(frequencies[k] > frequencies[k - 1]))
            throw DomainError("S-parameter block: frequencies must increase strictly");
    }
}

double absorber_reference_beta(const Grid& grid, double frequency) {
    const double kd = k0_of(frequency) * std::sqrt(grid.epsilon_r.empty() ? 1.0 : grid.epsilon_r[0]);
    double beta = 0.0;
    if (!grid.ports.empty()) {
        const PortModeBasis basis = port_mode_basis(grid, grid.ports.front(), frequency, 1);
        if (propagating(basis.betas[0])) beta = basis.betas[0].real();
    }
    // Near and below cutoff the guided wave is slow; floor keeps the profile bounded.
    return std::max(beta, 0.25 * kd);
}

SparseMatrix assemble(const Grid& grid, double frequency, const SolverOptions& options) {
    if (!(frequency > 0.0)) throw DomainError("frequency must be positive");
    return assemble(grid, frequency, absorber_reference_beta(grid, frequency), options);
}

SparseMatrix assemble(const Grid& g, double frequency, double absorber_beta,
                      const SolverOptions& options) {
    if (!(frequency > 0.0)) throw DomainError("frequency must be positive");
    const double h = g.cell_size;
    const double k0 = k0_of(frequency);
    const int grade = options.pml_grade;
    const double log_r = std::log(1.0 / options.pml_reflection);
    auto strength = [&](int layers) {
        return layers > 0 ? (grade + 1) * log_r / (2.0 * absorber_beta * layers * h) : 0.0;
    };
    const Stretch sx = make_stretch(g.nx, g.pml_x, strength(g.pml_x), grade);
    const Stretch sy = make_stretch(g.ny, g.pml_y, strength(g.pml_y), grade);
    const double inv_h2 = 1.0 / (h * h);

    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(g.size() * 5);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int k = g.index(i, j);
            if (g.pec[k]) {
                triplets.emplace_back(k, k, 1.0);
                continue;
            }
            // Fluxes scaled by sx*sy keep the operator complex symmetric.
            const std::array<Complex, 4> coeff{
                sy.node[j] / sx.face[i] * inv_h2,
                sy.node[j] / sx.face[i + 1] * inv_h2,
                sx.node[i] / sy.face[j] * inv_h2,
                sx.node[i] / sy.face[j + 1] * inv_h2,
            };
            const std::array<int, 4> ni{i - 1, i + 1, i, i};
            const std::array<int, 4> nj{j, j, j - 1, j + 1};
            Complex diag = sx.node[i] * sy.node[j] * g.epsilon_r[k] * k0 * k0;
            for (int d = 0; d < 4; ++d) {
                const bool inside = ni[d] >= 0 && nj[d] >= 0 && ni[d] < g.nx && nj[d] < g.ny;
                if (inside && !g.pec[g.index(ni[d], nj[d])] && g.wall_fraction[k][d] == 1.0) {
                    triplets.emplace_back(k, g.index(ni[d], nj[d]), coeff[d]);
                    diag -= coeff[d];
                } else {
                    diag -= coeff[d] / g.wall_fraction[k][d];
                }
            }
            triplets.emplace_back(k, k, diag);
        }
    }
    SparseMatrix a(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

PortModeBasis port_mode_basis(const Grid& g, const GridPort& p, double frequency,
                              int mode_count) {
    const int m = p.lateral_count;
    if (mode_count < 1 || mode_count > m) throw DomainError("invalid port mode count");
    const double h = g.cell_size;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        t(i, i) = -2.0;
        if (i > 0) t(i, i - 1) = 1.0;
        if (i + 1 < m) t(i, i + 1) = 1.0;
    }
    t(0, 0) = -1.0 - 1.0 / p.theta_low;
    t(m - 1, m - 1) -= 1.0 / p.theta_high - 1.0;
    if (m == 1) t(0, 0) = -1.0 / p.theta_low - 1.0 / p.theta_high;
    t /= h * h;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    if (eig.info() != Eigen::Success) throw NumericError("port eigenproblem failed");

    const int center = lateral_to_index(g, p, p.ref_node, p.lateral_first);
    const double kd2 = g.epsilon_r[center] * std::pow(k0_of(frequency), 2);
    PortModeBasis basis;
    basis.port = p.id;
    basis.mode_count = mode_count;
    for (int n = 0; n < mode_count; ++n) {
        // Eigenvalues ascend; the least negative (-kappa^2 smallest) is the last.
        const int col = m - 1 - n;
        Eigen::VectorXd phi = eig.eigenvectors().col(col);
        int lead = 0;
        while (lead + 1 < m && std::abs(phi[lead]) < 1e-8) ++lead;
        if ((n == 0 ? phi.sum() : phi[lead]) < 0.0) phi = -phi;
        const double kappa2 = -eig.eigenvalues()[col];
        const double c = 1.0 - 0.5 * (kd2 - kappa2) * h * h;
        Complex beta;
        if (c > 1.0)
            beta = {0.0, std::acosh(c) / h};
        else if (c >= -1.0)
            beta = {std::acos(c) / h, 0.0};
        else
            throw NumericError("port mode beyond the grid's Nyquist limit; refine the cell size");
        basis.profiles.push_back(std::move(phi));
        basis.kappa.push_back(std::sqrt(std::max(kappa2, 0.0)));
        basis.betas.push_back(beta);
    }
    return basis;
}

// ---------------------------------------------------------------------------

namespace {

struct CalibrationKey {
    int lateral_count;
    double theta_low;
    double theta_high;
    int ref_offset;
    int source_offset;
    int to_absorber;
    auto tie() const {
        return std::tie(lateral_count, theta_low, theta_high, ref_offset, source_offset,
                        to_absorber);
    }
    bool operator<(const CalibrationKey& o) const { return tie() < o.tie(); }
};

// Straight channel with the port's transverse discretization and the same
// node counts between source, reference plane and absorber.
Grid calibration_grid(const Grid& device, const GridPort& p) {
    const int m = p.lateral_count;
    const int pml = p.axis == 0 ? device.pml_x : device.pml_y;
    const int ref_offset = std::abs(p.plane_node - p.ref_node);
    const int src_offset = std::abs(p.plane_node - p.source_node);
    const int through = 2 * src_offset;

    Grid g;
    g.cell_size = device.cell_size;
    g.nx = 2 * (pml + p.nodes_to_absorber) + through + 2;
    g.ny = m + 2;
    g.pml_x = pml;
    g.pml_y = 0;
    const int center = lateral_to_index(device, p, p.ref_node, p.lateral_first);
    g.epsilon_r.assign(g.size(), device.epsilon_r[center]);
    g.pec.assign(g.size(), 0);
    g.wall_fraction.assign(g.size(), {1.0, 1.0, 1.0, 1.0});
    for (int i = 0; i < g.nx; ++i) {
        g.pec[g.index(i, 0)] = 1;
        g.pec[g.index(i, m + 1)] = 1;
        g.wall_fraction[g.index(i, 1)][2] = p.theta_low;
        g.wall_fraction[g.index(i, m)][3] = p.theta_high;
    }
    GridPort cp = p;
    cp.id = 1;
    cp.axis = 0;
    cp.inward = 1;
    cp.plane_node = pml + p.nodes_to_absorber;
    cp.ref_node = cp.plane_node - ref_offset;
    cp.source_node = cp.plane_node - src_offset;
    cp.lateral_first = 1;
    g.ports.push_back(cp);
    return g;
}

std::mutex calibration_mutex;
// Keyed by (device grid identity, frequency, channel signature).
std::map<std::tuple<const void*, double, CalibrationKey>, Complex> calibration_cache;

}  // namespace

FdfdSolver::FdfdSolver(const DeviceBlueprint& blueprint, double f_max, SolverOptions options)
    : blueprint_(blueprint), options_(options) {
    grid_ = std::make_shared<const Grid>(rasterize(blueprint_, f_max, options_));
}

Complex FdfdSolver::calibration_amplitude(const GridPort& p, double frequency) const {
    const CalibrationKey key{p.lateral_count,
                             p.theta_low,
                             p.theta_high,
                             std::abs(p.plane_node - p.ref_node),
                             std::abs(p.plane_node - p.source_node),
                             p.nodes_to_absorber};
    const auto cache_key = std::make_tuple(static_cast<const void*>(grid_.get()), frequency, key);
    {
        std::lock_guard lock(calibration_mutex);
        auto it = calibration_cache.find(cache_key);
        if (it != calibration_cache.end()) return it->second;
    }
    const Grid g = calibration_grid(*grid_, p);
    const GridPort& cp = g.ports.front();
    const PortModeBasis basis = port_mode_basis(g, cp, frequency, 1);
    const SparseMatrix a = assemble(g, frequency, absorber_reference_beta(*grid_, frequency), options_);
    const Factorization lu(a);
    const Eigen::VectorXcd u = lu.solve(source_vector(g, cp, basis.profiles[0]));
    const Complex amplitude = project(g, cp, basis.profiles[0], u);
    std::lock_guard lock(calibration_mutex);
    calibration_cache.emplace(cache_key, amplitude);
    return amplitude;
}

FdfdSolver::Result FdfdSolver::solve(double frequency, const std::vector<int>& excited_ports,
                                     int mode_count, bool keep_fields) const {
    if (!(frequency > 0.0)) throw DomainError("frequency must be positive");
    const Grid& g = *grid_;
    const int n_ports = static_cast<int>(g.ports.size());

    std::vector<PortModeBasis> bases;
    for (const GridPort& p : g.ports) {
        PortModeBasis b = port_mode_basis(g, p, frequency, std::max(mode_count, 2));
        if (!propagating(b.betas[0]) && !options_.allow_evanescent_ports) {
            const double fc = b.kappa[0] * kSpeedOfLight /
                              (2.0 * kPi * std::sqrt(g.epsilon_r[lateral_to_index(
                                                         g, p, p.ref_node, p.lateral_first)]));
            std::ostringstream msg;
            msg << "port " << p.id << ": TE10 is below cutoff at " << frequency * 1e-9
                << " GHz (channel cutoff " << fc * 1e-9 << " GHz)";
            throw ModeCutoffError(msg.str(), fc);
        }
        if (mode_count == 1 && propagating(b.betas[1])) {
            std::ostringstream msg;
            msg << "port " << p.id << ": TE20 propagates at " << frequency * 1e-9
                << " GHz; request more port modes";
            throw PhysicsError(msg.str());
        }
        bases.push_back(std::move(b));
    }

    const SparseMatrix a = assemble(g, frequency, absorber_reference_beta(g, frequency), options_);
    const Factorization lu(a);

    Result result;
    result.s.entries = Eigen::MatrixXcd::Zero(n_ports, n_ports);
    result.s.frequency = frequency;
    for (int id : excited_ports) {
        if (id < 1 || id > n_ports) throw DomainError("excited port id out of range");
        const GridPort& pe = g.ports[id - 1];
        const PortModeBasis& be = bases[id - 1];
        Eigen::VectorXcd u = lu.solve(source_vector(g, pe, be.profiles[0]));
        for (std::size_t k = 0; k < g.size(); ++k)
            if (g.pec[k]) u[static_cast<Eigen::Index>(k)] = 0.0;

        const Complex incident = calibration_amplitude(pe, frequency);
        const Complex beta_e = be.betas[0];
        for (int j = 1; j <= n_ports; ++j) {
            const GridPort& pj = g.ports[j - 1];
            const PortModeBasis& bj = bases[j - 1];
            Complex c = project(g, pj, bj.profiles[0], u);
            if (j == id) c -= incident;
            Complex s = c / (incident * transfer(beta_e, pe.ref_to_plane) *
                             transfer(bj.betas[0], pj.ref_to_plane));
            if (propagating(beta_e) && propagating(bj.betas[0]))
                s *= std::sqrt(bj.betas[0].real() / beta_e.real());
            result.s.entries(j - 1, id - 1) = s;
        }
        if (keep_fields) {
            FieldMap fm;
            fm.frequency = frequency;
            fm.grid = grid_;
            fm.ez.resize(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) fm.ez[k] = u[static_cast<Eigen::Index>(k)] / incident;
            result.fields.push_back(std::move(fm));
        }
    }
    return result;
}

PortSolution solve_at_frequency(const DeviceBlueprint& blueprint, double frequency,
                                int excited_port, int mode_count, const SolverOptions& options) {
    const FdfdSolver solver(blueprint, frequency, options);
    FdfdSolver::Result r = solver.solve(frequency, {excited_port}, mode_count, true);
    return {std::move(r.fields.front()), r.s.entries.col(excited_port - 1)};
}

std::vector<double> uniform_frequencies(const Band& band, int n_freq) {
    validate(band);
    if (n_freq < 2) throw DomainError("a sweep needs at least 2 frequencies");
    std::vector<double> f(static_cast<std::size_t>(n_freq));
    const double step = (band.f_high - band.f_low) / (n_freq - 1);
    for (int i = 0; i < n_freq; ++i) f[i] = i + 1 == n_freq ? band.f_high : band.f_low + i * step;
    return f;
}

SParameterBlock sweep(const FdfdSolver& solver, const std::vector<double>& frequencies,
                      int mode_count, int threads) {
    if (frequencies.size() < 2) throw DomainError("a sweep needs at least 2 frequencies");
    const int n = static_cast<int>(solver.grid().ports.size());
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[i] = i + 1;

    SParameterBlock block;
    block.port_count = n;
    block.frequencies = frequencies;
    block.matrices.resize(frequencies.size());
    parallel_for(frequencies.size(), threads, [&](std::size_t k) {
        block.matrices[k] = solver.solve(frequencies[k], all, mode_count, false).s;
    });
    block.validate();
    return block;
}

SParameterBlock sweep(const DeviceBlueprint& blueprint, const Band& band, int n_freq,
                      int mode_count, const SolverOptions& options) {
    if (blueprint.kind == DeviceKind::circulator)
        throw UnsupportedPhysicsError(
            "circulator requires gyrotropic ferrite media, which the isotropic solver does not model");
    const std::vector<double> f = uniform_frequencies(band, n_freq);
    const FdfdSolver solver(blueprint, band.f_high, options);
    return sweep(solver, f, mode_count, options.threads);
}

// ---------------------------------------------------------------------------

DispersionLengths default_dispersion_lengths(const RsiwCrossSection& x) {
    const double l1 = 20.0 * x.pitch;
    const double dl = x.pitch * std::ceil(5.0e-3 / x.pitch * (1.0 - 1e-12));
    return {l1, l1 + dl};
}

std::vector<DispersionRow> extract_dispersion(const RsiwCrossSection& x, const Band& band,
                                              int n_freq, const SolverOptions& options) {
    return extract_dispersion(x, band, n_freq, default_dispersion_lengths(x), options);
}

std::vector<DispersionRow> extract_dispersion(const RsiwCrossSection& x, const Band& band,
                                              int n_freq, const DispersionLengths& lengths,
                                              const SolverOptions& options) {
    validate(band);
    const EquivalentGuide g = equivalent_width(x);
    const double fc = cutoff_frequency(g, ModeIndex{1});
    if (band.f_low <= fc) {
        std::ostringstream msg;
        msg << "band starts at " << band.f_low * 1e-9 << " GHz, at or below the TE10 cutoff "
            << fc * 1e-9 << " GHz";
        throw ModeCutoffError(msg.str(), fc);
    }
    const double dl = lengths.l2 - lengths.l1;
    if (!(dl >= 5.0e-3 * (1.0 - 1e-9)))
        throw DomainError("dispersion extraction needs L2 - L1 >= 5 mm");
    const double kd_max = k0_of(band.f_high) * std::sqrt(x.substrate.epsilon_r);
    if (kd_max * dl >= 2.0 * kPi)
        throw NumericError("length difference too large for an unambiguous phase at f_high");

    const std::vector<double> freqs = uniform_frequencies(band, n_freq);
    const FdfdSolver short_guide(generate_straight_guide(x, lengths.l1), band.f_high, options);
    const FdfdSolver long_guide(generate_straight_guide(x, lengths.l2), band.f_high, options);
    std::vector<Complex> ratio(freqs.size());
    parallel_for(freqs.size(), options.threads, [&](std::size_t k) {
        const Complex s_short = short_guide.solve(freqs[k], {1}).s(2, 1);
        const Complex s_long = long_guide.solve(freqs[k], {1}).s(2, 1);
        ratio[k] = s_short / s_long;
    });

    std::vector<DispersionRow> rows;
    double previous = 0.0;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        double phase = std::arg(ratio[k]);
        if (k == 0) {
            if (phase < 0.0) phase += 2.0 * kPi;
        } else {
            phase += 2.0 * kPi * std::round((previous - phase) / (2.0 * kPi));
            if (std::abs(phase - previous) > 0.5 * kPi)
                throw NumericError("frequency sampling too coarse for phase unwrapping");
        }
        previous = phase;
        DispersionRow row;
        row.frequency = freqs[k];
        row.beta_measured = phase / dl;
        row.beta_analytic = propagation_constant(g, ModeIndex{1}, freqs[k]).real();
        row.rel_err = std::abs(row.beta_measured - row.beta_analytic) / row.beta_analytic;
        rows.push_back(row);
    }
    return rows;
}

double max_relative_error(const std::vector<DispersionRow>& rows) {
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.rel_err);
    return worst;
}

}  // namespace siwforge

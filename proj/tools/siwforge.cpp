// Command-line front end: synthesize, dispersion, simulate, circulator-model.

#include "siwforge/em_core.hpp"
#include "siwforge/errors.hpp"
#include "siwforge/fdfd.hpp"
#include "siwforge/io.hpp"
#include "siwforge/synthesis.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace siwforge;

namespace {

enum Exit { ok = 0, usage = 2, geometry = 3, physics = 4, numeric = 5 };

// "0.8mm" -> 0.8e-3. Bare numbers are refused on purpose.
double parse_quantity(const std::string& text, const std::vector<std::pair<std::string, double>>& units,
                      const char* what) {
    for (const auto& [suffix, scale] : units) {
        if (text.size() <= suffix.size()) continue;
        const std::string tail = text.substr(text.size() - suffix.size());
        bool same = true;
        for (std::size_t i = 0; i < suffix.size(); ++i)
            same = same && std::tolower(static_cast<unsigned char>(tail[i])) ==
                               std::tolower(static_cast<unsigned char>(suffix[i]));
        if (!same) continue;
        const std::string number = text.substr(0, text.size() - suffix.size());
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(number, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != number.size() || number.empty() || !std::isfinite(v))
            throw DomainError(std::string("bad ") + what + " '" + text + "'");
        return v * scale;
    }
    std::string list;
    for (const auto& u : units) list += (list.empty() ? "" : ", ") + u.first;
    throw DomainError(std::string(what) + " '" + text + "' needs a unit suffix (" + list + ")");
}

double length_arg(const std::string& s) {
    return parse_quantity(s, {{"mm", 1e-3}, {"um", 1e-6}, {"m", 1.0}}, "length");
}

double frequency_arg(const std::string& s) {
    return parse_quantity(s, {{"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3}, {"Hz", 1.0}}, "frequency");
}

double angle_arg(const std::string& s) {
    return parse_quantity(s, {{"deg", kPi / 180.0}, {"rad", 1.0}}, "angle");
}

// "10:15GHz" or "10GHz:15GHz".
Band band_arg(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw DomainError("band '" + s + "' must look like 10:15GHz");
    std::string lo = s.substr(0, colon);
    const std::string hi = s.substr(colon + 1);
    if (!lo.empty() && std::isdigit(static_cast<unsigned char>(lo.back()))) {
        std::size_t k = hi.size();
        while (k > 0 && std::isalpha(static_cast<unsigned char>(hi[k - 1]))) --k;
        lo += hi.substr(k);
    }
    Band b{frequency_arg(lo), frequency_arg(hi)};
    validate(b);
    return b;
}

std::string fmt(double v, int digits = 6) { return format_number(v, digits); }

double memory_cap_mb(double fallback) {
    if (const char* env = std::getenv("SIWFORGE_MEM_CAP_MB")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(v > 0.0))
            throw DomainError("SIWFORGE_MEM_CAP_MB must be a positive number of megabytes");
        return v;
    }
    return fallback;
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ResourceError("cannot create output directory '" + dir + "'");
    return p;
}

struct CrossSectionFlags {
    std::string w, d, p, h;
    double er = 0.0;

    bool any() const { return !w.empty() || !d.empty() || !p.empty() || !h.empty() || er != 0.0; }
    RsiwCrossSection resolve() const {
        RsiwCrossSection x = reference::cross_section();
        if (!w.empty()) x.w_siw = length_arg(w);
        if (!d.empty()) x.via_diameter = length_arg(d);
        if (!p.empty()) x.pitch = length_arg(p);
        if (!h.empty()) x.substrate.height = length_arg(h);
        if (er != 0.0) x.substrate.epsilon_r = er;
        validate(x);
        return x;
    }
};

DeviceBlueprint blueprint_for(DeviceKind kind, const RsiwCrossSection& x, std::optional<double> length) {
    switch (kind) {
        case DeviceKind::straight:
            return generate_straight_guide(x, length.value_or(reference::kStraightLength));
        case DeviceKind::divider:
            return generate_divider(x, length.value_or(reference::kDividerArmLength),
                                    reference::kDividerPostRadius, reference::kDividerPostOffset);
        case DeviceKind::circulator:
            return generate_circulator(x, length.value_or(reference::kCirculatorArmLength),
                                       reference::ferrite());
        case DeviceKind::coupler:
            return generate_coupler(x, length.value_or(reference::kCouplerLength), reference::aperture());
    }
    throw DomainError("unknown device kind");
}

DeviceBlueprint load_blueprint(const std::string& geometry, const std::string& fixture) {
    if (!geometry.empty() && !fixture.empty()) throw DomainError("give either --geometry or --fixture");
    if (!geometry.empty()) return read_geometry_json(read_text_file(geometry));
    if (!fixture.empty()) return reference::fixture(fixture);
    throw DomainError("a device is required: --geometry FILE or --fixture NAME");
}

double mm(double m) { return m * 1e3; }
double ghz(double f) { return f * 1e-9; }

void print_design_report(std::ostream& out, const DeviceBlueprint& bp, const Band& band) {
    const RsiwCrossSection& x = bp.cross_section;
    const EquivalentGuide g = equivalent_width(x);
    out << "device        " << to_string(bp.kind) << '\n'
        << "substrate     eps_r " << fmt(x.substrate.epsilon_r) << ", h " << fmt(mm(x.substrate.height))
        << " mm\n"
        << "w_siw         " << fmt(mm(x.w_siw)) << " mm\n"
        << "d / p         " << fmt(mm(x.via_diameter)) << " mm / " << fmt(mm(x.pitch)) << " mm\n"
        << "w_eq          " << fmt(mm(g.w_eq)) << " mm\n"
        << "TE10 cutoff   " << fmt(ghz(cutoff_frequency(g, ModeIndex{1}))) << " GHz\n"
        << "TE20 cutoff   " << fmt(ghz(cutoff_frequency(g, ModeIndex{2}))) << " GHz\n";
    for (const RuleResult& r : check_design_rules(x, band).rules)
        out << "rule          " << r.name << ": " << (r.passed ? "pass" : "FAIL") << ", margin "
            << fmt(mm(r.margin())) << " mm\n";
    const TaperTransition t = synthesize_taper(x, band.center());
    out << "taper         w_mst " << fmt(mm(t.w_mst)) << " mm, w_t " << fmt(mm(t.w_t)) << " mm, l_t "
        << fmt(mm(t.l_t)) << " mm\n";
    const DeviceExtras& e = bp.extras;
    if (e.post)
        out << "post          r = " << fmt(mm(e.post->radius)) << " mm, x_p = " << fmt(mm(e.post->offset_xp))
            << " mm\n";
    if (e.ferrite)
        out << "ferrite       R_f adopted " << fmt(mm(e.ferrite->radius)) << " mm, formula "
            << fmt(mm(ferrite_radius(reference::kCirculatorCenterFrequency, e.ferrite->epsilon_f)))
            << " mm at " << fmt(ghz(reference::kCirculatorCenterFrequency)) << " GHz\n";
    if (e.aperture) {
        const EquivalentGuide c = coupled_region_guide(x);
        out << "aperture      w_ap " << fmt(mm(e.aperture->w_ap)) << " mm, l_ap " << fmt(mm(e.aperture->l_ap))
            << " mm, w_s " << fmt(mm(e.aperture->w_s)) << " mm, l_s " << fmt(mm(e.aperture->l_s)) << " mm\n"
            << "quadrature    required aperture " << fmt(mm(required_aperture_length(c, band.center())))
            << " mm at " << fmt(ghz(band.center())) << " GHz\n";
    }
    out << "ports         " << bp.ports.size() << ", vias " << bp.layout.vias.size() << '\n';
}

std::size_t nearest_index(const std::vector<double>& f, double target) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < f.size(); ++k)
        if (std::abs(f[k] - target) < std::abs(f[best] - target)) best = k;
    return best;
}

std::string frequency_tag(double f) {
    std::string s = format_number(ghz(f), 9);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s + "GHz";
}

int run(int argc, char** argv) {
    CLI::App app{"SIW component synthesis and 2-D full-wave verification"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();  // lets --out follow the subcommand
    std::string out_dir = ".";
    app.add_option("--out", out_dir, "output directory (created if missing)");

    // synthesize
    auto* syn = app.add_subcommand("synthesize", "cross-section and device layout from design equations");
    syn->set_help_flag("--help", "print this help");  // frees -h for the height flag
    std::string syn_fixture, syn_band, syn_kind = "straight", syn_length, syn_h, syn_d, syn_p;
    double syn_er = 0.0;
    syn->add_option("--fixture", syn_fixture, "reference design: straight|divider|circulator|coupler");
    syn->add_option("--band", syn_band, "operating band, e.g. 10:15GHz");
    syn->add_option("--er", syn_er, "substrate relative permittivity");
    syn->add_option("--h", syn_h, "substrate height, e.g. 0.8mm");
    syn->add_option("--d", syn_d, "via diameter");
    syn->add_option("--p", syn_p, "via pitch");
    syn->add_option("--kind", syn_kind, "device for a synthesized cross-section");
    syn->add_option("--length", syn_length, "guide / arm length override");

    // dispersion
    auto* dis = app.add_subcommand("dispersion", "two-length FDFD dispersion vs closed form");
    dis->set_help_flag("--help", "print this help");
    std::string dis_geometry, dis_fixture, dis_band = "10:15GHz", dis_cell;
    CrossSectionFlags dis_x;
    int dis_points = 26, dis_threads = 0;
    dis->add_option("--geometry", dis_geometry, "geometry JSON (its cross-section is used)");
    dis->add_option("--fixture", dis_fixture, "reference design whose cross-section is used");
    dis->add_option("--w", dis_x.w, "via row spacing w_siw");
    dis->add_option("--d", dis_x.d, "via diameter");
    dis->add_option("--p", dis_x.p, "via pitch");
    dis->add_option("--h", dis_x.h, "substrate height");
    dis->add_option("--er", dis_x.er, "substrate relative permittivity");
    dis->add_option("--band", dis_band, "band, e.g. 10:15GHz");
    dis->add_option("--points", dis_points, "frequency points (>= 2)");
    dis->add_option("--cell", dis_cell, "cell size override (not above the mandated size)");
    dis->add_option("--threads", dis_threads, "worker threads, 0 = all cores");

    // simulate
    auto* sim = app.add_subcommand("simulate", "full S-matrix sweep of an isotropic device");
    std::string sim_geometry, sim_fixture, sim_band = "10:15GHz", sim_cell, sim_format = "RI",
                                                sim_unit = "GHz", sim_field_format = "csv";
    std::vector<std::string> sim_fields;
    int sim_points = 51, sim_modes = 1, sim_threads = 0;
    sim->add_option("--geometry", sim_geometry, "geometry JSON");
    sim->add_option("--fixture", sim_fixture, "reference design");
    sim->add_option("--band", sim_band, "band, e.g. 10:15GHz");
    sim->add_option("--points", sim_points, "frequency points (>= 2)");
    sim->add_option("--format", sim_format, "Touchstone format RI|MA|DB");
    sim->add_option("--unit", sim_unit, "Touchstone frequency unit");
    sim->add_option("--modes", sim_modes, "port modes (1 enforces single-mode ports)");
    sim->add_option("--cell", sim_cell, "cell size override (not above the mandated size)");
    sim->add_option("--threads", sim_threads, "worker threads, 0 = all cores");
    sim->add_option("--field-at", sim_fields, "export the port-1 field map at this frequency (repeatable)");
    sim->add_option("--field-format", sim_field_format, "csv|bin|both");

    // circulator-model
    auto* cir = app.add_subcommand("circulator-model", "ideal circulator matrix and ferrite sizing");
    std::string cir_f0 = "12.5GHz", cir_phase = "0deg", cir_band = "10:15GHz";
    double cir_er = reference::kFerritePermittivity;
    int cir_points = 11;
    cir->add_option("--f0", cir_f0, "center frequency");
    cir->add_option("--er-f", cir_er, "ferrite relative permittivity");
    cir->add_option("--phase", cir_phase, "transmission phase, e.g. 0deg");
    cir->add_option("--band", cir_band, "frequency span of the flat .s3p");
    cir->add_option("--points", cir_points, "frequency points in the .s3p");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    SolverOptions solver;
    solver.max_memory_mb = memory_cap_mb(solver.max_memory_mb);
    std::ostream& out = std::cout;

    if (*syn) {
        DeviceBlueprint bp;
        Band band = reference::band();
        if (!syn_fixture.empty()) {
            if (!syn_band.empty() || syn_er != 0.0 || !syn_h.empty() || !syn_d.empty() || !syn_p.empty())
                throw DomainError("--fixture excludes the synthesis flags");
            bp = reference::fixture(syn_fixture);
        } else {
            if (syn_band.empty() || syn_er == 0.0 || syn_h.empty() || syn_d.empty() || syn_p.empty())
                throw DomainError("synthesis needs --band, --er, --h, --d and --p (or --fixture)");
            band = band_arg(syn_band);
            const RsiwCrossSection x =
                synthesize_rsiw(band, Substrate{syn_er, length_arg(syn_h)}, length_arg(syn_d), length_arg(syn_p));
            std::optional<double> length;
            if (!syn_length.empty()) length = length_arg(syn_length);
            bp = blueprint_for(device_kind_from_string(syn_kind), x, length);
        }
        const fs::path dir = prepare_out(out_dir);
        const fs::path file = dir / (std::string(to_string(bp.kind)) + ".geometry.json");
        write_text_file(file, write_geometry_json(bp));
        print_design_report(out, bp, band);
        out << "wrote         " << file.generic_string() << '\n';
        return ok;
    }

    if (*dis) {
        if (dis_points < 2) throw DomainError("--points must be at least 2");
        RsiwCrossSection x;
        const int sources = int(!dis_geometry.empty()) + int(!dis_fixture.empty()) + int(dis_x.any());
        if (sources != 1)
            throw DomainError("give exactly one of --geometry, --fixture or cross-section flags");
        if (dis_x.any())
            x = dis_x.resolve();
        else
            x = load_blueprint(dis_geometry, dis_fixture).cross_section;
        const Band band = band_arg(dis_band);
        if (!dis_cell.empty()) solver.cell_size = length_arg(dis_cell);
        solver.threads = dis_threads;
        const auto rows = extract_dispersion(x, band, dis_points, solver);
        const fs::path dir = prepare_out(out_dir);
        write_text_file(dir / "dispersion.csv", write_dispersion_csv(rows));
        const double worst = max_relative_error(rows);
        out << "points        " << rows.size() << " over " << fmt(ghz(band.f_low)) << "-"
            << fmt(ghz(band.f_high)) << " GHz\n"
            << "max rel err   " << fmt(100.0 * worst, 4) << " % (" << (worst <= 0.02 ? "<= 2 %" : "> 2 %")
            << ")\n"
            << "wrote         " << (dir / "dispersion.csv").generic_string() << '\n';
        return ok;
    }

    if (*sim) {
        if (sim_points < 2) throw DomainError("--points must be at least 2");
        const DeviceBlueprint bp = load_blueprint(sim_geometry, sim_fixture);
        if (bp.kind == DeviceKind::circulator)
            throw UnsupportedPhysicsError(
                "the circulator needs gyrotropic ferrite media, which this isotropic solver does not "
                "model; use circulator-model for the ideal matrix and sizing");
        const Band band = band_arg(sim_band);
        if (!sim_cell.empty()) solver.cell_size = length_arg(sim_cell);
        solver.threads = sim_threads;
        TouchstoneOptions ts;
        ts.format = touchstone_format_from_string(sim_format);
        ts.unit = frequency_unit_from_string(sim_unit);
        ts.blueprint_hash = blueprint_hash(bp);
        ts.comments.push_back(std::string("device ") + std::string(to_string(bp.kind)));
        std::vector<double> field_freqs;
        for (const auto& s : sim_fields) field_freqs.push_back(frequency_arg(s));
        if (sim_field_format != "csv" && sim_field_format != "bin" && sim_field_format != "both")
            throw DomainError("--field-format must be csv, bin or both");

        const std::vector<double> freqs = uniform_frequencies(band, sim_points);
        double f_max = band.f_high;
        for (double f : field_freqs) f_max = std::max(f_max, f);
        const FdfdSolver fdfd(bp, f_max, solver);
        const SParameterBlock block = sweep(fdfd, freqs, sim_modes, solver.threads);

        const fs::path dir = prepare_out(out_dir);
        const std::string stem(to_string(bp.kind));
        const fs::path sfile = dir / (stem + ".s" + std::to_string(block.port_count) + "p");
        save_touchstone(sfile, block, ts);
        write_text_file(dir / (stem + ".csv"), write_sweep_csv(block));

        for (double f : field_freqs) {
            auto r = fdfd.solve(f, {1}, sim_modes, true);
            const std::string base = stem + "_field_p1_" + frequency_tag(f);
            if (sim_field_format != "bin") write_text_file(dir / (base + ".csv"), write_field_csv(r.fields[0]));
            if (sim_field_format != "csv") write_text_file(dir / (base + ".bin"), write_field_binary(r.fields[0]));
        }

        double worst_energy = 0.0, worst_recip = 0.0;
        for (const auto& s : block.matrices) {
            for (int j = 1; j <= s.order(); ++j) {
                double sum = 0.0;
                for (int i = 1; i <= s.order(); ++i) sum += std::norm(s(i, j));
                worst_energy = std::max(worst_energy, std::abs(1.0 - sum));
            }
            worst_recip = std::max(worst_recip, s.reciprocity_error());
        }
        const std::size_t c = nearest_index(block.frequencies, band.center());
        const ScatteringMatrix& s = block.matrices[c];
        auto db = [&](int i, int j) { return fmt(to_db(std::abs(s(i, j))), 5); };
        out << "grid          " << fdfd.grid().nx << " x " << fdfd.grid().ny << ", cell "
            << fmt(mm(fdfd.grid().cell_size)) << " mm\n"
            << "band center   " << fmt(ghz(block.frequencies[c])) << " GHz\n"
            << "|S11|         " << db(1, 1) << " dB\n"
            << "|S21|         " << db(2, 1) << " dB\n";
        if (s.order() >= 3) out << "|S31|         " << db(3, 1) << " dB\n";
        if (s.order() >= 4) {
            out << "|S41|         " << db(4, 1) << " dB\n";
            const double dphi = std::abs(std::arg(s(3, 1) / s(2, 1))) * 180.0 / kPi;
            out << "dphase(S31,S21) = " << fmt(dphi, 5) << " deg ("
                << (std::abs(dphi - 90.0) <= 5.0 ? "90 deg +/- 5 deg" : "outside 90 deg +/- 5 deg") << ")\n";
        }
        if (bp.kind == DeviceKind::divider) {
            const double split = std::abs(to_db(std::abs(s(2, 1))) - to_db(std::abs(s(3, 1))));
            out << "||S21|-|S31|| " << fmt(split, 4) << " dB\n";
        }
        out << "energy balance error " << fmt(100.0 * worst_energy, 4) << " % ("
            << (worst_energy <= 0.03 ? "<= 3 %" : "> 3 %") << ")\n"
            << "reciprocity   max |Sij - Sji| " << fmt(worst_recip, 3) << '\n'
            << "wrote         " << sfile.generic_string() << '\n';
        return ok;
    }

    if (*cir) {
        const double f0 = frequency_arg(cir_f0);
        const double phase = angle_arg(cir_phase);
        const Band band = band_arg(cir_band);
        if (cir_points < 1) throw DomainError("--points must be at least 1");
        const ScatteringMatrix ideal = ideal_circulator_matrix(phase);
        if (ideal.unitarity_error() > 1e-12) throw NumericError("ideal circulator matrix is not unitary");
        SParameterBlock block;
        block.port_count = 3;
        block.frequencies = cir_points == 1 ? std::vector<double>{f0} : uniform_frequencies(band, cir_points);
        for (double f : block.frequencies) {
            ScatteringMatrix s = ideal;
            s.frequency = f;
            block.matrices.push_back(s);
        }
        const fs::path dir = prepare_out(out_dir);
        TouchstoneOptions ts;
        ts.comments.push_back("ideal frequency-flat circulator, circulation 1->2->3->1");
        save_touchstone(dir / "circulator_ideal.s3p", block, ts);
        const double rf = ferrite_radius(f0, cir_er);
        out << "f0            " << fmt(ghz(f0)) << " GHz, eps_f " << fmt(cir_er) << '\n'
            << "R_f formula   " << fmt(mm(rf), 5) << " mm\n"
            << "R_f adopted   " << fmt(mm(reference::kFerriteRadius), 5) << " mm (reference design)\n"
            << "phase         " << fmt(phase * 180.0 / kPi) << " deg, unitarity error "
            << fmt(ideal.unitarity_error(), 3) << '\n'
            << "note          published full-wave isolation -43.85 dB and insertion loss -0.43 dB need "
               "gyrotropic media and are not simulated here\n"
            << "wrote         " << (dir / "circulator_ideal.s3p").generic_string() << '\n';
        return ok;
    }
    return usage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ModeCutoffError& e) {
        std::cerr << "mode cutoff: " << e.what() << " [cutoff " << format_number(e.cutoff_hz() * 1e-9, 6)
                  << " GHz]\n";
        return physics;
    } catch (const PhysicsError& e) {
        std::cerr << "physics error: " << e.what() << '\n';
        return physics;
    } catch (const GeometryError& e) {
        std::cerr << "geometry error: " << e.what() << '\n';
        return geometry;
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return usage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numeric;
    }
}

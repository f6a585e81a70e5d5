#include "siwforge/em_core.hpp"
#include "siwforge/errors.hpp"
#include "siwforge/fdfd.hpp"
#include "siwforge/io.hpp"
#include "siwforge/synthesis.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace siwforge;

namespace {

py::dict block_to_dict(const SParameterBlock& b) {
    const auto nf = static_cast<py::ssize_t>(b.size());
    const auto n = static_cast<py::ssize_t>(b.port_count);
    py::array_t<std::complex<double>> s({nf, n, n});
    auto view = s.mutable_unchecked<3>();
    for (py::ssize_t k = 0; k < nf; ++k)
        for (py::ssize_t i = 0; i < n; ++i)
            for (py::ssize_t j = 0; j < n; ++j) view(k, i, j) = b.matrices[k].entries(i, j);
    py::dict d;
    d["frequencies"] = py::array_t<double>(nf, b.frequencies.data());
    d["s"] = s;
    d["port_count"] = b.port_count;
    return d;
}

SParameterBlock block_from_arrays(const std::vector<double>& f,
                                  py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast> s) {
    if (s.ndim() != 3 || s.shape(1) != s.shape(2) || static_cast<std::size_t>(s.shape(0)) != f.size())
        throw DomainError("s must have shape (len(frequencies), n, n)");
    SParameterBlock b;
    b.port_count = static_cast<int>(s.shape(1));
    b.frequencies = f;
    auto view = s.unchecked<3>();
    for (py::ssize_t k = 0; k < s.shape(0); ++k) {
        ScatteringMatrix m;
        m.entries.resize(b.port_count, b.port_count);
        m.frequency = f[static_cast<std::size_t>(k)];
        for (int i = 0; i < b.port_count; ++i)
            for (int j = 0; j < b.port_count; ++j) m.entries(i, j) = view(k, i, j);
        b.matrices.push_back(std::move(m));
    }
    b.validate();
    return b;
}

SolverOptions options_from(double cell_size, int threads, bool allow_evanescent) {
    SolverOptions o;
    o.cell_size = cell_size;
    o.threads = threads;
    o.allow_evanescent_ports = allow_evanescent;
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SIW synthesis and 2-D full-wave verification";
    m.attr("__version__") = std::string(kToolVersion);
    m.attr("SPEED_OF_LIGHT") = kSpeedOfLight;

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    auto geom = py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
    py::register_exception<DesignRuleError>(m, "DesignRuleError", geom.ptr());
    auto phys = py::register_exception<PhysicsError>(m, "PhysicsError", base.ptr());
    py::register_exception<ModeCutoffError>(m, "ModeCutoffError", phys.ptr());
    py::register_exception<BandTooWideError>(m, "BandTooWideError", phys.ptr());
    py::register_exception<UnsupportedPhysicsError>(m, "UnsupportedPhysicsError", phys.ptr());
    auto num = py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<ResourceError>(m, "ResourceError", num.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    py::class_<Substrate>(m, "Substrate")
        .def(py::init<double, double>(), py::arg("epsilon_r"), py::arg("height"))
        .def_readwrite("epsilon_r", &Substrate::epsilon_r)
        .def_readwrite("height", &Substrate::height);

    py::class_<RsiwCrossSection>(m, "RsiwCrossSection")
        .def(py::init([](double w, double d, double p, const Substrate& s) {
                 RsiwCrossSection x{w, d, p, s};
                 validate(x);
                 return x;
             }),
             py::arg("w_siw"), py::arg("via_diameter"), py::arg("pitch"), py::arg("substrate"))
        .def_readwrite("w_siw", &RsiwCrossSection::w_siw)
        .def_readwrite("via_diameter", &RsiwCrossSection::via_diameter)
        .def_readwrite("pitch", &RsiwCrossSection::pitch)
        .def_readwrite("substrate", &RsiwCrossSection::substrate);

    py::class_<EquivalentGuide>(m, "EquivalentGuide")
        .def(py::init<double, Substrate>(), py::arg("w_eq"), py::arg("substrate"))
        .def_readwrite("w_eq", &EquivalentGuide::w_eq)
        .def_readwrite("substrate", &EquivalentGuide::substrate);

    py::class_<Band>(m, "Band")
        .def(py::init<double, double>(), py::arg("f_low"), py::arg("f_high"))
        .def_readwrite("f_low", &Band::f_low)
        .def_readwrite("f_high", &Band::f_high)
        .def("center", &Band::center);

    m.def("free_space_wavelength", &free_space_wavelength, py::arg("frequency"));
    m.def("equivalent_width", &equivalent_width, py::arg("x"));
    m.def("siw_width_from_equivalent", &siw_width_from_equivalent, py::arg("guide"),
          py::arg("via_diameter"), py::arg("pitch"));
    m.def(
        "cutoff_frequency", [](const EquivalentGuide& g, int n) { return cutoff_frequency(g, ModeIndex{n}); },
        py::arg("guide"), py::arg("n") = 1);
    m.def(
        "propagation_constant",
        [](const EquivalentGuide& g, double f, int n) { return propagation_constant(g, ModeIndex{n}, f); },
        py::arg("guide"), py::arg("frequency"), py::arg("n") = 1);
    m.def(
        "design_rules",
        [](const RsiwCrossSection& x, const Band& b) {
            py::list out;
            for (const auto& r : check_design_rules(x, b).rules)
                out.append(py::dict(py::arg("name") = r.name, py::arg("passed") = r.passed,
                                    py::arg("value") = r.value, py::arg("bound") = r.bound));
            return out;
        },
        py::arg("x"), py::arg("band"));
    m.def("ferrite_radius", &ferrite_radius, py::arg("f0"), py::arg("epsilon_f"));
    m.def("coupler_phase_difference", &coupler_phase_difference, py::arg("coupled"),
          py::arg("aperture_length"), py::arg("frequency"));
    m.def("required_aperture_length", &required_aperture_length, py::arg("coupled"), py::arg("frequency"));
    m.def("coupled_region_guide", &coupled_region_guide, py::arg("x"));
    m.def(
        "ideal_circulator_matrix", [](double phase) { return ideal_circulator_matrix(phase).entries; },
        py::arg("phase") = 0.0);
    m.def("ideal_coupler_matrix", [] { return ideal_coupler_matrix().entries; });

    m.def("synthesize_rsiw", &synthesize_rsiw, py::arg("band"), py::arg("substrate"),
          py::arg("via_diameter"), py::arg("pitch"));
    m.def("microstrip_impedance", &microstrip_impedance, py::arg("width"), py::arg("substrate"));
    m.def("microstrip_50ohm_width", &microstrip_50ohm_width, py::arg("substrate"));
    m.def(
        "synthesize_taper",
        [](const RsiwCrossSection& x, double f) {
            const TaperTransition t = synthesize_taper(x, f);
            return py::dict(py::arg("w_mst") = t.w_mst, py::arg("w_t") = t.w_t, py::arg("l_t") = t.l_t);
        },
        py::arg("x"), py::arg("f_center"));

    py::class_<DeviceBlueprint>(m, "DeviceBlueprint")
        .def_property_readonly("kind", [](const DeviceBlueprint& b) { return std::string(to_string(b.kind)); })
        .def_readonly("cross_section", &DeviceBlueprint::cross_section)
        .def_property_readonly("port_count", [](const DeviceBlueprint& b) { return b.ports.size(); })
        .def_property_readonly("via_count", [](const DeviceBlueprint& b) { return b.layout.vias.size(); })
        .def("to_json", &write_geometry_json)
        .def_static("from_json", [](const std::string& s) { return read_geometry_json(s); })
        .def("hash", &blueprint_hash);

    m.def("fixture", [](const std::string& name) { return reference::fixture(name); }, py::arg("name"));
    m.def("reference_cross_section", &reference::cross_section);
    m.def("generate_straight_guide", &generate_straight_guide, py::arg("x"), py::arg("length"));

    m.def(
        "sweep",
        [](const DeviceBlueprint& bp, double f_low, double f_high, int n_freq, double cell_size,
           int threads) {
            SParameterBlock b;
            {
                py::gil_scoped_release release;
                b = sweep(bp, Band{f_low, f_high}, n_freq, 1, options_from(cell_size, threads, false));
            }
            return block_to_dict(b);
        },
        py::arg("blueprint"), py::arg("f_low"), py::arg("f_high"), py::arg("n_freq"),
        py::arg("cell_size") = 0.0, py::arg("threads") = 0);
    m.def(
        "solve",
        [](const DeviceBlueprint& bp, double f, int excited_port, double cell_size, bool allow_evanescent) {
            PortSolution r;
            {
                py::gil_scoped_release release;
                r = solve_at_frequency(bp, f, excited_port, 1, options_from(cell_size, 0, allow_evanescent));
            }
            const Grid& g = *r.field.grid;
            py::array_t<std::complex<double>> ez({g.ny, g.nx});
            auto view = ez.mutable_unchecked<2>();
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) view(j, i) = r.field.ez[static_cast<std::size_t>(g.index(i, j))];
            return py::dict(py::arg("s_column") = Eigen::VectorXcd(r.s_column), py::arg("ez") = ez,
                            py::arg("cell_size") = g.cell_size, py::arg("x0") = g.x0, py::arg("y0") = g.y0);
        },
        py::arg("blueprint"), py::arg("frequency"), py::arg("excited_port") = 1, py::arg("cell_size") = 0.0,
        py::arg("allow_evanescent") = false);
    m.def(
        "extract_dispersion",
        [](const RsiwCrossSection& x, double f_low, double f_high, int n_freq, double cell_size, int threads) {
            std::vector<DispersionRow> rows;
            {
                py::gil_scoped_release release;
                rows = extract_dispersion(x, Band{f_low, f_high}, n_freq, options_from(cell_size, threads, false));
            }
            py::list out;
            for (const auto& r : rows)
                out.append(py::make_tuple(r.frequency, r.beta_measured, r.beta_analytic, r.rel_err));
            return out;
        },
        py::arg("x"), py::arg("f_low"), py::arg("f_high"), py::arg("n_freq"), py::arg("cell_size") = 0.0,
        py::arg("threads") = 0);

    m.def(
        "write_touchstone",
        [](const std::vector<double>& f, py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast> s,
           const std::string& format, const std::string& unit) {
            TouchstoneOptions o;
            o.format = touchstone_format_from_string(format);
            o.unit = frequency_unit_from_string(unit);
            return write_touchstone(block_from_arrays(f, s), o);
        },
        py::arg("frequencies"), py::arg("s"), py::arg("format") = "RI", py::arg("unit") = "GHz");
    m.def(
        "read_touchstone",
        [](const std::string& text, int port_count) { return block_to_dict(read_touchstone(text, port_count)); },
        py::arg("text"), py::arg("port_count"));
}

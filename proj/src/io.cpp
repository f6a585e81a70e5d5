#include "siwforge/io.hpp"

#include "siwforge/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace siwforge {

using nlohmann::json;

namespace {

double unit_scale(FrequencyUnit u) {
    switch (u) {
        case FrequencyUnit::hz: return 1.0;
        case FrequencyUnit::khz: return 1e3;
        case FrequencyUnit::mhz: return 1e6;
        case FrequencyUnit::ghz: return 1e9;
    }
    return 1.0;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_double(std::string_view token, int line) {
    double v = 0.0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError(line, "not a number: '" + std::string(token) + "'");
    return v;
}

double degrees(Complex z) { return std::arg(z) * 180.0 / kPi; }

double magnitude_db(Complex z) {
    const double m = std::abs(z);
    return m == 0.0 ? kZeroDb : 20.0 * std::log10(m);
}

// Entry order on disk: 2-port files list S11 S21 S12 S22, others row-major.
std::pair<int, int> entry_at(int n, int k) {
    if (n == 2) return {k % 2, k / 2};
    return {k / n, k % n};
}

}  // namespace

std::string_view to_string(FrequencyUnit unit) {
    switch (unit) {
        case FrequencyUnit::hz: return "Hz";
        case FrequencyUnit::khz: return "kHz";
        case FrequencyUnit::mhz: return "MHz";
        case FrequencyUnit::ghz: return "GHz";
    }
    return "GHz";
}

std::string_view to_string(TouchstoneFormat format) {
    switch (format) {
        case TouchstoneFormat::ri: return "RI";
        case TouchstoneFormat::ma: return "MA";
        case TouchstoneFormat::db: return "DB";
    }
    return "RI";
}

FrequencyUnit frequency_unit_from_string(std::string_view s) {
    const std::string l = lower(s);
    if (l == "hz") return FrequencyUnit::hz;
    if (l == "khz") return FrequencyUnit::khz;
    if (l == "mhz") return FrequencyUnit::mhz;
    if (l == "ghz") return FrequencyUnit::ghz;
    throw DomainError("unknown frequency unit '" + std::string(s) + "'");
}

TouchstoneFormat touchstone_format_from_string(std::string_view s) {
    const std::string l = lower(s);
    if (l == "ri") return TouchstoneFormat::ri;
    if (l == "ma") return TouchstoneFormat::ma;
    if (l == "db") return TouchstoneFormat::db;
    throw DomainError("unknown Touchstone format '" + std::string(s) + "'");
}

std::string format_number(double value, int digits) {
    if (value == 0.0) value = 0.0;  // drop the sign of -0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, digits);
    if (ec != std::errc()) throw NumericError("number formatting failed");
    return {buf, ptr};
}

// ---------------------------------------------------------------------------
// Touchstone

std::string write_touchstone(const SParameterBlock& block, const TouchstoneOptions& options) {
    if (block.size() == 0) throw DomainError("cannot write an empty S-parameter block");
    block.validate();
    const int n = block.port_count;
    std::ostringstream out;
    out << "! " << kToolName << ' ' << kToolVersion << '\n';
    if (!options.blueprint_hash.empty()) out << "! blueprint fnv1a:" << options.blueprint_hash << '\n';
    out << "! S normalized to TE10 modal wave amplitudes at the port reference planes;\n"
           "! the R 50 below is nominal\n";
    for (const auto& c : options.comments) out << "! " << c << '\n';
    out << "# " << to_string(options.unit) << " S " << to_string(options.format) << " R 50\n";

    const double scale = unit_scale(options.unit);
    for (std::size_t k = 0; k < block.size(); ++k) {
        const ScatteringMatrix& s = block.matrices[k];
        out << format_number(block.frequencies[k] / scale, 12);
        for (int e = 0; e < n * n; ++e) {
            const auto [i, j] = entry_at(n, e);
            const Complex z = s.entries(i, j);
            // 3+ ports: each matrix row starts a line, at most four pairs per line.
            const bool wrap = n > 2 && e > 0 && j % 4 == 0;
            if (wrap) out << '\n';
            double a = 0.0, b = 0.0;
            switch (options.format) {
                case TouchstoneFormat::ri: a = z.real(); b = z.imag(); break;
                case TouchstoneFormat::ma: a = std::abs(z); b = degrees(z); break;
                case TouchstoneFormat::db: a = magnitude_db(z); b = degrees(z); break;
            }
            out << (wrap ? "" : " ") << format_number(a, 12) << ' ' << format_number(b, 12);
        }
        out << '\n';
    }
    return out.str();
}

SParameterBlock read_touchstone(std::string_view text, int port_count) {
    if (port_count < 1) throw DomainError("port count must be positive");
    const int n = port_count;
    // Line layout of one frequency record: count of value pairs on each line.
    std::vector<int> layout;
    if (n <= 2) {
        layout.push_back(n * n);
    } else {
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; c += 4) layout.push_back(std::min(4, n - c));
    }

    SParameterBlock block;
    block.port_count = n;
    bool have_options = false;
    FrequencyUnit unit = FrequencyUnit::ghz;
    TouchstoneFormat format = TouchstoneFormat::ma;
    std::vector<double> values;
    std::size_t layout_pos = 0;
    int record_line = 0;

    auto finish_record = [&]() {
        const double f = values[0] * unit_scale(unit);
        if (!block.frequencies.empty() && !(f > block.frequencies.back()))
            throw ParseError(record_line, "frequencies must increase strictly");
        ScatteringMatrix s;
        s.entries.resize(n, n);
        s.frequency = f;
        for (int e = 0; e < n * n; ++e) {
            const auto [i, j] = entry_at(n, e);
            const double a = values[1 + 2 * e];
            const double b = values[2 + 2 * e];
            Complex z;
            switch (format) {
                case TouchstoneFormat::ri: z = {a, b}; break;
                case TouchstoneFormat::ma: z = std::polar(a, b * kPi / 180.0); break;
                case TouchstoneFormat::db:
                    z = a <= kZeroDb ? Complex{} : std::polar(std::pow(10.0, a / 20.0), b * kPi / 180.0);
                    break;
            }
            s.entries(i, j) = z;
        }
        block.frequencies.push_back(f);
        block.matrices.push_back(std::move(s));
        values.clear();
        layout_pos = 0;
    };

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (const auto bang = line.find('!'); bang != line.npos) line = line.substr(0, bang);
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;

        if (tokens[0].front() == '#') {
            if (have_options) throw ParseError(line_no, "duplicate option line");
            if (!values.empty()) throw ParseError(line_no, "option line inside a data record");
            have_options = true;
            std::vector<std::string> opts;
            if (tokens[0].size() > 1) opts.push_back(lower(tokens[0].substr(1)));
            for (std::size_t t = 1; t < tokens.size(); ++t) opts.push_back(lower(tokens[t]));
            for (std::size_t t = 0; t < opts.size(); ++t) {
                const std::string& o = opts[t];
                if (o == "hz" || o == "khz" || o == "mhz" || o == "ghz") {
                    unit = frequency_unit_from_string(o);
                } else if (o == "ri" || o == "ma" || o == "db") {
                    format = touchstone_format_from_string(o);
                } else if (o == "s") {
                } else if (o == "y" || o == "z" || o == "h" || o == "g") {
                    throw ParseError(line_no, "only S parameters are supported");
                } else if (o == "r") {
                    if (t + 1 >= opts.size()) throw ParseError(line_no, "malformed option line: R needs a value");
                    parse_double(opts[++t], line_no);
                } else {
                    throw ParseError(line_no, "malformed option line: unknown token '" + o + "'");
                }
            }
            continue;
        }
        if (!have_options)
            throw ParseError(line_no, "missing option line ('# <unit> S <format> R 50') before data");

        const std::size_t expected =
            2 * static_cast<std::size_t>(layout[layout_pos]) + (layout_pos == 0 ? 1 : 0);
        if (tokens.size() != expected) {
            std::ostringstream msg;
            msg << "wrong arity: expected " << expected << " values, found " << tokens.size();
            throw ParseError(line_no, msg.str());
        }
        if (layout_pos == 0) record_line = line_no;
        for (auto t : tokens) values.push_back(parse_double(t, line_no));
        if (++layout_pos == layout.size()) finish_record();
    }
    if (!values.empty()) throw ParseError(line_no, "truncated data record at end of file");
    if (!have_options) throw ParseError(1, "missing option line");
    if (block.size() == 0) throw ParseError(line_no, "no data");
    return block;
}

int touchstone_port_count(const std::filesystem::path& path) {
    const std::string ext = lower(path.extension().string());
    if (ext.size() >= 4 && ext[1] == 's' && ext.back() == 'p') {
        int n = 0;
        const char* b = ext.data() + 2;
        const char* e = ext.data() + ext.size() - 1;
        auto [ptr, ec] = std::from_chars(b, e, n);
        if (ec == std::errc() && ptr == e && n > 0) return n;
    }
    throw ParseError(0, "cannot infer port count from file name '" + path.string() + "'");
}

void save_touchstone(const std::filesystem::path& path, const SParameterBlock& block,
                     const TouchstoneOptions& options) {
    if (touchstone_port_count(path) != block.port_count)
        throw DomainError("file extension does not match the port count");
    write_text_file(path, write_touchstone(block, options));
}

SParameterBlock load_touchstone(const std::filesystem::path& path) {
    return read_touchstone(read_text_file(path), touchstone_port_count(path));
}

// ---------------------------------------------------------------------------
// CSV

std::string write_sweep_csv(const SParameterBlock& block) {
    block.validate();
    const int n = block.port_count;
    std::ostringstream out;
    out << "f_GHz";
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) out << ",S" << i << j << "_dB,S" << i << j << "_deg";
    out << '\n';
    for (std::size_t k = 0; k < block.size(); ++k) {
        out << format_number(block.frequencies[k] * 1e-9, 9);
        for (int i = 1; i <= n; ++i) {
            for (int j = 1; j <= n; ++j) {
                const Complex z = block.at(k, i, j);
                out << ',' << format_number(magnitude_db(z), 9) << ',' << format_number(degrees(z), 9);
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string write_dispersion_csv(const std::vector<DispersionRow>& rows) {
    std::ostringstream out;
    out << "f_GHz,beta_rad_per_m,beta_analytic,rel_err\n";
    for (const auto& r : rows)
        out << format_number(r.frequency * 1e-9, 9) << ',' << format_number(r.beta_measured, 9) << ','
            << format_number(r.beta_analytic, 9) << ',' << format_number(r.rel_err, 9) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Geometry JSON

namespace {

constexpr std::string_view kGeometrySchema = "siwforge-geometry/1";

double to_mm(double m) { return std::round(m * 1e9) / 1e6; }
double from_mm(const json& v) { return v.get<double>() * 1e-3; }

json rect_json(const Rect& r) {
    return json::array({to_mm(r.x_min), to_mm(r.y_min), to_mm(r.x_max), to_mm(r.y_max)});
}

Rect rect_from(const json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError(0, "rect must be [x_min, y_min, x_max, y_max]");
    return {from_mm(j[0]), from_mm(j[1]), from_mm(j[2]), from_mm(j[3])};
}

json point_json(Point2 p) { return json::array({to_mm(p.x), to_mm(p.y)}); }

Point2 point_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ParseError(0, "point must be [x, y]");
    return {from_mm(j[0]), from_mm(j[1])};
}

json geometry_document(const DeviceBlueprint& bp) {
    json doc;
    doc["schema"] = kGeometrySchema;
    doc["units"] = "mm";
    doc["kind"] = to_string(bp.kind);
    doc["substrate"] = {{"epsilon_r", bp.cross_section.substrate.epsilon_r},
                        {"height", to_mm(bp.cross_section.substrate.height)}};
    doc["cross_section"] = {{"w_siw", to_mm(bp.cross_section.w_siw)},
                            {"via_diameter", to_mm(bp.cross_section.via_diameter)},
                            {"pitch", to_mm(bp.cross_section.pitch)}};
    doc["outline"] = rect_json(bp.layout.outline);
    json vias = json::array();
    for (const Via& v : bp.layout.vias) {
        json jv = {{"center", point_json(v.center)}, {"radius", to_mm(v.radius)}};
        if (v.wall_contact) jv["wall_contact"] = true;
        vias.push_back(std::move(jv));
    }
    doc["vias"] = std::move(vias);
    json rects = json::array();
    for (const Rect& r : bp.layout.rects) rects.push_back(rect_json(r));
    doc["rects"] = std::move(rects);
    json ports = json::array();
    for (const PortSpec& p : bp.ports)
        ports.push_back({{"id", p.id},
                         {"position", point_json(p.position)},
                         {"width", to_mm(p.width)},
                         {"normal", json::array({p.normal.x, p.normal.y})}});
    doc["ports"] = std::move(ports);

    const DeviceExtras& e = bp.extras;
    json extras = {{"arm_length", to_mm(e.arm_length)}};
    if (e.post)
        extras["post"] = {{"radius", to_mm(e.post->radius)},
                          {"offset_xp", to_mm(e.post->offset_xp)},
                          {"center", point_json(e.post->center)}};
    if (e.ferrite) {
        json f = {{"epsilon_f", e.ferrite->epsilon_f},
                  {"saturation_4pi_ms_gauss", e.ferrite->saturation_4pi_ms_gauss},
                  {"radius", to_mm(e.ferrite->radius)},
                  {"height", to_mm(e.ferrite->height)}};
        if (e.ferrite->bias_field_oe) f["bias_field_oe"] = *e.ferrite->bias_field_oe;
        extras["ferrite"] = std::move(f);
    }
    if (e.ferrite_center) extras["ferrite_center"] = point_json(*e.ferrite_center);
    if (e.aperture)
        extras["aperture"] = {{"w_ap", to_mm(e.aperture->w_ap)},
                              {"l_ap", to_mm(e.aperture->l_ap)},
                              {"w_s", to_mm(e.aperture->w_s)},
                              {"l_s", to_mm(e.aperture->l_s)}};
    doc["extras"] = std::move(extras);
    return doc;
}

}  // namespace

std::string write_geometry_json(const DeviceBlueprint& bp) {
    return geometry_document(bp).dump(2) + "\n";
}

DeviceBlueprint read_geometry_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(0, std::string("invalid JSON: ") + e.what());
    }
    try {
        if (doc.value("schema", std::string()) != kGeometrySchema)
            throw ParseError(0, "unsupported geometry schema (expected siwforge-geometry/1)");
        if (doc.value("units", std::string("mm")) != "mm") throw ParseError(0, "units must be mm");
        DeviceBlueprint bp;
        bp.kind = device_kind_from_string(doc.at("kind").get<std::string>());
        bp.cross_section.substrate = {doc.at("substrate").at("epsilon_r").get<double>(),
                                      from_mm(doc.at("substrate").at("height"))};
        const json& x = doc.at("cross_section");
        bp.cross_section.w_siw = from_mm(x.at("w_siw"));
        bp.cross_section.via_diameter = from_mm(x.at("via_diameter"));
        bp.cross_section.pitch = from_mm(x.at("pitch"));
        bp.layout.substrate = bp.cross_section.substrate;
        bp.layout.outline = rect_from(doc.at("outline"));
        for (const json& v : doc.at("vias"))
            bp.layout.vias.push_back(
                {point_from(v.at("center")), from_mm(v.at("radius")), v.value("wall_contact", false)});
        for (const json& r : doc.at("rects")) bp.layout.rects.push_back(rect_from(r));
        for (const json& p : doc.at("ports")) {
            const json& nrm = p.at("normal");
            bp.ports.push_back({p.at("id").get<int>(), point_from(p.at("position")),
                                from_mm(p.at("width")), {nrm.at(0).get<double>(), nrm.at(1).get<double>()}});
        }
        const json& e = doc.at("extras");
        bp.extras.arm_length = from_mm(e.at("arm_length"));
        if (e.contains("post")) {
            const json& p = e["post"];
            bp.extras.post = InductivePost{from_mm(p.at("radius")), from_mm(p.at("offset_xp")),
                                           point_from(p.at("center"))};
        }
        if (e.contains("ferrite")) {
            const json& f = e["ferrite"];
            FerriteSpec fs{f.at("epsilon_f").get<double>(), f.at("saturation_4pi_ms_gauss").get<double>(),
                           from_mm(f.at("radius")), from_mm(f.at("height")), std::nullopt};
            if (f.contains("bias_field_oe")) fs.bias_field_oe = f["bias_field_oe"].get<double>();
            bp.extras.ferrite = fs;
        }
        if (e.contains("ferrite_center")) bp.extras.ferrite_center = point_from(e["ferrite_center"]);
        if (e.contains("aperture")) {
            const json& a = e["aperture"];
            bp.extras.aperture = ApertureParams{from_mm(a.at("w_ap")), from_mm(a.at("l_ap")),
                                                from_mm(a.at("w_s")), from_mm(a.at("l_s"))};
        }
        validate_blueprint(bp);
        return bp;
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("malformed geometry document: ") + e.what());
    }
}

std::string blueprint_hash(const DeviceBlueprint& bp) {
    const std::string text = geometry_document(bp).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Field maps

namespace {

template <typename T>
void put_le(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ParseError(0, "field binary truncated");
    char bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

const Grid& field_grid(const FieldMap& f) {
    if (!f.grid || f.ez.size() != f.grid->size()) throw DomainError("field map does not match its grid");
    return *f.grid;
}

}  // namespace

std::string write_field_csv(const FieldMap& field) {
    const Grid& g = field_grid(field);
    std::string out = "x_mm,y_mm,re_ez,im_ez\n";
    out.reserve(g.size() * 48);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const Point2 p = g.node(i, j);
            const Complex z = field.ez[static_cast<std::size_t>(g.index(i, j))];
            out += format_number(p.x * 1e3, 9);
            out += ',';
            out += format_number(p.y * 1e3, 9);
            out += ',';
            out += format_number(z.real(), 12);
            out += ',';
            out += format_number(z.imag(), 12);
            out += '\n';
        }
    }
    return out;
}

std::string write_field_binary(const FieldMap& field) {
    const Grid& g = field_grid(field);
    std::string out;
    out.reserve(24 + g.size() * 16);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(g.nx));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(g.ny));
    put_le<double>(out, g.cell_size * 1e3);
    for (const Complex& z : field.ez) {
        put_le<double>(out, z.real());
        put_le<double>(out, z.imag());
    }
    return out;
}

FieldGridData read_field_binary(std::string_view bytes) {
    std::size_t pos = 0;
    FieldGridData d;
    d.nx = get_le<std::uint64_t>(bytes, pos);
    d.ny = get_le<std::uint64_t>(bytes, pos);
    d.cell_size_mm = get_le<double>(bytes, pos);
    if (d.nx == 0 || d.ny == 0 || (bytes.size() - pos) / 16 != d.nx * d.ny)
        throw ParseError(0, "field binary size does not match its header");
    d.values.resize(d.nx * d.ny);
    for (auto& z : d.values) {
        const double re = get_le<double>(bytes, pos);
        const double im = get_le<double>(bytes, pos);
        z = {re, im};
    }
    return d;
}

// ---------------------------------------------------------------------------

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ResourceError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace siwforge

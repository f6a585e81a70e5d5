#pragma once

// Serialization: Touchstone 1.1, sweep / dispersion CSV, geometry JSON and
// field-map exports. All writers produce LF line endings and C-locale numbers.

#include "siwforge/fdfd.hpp"
#include "siwforge/sparameters.hpp"
#include "siwforge/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace siwforge {

inline constexpr std::string_view kToolName = "siwforge";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// dB value written for an exact zero magnitude.
inline constexpr double kZeroDb = -999.0;

enum class FrequencyUnit { hz, khz, mhz, ghz };
enum class TouchstoneFormat { ri, ma, db };

std::string_view to_string(FrequencyUnit unit);
std::string_view to_string(TouchstoneFormat format);
FrequencyUnit frequency_unit_from_string(std::string_view s);
TouchstoneFormat touchstone_format_from_string(std::string_view s);

struct TouchstoneOptions {
    FrequencyUnit unit = FrequencyUnit::ghz;
    TouchstoneFormat format = TouchstoneFormat::ri;
    std::string blueprint_hash;          // hex, empty to omit
    std::vector<std::string> comments;   // extra "!" lines
};

/// Number formatting shared by the writers: shortest form with `digits`
/// significant digits, no locale.
std::string format_number(double value, int digits);

std::string write_touchstone(const SParameterBlock& block, const TouchstoneOptions& options = {});
/// Parses a document with a known port count. Throws ParseError carrying the
/// offending line number.
SParameterBlock read_touchstone(std::string_view text, int port_count);

/// Port count from a ".sNp" file name; throws ParseError otherwise.
int touchstone_port_count(const std::filesystem::path& path);
void save_touchstone(const std::filesystem::path& path, const SParameterBlock& block,
                     const TouchstoneOptions& options = {});
SParameterBlock load_touchstone(const std::filesystem::path& path);

/// f_GHz then S<i><j>_dB, S<i><j>_deg in row-major order; 9 significant digits.
std::string write_sweep_csv(const SParameterBlock& block);
/// f_GHz, beta_rad_per_m, beta_analytic, rel_err.
std::string write_dispersion_csv(const std::vector<DispersionRow>& rows);

/// Schema-versioned ("siwforge-geometry/1") blueprint document in millimeters.
std::string write_geometry_json(const DeviceBlueprint& blueprint);
DeviceBlueprint read_geometry_json(std::string_view text);
/// FNV-1a 64 of the geometry document, as 16 hex digits.
std::string blueprint_hash(const DeviceBlueprint& blueprint);

/// x_mm, y_mm, re_ez, im_ez for every cell, row-major (y outer).
std::string write_field_csv(const FieldMap& field);
/// uint64 nx, uint64 ny, float64 cell_size_mm, then nx*ny (re, im) float64
/// pairs row-major; all little-endian.
std::string write_field_binary(const FieldMap& field);

struct FieldGridData {
    std::uint64_t nx = 0;
    std::uint64_t ny = 0;
    double cell_size_mm = 0.0;
    std::vector<Complex> values;
};
FieldGridData read_field_binary(std::string_view bytes);

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace siwforge

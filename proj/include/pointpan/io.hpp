#pragma once

#include "pointpan/fields.hpp"
#include "pointpan/imaging.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pointpan::io {

namespace fs = std::filesystem;

/// Dense field files: 16-byte header ("PPFD", then height, width, channels as
/// little-endian uint32) followed by H*W*C little-endian float32, pixel-major.
inline constexpr std::array<char, 4> kFieldMagic{'P', 'P', 'F', 'D'};

struct FieldBlob {
  GridShape shape;
  PixelMatrix<float> values;
};

FieldBlob read_field(const fs::path& path);
void write_field(const fs::path& path, GridShape shape, const Eigen::Ref<const PixelMatrix<double>>& values);

SemanticField<double> read_semantic(const fs::path& path);
FeatureField<double> read_features(const fs::path& path);

/// 8-bit PNG, any color type, returned as sRGB in [0, 1].
RgbImage<double> read_rgb_png(const fs::path& path);
/// Channel values are written as round(255 v).
void write_rgb_png(const fs::path& path, const RgbImage<double>& img);
void write_gray8_png(const fs::path& path, GridShape shape, const std::vector<std::uint8_t>& values);
void write_boundary_png(const fs::path& path, const BoundaryMap<double>& b);

std::vector<std::uint16_t> read_gray16_png(const fs::path& path, GridShape& shape);
void write_gray16_png(const fs::path& path, GridShape shape, const std::vector<std::uint16_t>& values);

/// Segment table JSON: {"segments":[{"id":1,"class_id":3,"kind":"thing"}]}.
nlohmann::json segments_to_json(const PanopticMap& map);
std::map<int, SegmentInfo> segments_from_json(const nlohmann::json& j);

/// A panoptic map lives in `<stem>.png` (16-bit ids) and `<stem>.json`.
PanopticMap read_panoptic(const fs::path& png_path, const fs::path& json_path);
PanopticMap read_panoptic(const fs::path& stem);
void write_panoptic(const fs::path& stem, const PanopticMap& map);

/// Color-coded segments; void is black, other colors hash the segment id.
RgbImage<double> visualize(const PanopticMap& map);

/// JSON lines: {"x":..,"y":..,"class_id":..,"target_id":..,"kind":".."}.
std::vector<PointLabel> read_points(const fs::path& path);
void write_points(const fs::path& path, const std::vector<PointLabel>& points);
nlohmann::json point_to_json(const PointLabel& p);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace pointpan::io

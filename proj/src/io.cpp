#include "pointpan/io.hpp"

#include "pointpan/sampler.hpp"

#include <png.h>

#include <cmath>
#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace pointpan::io {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

/// Decoded PNG rows, expanded to 8-bit RGB or 16-bit gray by libpng transforms.
struct DecodedPng {
  GridShape shape;
  int channels = 0;
  int bit_depth = 0;
  std::vector<unsigned char> bytes;
};

enum class PngTarget { rgb8, gray16 };

DecodedPng decode_png(const fs::path& path, PngTarget target) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError(path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  DecodedPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (target == PngTarget::rgb8) {
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  } else {
    if (color != PNG_COLOR_TYPE_GRAY) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw IoError(path.string() + ": segment id maps must be grayscale PNG");
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth <= 8) png_set_expand_16(png);
    png_set_swap(png);  // host little-endian words
  }
  png_read_update_info(png, info);

  out.shape = {static_cast<Index>(png_get_image_height(png, info)), static_cast<Index>(png_get_image_width(png, info))};
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * static_cast<std::size_t>(out.shape.height));
  rows.resize(static_cast<std::size_t>(out.shape.height));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = out.bytes.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode_png(const fs::path& path, GridShape shape, int color_type, int bit_depth,
                const std::vector<unsigned char>& bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(shape.width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(shape.height));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = const_cast<unsigned char*>(bytes.data() + r * stride);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(shape.width), static_cast<png_uint_32>(shape.height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::ferror(f.get())) throw IoError("failed to write " + path.string());
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
}

}  // namespace

FieldBlob read_field(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char header[16];
  if (!in.read(reinterpret_cast<char*>(header), 16)) throw ValidationError(path.string() + ": truncated header");
  if (!std::equal(kFieldMagic.begin(), kFieldMagic.end(), reinterpret_cast<const char*>(header)))
    throw ValidationError(path.string() + ": bad field magic");
  FieldBlob blob;
  blob.shape = {static_cast<Index>(get_u32(header + 4)), static_cast<Index>(get_u32(header + 8))};
  const Index channels = get_u32(header + 12);
  require(blob.shape.height >= 1 && blob.shape.width >= 1 && channels >= 1, path.string() + ": empty field");
  const std::size_t count = static_cast<std::size_t>(blob.shape.pixels() * channels);
  std::vector<unsigned char> raw(count * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw ValidationError(path.string() + ": truncated payload");
  if (in.peek() != std::char_traits<char>::eof()) throw ValidationError(path.string() + ": trailing bytes");
  blob.values.resize(blob.shape.pixels(), channels);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint32_t bits = get_u32(raw.data() + 4 * k);
    float v;
    std::memcpy(&v, &bits, 4);
    blob.values.data()[k] = v;
  }
  return blob;
}

void write_field(const fs::path& path, GridShape shape, const Eigen::Ref<const PixelMatrix<double>>& values) {
  require(values.rows() == shape.pixels(), "field rows do not match the shape");
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os.write(kFieldMagic.data(), 4);
  put_u32(os, static_cast<std::uint32_t>(shape.height));
  put_u32(os, static_cast<std::uint32_t>(shape.width));
  put_u32(os, static_cast<std::uint32_t>(values.cols()));
  for (Index i = 0; i < values.rows(); ++i)
    for (Index c = 0; c < values.cols(); ++c) {
      const float v = static_cast<float>(values(i, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(os, bits);
    }
  if (!os) throw IoError("failed to write " + path.string());
}

SemanticField<double> read_semantic(const fs::path& path) {
  FieldBlob b = read_field(path);
  return {b.shape, b.values.cast<double>()};
}

FeatureField<double> read_features(const fs::path& path) {
  FieldBlob b = read_field(path);
  return {b.shape, b.values.cast<double>()};
}

RgbImage<double> read_rgb_png(const fs::path& path) {
  DecodedPng d = decode_png(path, PngTarget::rgb8);
  if (d.channels != 3 || d.bit_depth != 8) throw IoError(path.string() + ": unsupported PNG layout");
  RgbImage<double> img(d.shape.height, d.shape.width);
  for (Index i = 0; i < d.shape.pixels(); ++i)
    for (Index c = 0; c < 3; ++c) img.data(i, c) = d.bytes[static_cast<std::size_t>(3 * i + c)] / 255.0;
  return img;
}

void write_rgb_png(const fs::path& path, const RgbImage<double>& img) {
  ensure_parent(path);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.shape.pixels() * 3));
  for (Index i = 0; i < img.shape.pixels(); ++i)
    for (Index c = 0; c < 3; ++c) bytes[static_cast<std::size_t>(3 * i + c)] = to_byte(img.data(i, c));
  encode_png(path, img.shape, PNG_COLOR_TYPE_RGB, 8, bytes);
}

void write_gray8_png(const fs::path& path, GridShape shape, const std::vector<std::uint8_t>& values) {
  require(static_cast<Index>(values.size()) == shape.pixels(), "gray image size does not match the shape");
  ensure_parent(path);
  encode_png(path, shape, PNG_COLOR_TYPE_GRAY, 8, values);
}

void write_boundary_png(const fs::path& path, const BoundaryMap<double>& b) {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(b.shape.pixels()));
  for (Index i = 0; i < b.shape.pixels(); ++i) v[static_cast<std::size_t>(i)] = to_byte(b.data(i));
  write_gray8_png(path, b.shape, v);
}

std::vector<std::uint16_t> read_gray16_png(const fs::path& path, GridShape& shape) {
  DecodedPng d = decode_png(path, PngTarget::gray16);
  if (d.channels != 1 || d.bit_depth != 16) throw IoError(path.string() + ": unsupported PNG layout");
  shape = d.shape;
  std::vector<std::uint16_t> v(static_cast<std::size_t>(shape.pixels()));
  for (std::size_t k = 0; k < v.size(); ++k)
    v[k] = static_cast<std::uint16_t>(d.bytes[2 * k] | (d.bytes[2 * k + 1] << 8));
  return v;
}

void write_gray16_png(const fs::path& path, GridShape shape, const std::vector<std::uint16_t>& values) {
  require(static_cast<Index>(values.size()) == shape.pixels(), "gray image size does not match the shape");
  ensure_parent(path);
  std::vector<unsigned char> bytes(values.size() * 2);
  for (std::size_t k = 0; k < values.size(); ++k) {  // PNG stores big-endian samples
    bytes[2 * k] = static_cast<unsigned char>(values[k] >> 8);
    bytes[2 * k + 1] = static_cast<unsigned char>(values[k] & 0xFF);
  }
  encode_png(path, shape, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

nlohmann::json segments_to_json(const PanopticMap& map) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, info] : map.segments)
    arr.push_back({{"id", id}, {"class_id", info.class_id}, {"kind", to_string(info.kind)}});
  return {{"segments", arr}};
}

std::map<int, SegmentInfo> segments_from_json(const nlohmann::json& j) {
  std::map<int, SegmentInfo> out;
  try {
    for (const auto& s : j.at("segments")) {
      const int id = s.at("id").get<int>();
      require(id > 0 && id <= 0xFFFF, "segment id " + std::to_string(id) + " outside [1, 65535]");
      const SegmentInfo info{s.at("class_id").get<int>(), parse_kind(s.at("kind").get<std::string>())};
      require(out.emplace(id, info).second, "duplicate segment id " + std::to_string(id));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed segment table: ") + e.what());
  }
  return out;
}

PanopticMap read_panoptic(const fs::path& png_path, const fs::path& json_path) {
  GridShape shape;
  const std::vector<std::uint16_t> ids = read_gray16_png(png_path, shape);
  PanopticMap map(shape);
  for (std::size_t k = 0; k < ids.size(); ++k) map.ids(static_cast<Index>(k)) = ids[k];
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(json_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(json_path.string() + ": " + e.what());
  }
  map.segments = segments_from_json(j);
  for (Index i = 0; i < map.ids.size(); ++i)
    require(map.ids(i) == PanopticMap::kVoid || map.segments.contains(map.ids(i)),
            png_path.string() + ": id " + std::to_string(map.ids(i)) + " missing from the segment table");
  return map;
}

PanopticMap read_panoptic(const fs::path& stem) {
  fs::path png = stem, json = stem;
  png += ".png";
  json += ".json";
  return read_panoptic(png, json);
}

void write_panoptic(const fs::path& stem, const PanopticMap& map) {
  std::vector<std::uint16_t> ids(static_cast<std::size_t>(map.ids.size()));
  for (Index i = 0; i < map.ids.size(); ++i) {
    require(map.ids(i) >= 0 && map.ids(i) <= 0xFFFF, "segment id does not fit in 16 bits");
    ids[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(map.ids(i));
  }
  fs::path png = stem, json = stem;
  png += ".png";
  json += ".json";
  write_gray16_png(png, map.shape, ids);
  write_text(json, segments_to_json(map).dump(2) + "\n");
}

RgbImage<double> visualize(const PanopticMap& map) {
  RgbImage<double> img(map.shape.height, map.shape.width);
  for (Index i = 0; i < map.ids.size(); ++i) {
    const int id = map.ids(i);
    if (id == PanopticMap::kVoid) continue;
    const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(id));
    for (Index c = 0; c < 3; ++c) img.data(i, c) = static_cast<double>((h >> (8 * c)) & 0xFF) / 255.0;
  }
  return img;
}

nlohmann::json point_to_json(const PointLabel& p) {
  return {{"x", p.x}, {"y", p.y}, {"class_id", p.class_id}, {"target_id", p.target_id}, {"kind", to_string(p.kind)}};
}

std::vector<PointLabel> read_points(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<PointLabel> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      for (const auto& [key, value] : j.items())
        require(key == "x" || key == "y" || key == "class_id" || key == "target_id" || key == "kind",
                "unknown key '" + key + "'");
      out.push_back({j.at("x").get<Index>(), j.at("y").get<Index>(), j.at("class_id").get<int>(),
                     j.at("target_id").get<int>(), parse_kind(j.at("kind").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_points(const fs::path& path, const std::vector<PointLabel>& points) {
  std::string text;
  for (const PointLabel& p : points) text += point_to_json(p).dump() + "\n";
  write_text(path, text);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os << text;
  if (!os) throw IoError("failed to write " + path.string());
}

}  // namespace pointpan::io

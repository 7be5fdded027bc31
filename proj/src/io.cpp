#include "hshseg/io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace hshseg::io {
namespace {

using nlohmann::json;

/// Cursor over a PNM header: whitespace-separated integers with '#'
/// comments running to end of line.
class PnmHeader {
 public:
  PnmHeader(const std::string& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  std::string magic() {
    if (bytes_.size() < 2) fail("file too short");
    pos_ = 2;
    return bytes_.substr(0, 2);
  }

  int number() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      ++pos_;
    }
    if (start == pos_ || pos_ - start > 9) fail("expected a header number");
    return std::stoi(bytes_.substr(start, pos_ - start));
  }

  /// Consumes the single whitespace byte that ends a binary header.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("malformed header terminator");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path_.string() + ": " + what);
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

struct Pnm {
  int width = 0;
  int height = 0;
  int channels = 1;
  int maxval = 255;
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

Pnm decode_pnm(const std::string& bytes, const fs::path& path) {
  PnmHeader header(bytes, path);
  const std::string magic = header.magic();
  Pnm pnm;
  bool binary = true;
  if (magic == "P5") {
    pnm.channels = 1;
  } else if (magic == "P6") {
    pnm.channels = 3;
  } else if (magic == "P2") {
    pnm.channels = 1;
    binary = false;
  } else if (magic == "P3") {
    pnm.channels = 3;
    binary = false;
  } else {
    header.fail("unsupported PNM magic '" + magic + "'");
  }
  pnm.width = header.number();
  pnm.height = header.number();
  pnm.maxval = header.number();
  if (pnm.width < 1 || pnm.height < 1) header.fail("empty raster");
  if (pnm.maxval < 1 || pnm.maxval > 65535) header.fail("maxval out of range");
  const std::size_t count = static_cast<std::size_t>(pnm.width) *
                            static_cast<std::size_t>(pnm.height) *
                            static_cast<std::size_t>(pnm.channels);
  pnm.samples.resize(count);
  if (binary) {
    const std::size_t offset = header.raster_offset();
    const std::size_t bps = pnm.maxval > 255 ? 2 : 1;
    if (bytes.size() < offset + count * bps) header.fail("truncated raster");
    for (std::size_t i = 0; i < count; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset + i * bps);
      pnm.samples[i] = bps == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      pnm.samples[i] = static_cast<std::uint16_t>(header.number());
    }
  }
  for (std::uint16_t s : pnm.samples) {
    if (s > pnm.maxval) header.fail("sample exceeds maxval");
  }
  return pnm;
}

std::string pnm_header(const char* magic, Eigen::Index w, Eigen::Index h, int maxval) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) +
         "\n" + std::to_string(maxval) + "\n";
}

std::uint8_t to_byte(std::uint16_t v, int maxval) {
  if (maxval == 255) return static_cast<std::uint8_t>(v);
  return static_cast<std::uint8_t>((static_cast<std::uint32_t>(v) * 255 + maxval / 2) /
                                   static_cast<std::uint32_t>(maxval));
}

void png_fail(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

void png_quiet(png_structp, png_const_charp) {}

RgbImage decode_png(const fs::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"),
                                                       &std::fclose);
  if (!file) throw ParseError(path.string() + ": cannot open");
  std::string error = "corrupt PNG";
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, &png_fail, &png_quiet);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": libpng initialisation failed");
  }
  RgbImage image;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  image = RgbImage(width, height);
  row.resize(png_get_rowbytes(png, info));
  const int passes = png_set_interlace_handling(png);
  for (int pass = 0; pass < passes; ++pass) {
    for (int y = 0; y < height; ++y) {
      if (pass > 0) {
        for (int x = 0; x < width; ++x) {
          for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(3 * x + c)] = image.channels[c](y, x);
        }
      }
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < width; ++x) {
        image.set(x, y, row[static_cast<std::size_t>(3 * x)],
                  row[static_cast<std::size_t>(3 * x + 1)],
                  row[static_cast<std::size_t>(3 * x + 2)]);
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base_file, const std::string& relative) {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_file.parent_path() / p;
}

PixelBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("bbox must be [x, y, w, h]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

RgbImage read_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8,
                                      reinterpret_cast<const char*>(kPngSig))) {
    return decode_png(path);
  }
  const Pnm pnm = decode_pnm(bytes, path);
  RgbImage image(pnm.width, pnm.height);
  std::size_t i = 0;
  for (int y = 0; y < pnm.height; ++y) {
    for (int x = 0; x < pnm.width; ++x) {
      if (pnm.channels == 1) {
        const auto v = to_byte(pnm.samples[i++], pnm.maxval);
        image.set(x, y, v, v, v);
      } else {
        const auto r = to_byte(pnm.samples[i], pnm.maxval);
        const auto g = to_byte(pnm.samples[i + 1], pnm.maxval);
        const auto b = to_byte(pnm.samples[i + 2], pnm.maxval);
        image.set(x, y, r, g, b);
        i += 3;
      }
    }
  }
  return image;
}

std::string encode_ppm(const RgbImage& image) {
  std::string out = pnm_header("P6", image.width(), image.height(), 255);
  out.reserve(out.size() + 3 * static_cast<std::size_t>(image.width() * image.height()));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (const auto& ch : image.channels) out.push_back(static_cast<char>(ch(y, x)));
    }
  }
  return out;
}

GrayImage read_pgm(const fs::path& path) {
  const Pnm pnm = decode_pnm(read_file(path), path);
  if (pnm.channels != 1) throw ParseError(path.string() + ": expected a PGM");
  GrayImage out;
  out.maxval = pnm.maxval;
  out.pixels = Eigen::Map<const Plane<std::uint16_t>>(pnm.samples.data(), pnm.height, pnm.width);
  return out;
}

std::string encode_pgm(const Plane<std::uint16_t>& pixels, int maxval) {
  if (maxval < 1 || maxval > 65535) throw InvalidArgument("PGM maxval out of range");
  std::string out = pnm_header("P5", pixels.cols(), pixels.rows(), maxval);
  for (Eigen::Index r = 0; r < pixels.rows(); ++r) {
    for (Eigen::Index c = 0; c < pixels.cols(); ++c) {
      const std::uint16_t v = std::min<std::uint16_t>(pixels(r, c), static_cast<std::uint16_t>(maxval));
      if (maxval > 255) out.push_back(static_cast<char>(v >> 8));
      out.push_back(static_cast<char>(v & 0xFF));
    }
  }
  return out;
}

std::string encode_mask(const Mask& mask) {
  return encode_pgm(mask.cast<std::uint16_t>() * std::uint16_t{255}, 255);
}

Mask read_mask(const fs::path& path) { return read_pgm(path).pixels != 0; }

UcmGrid read_ucm(const fs::path& path) {
  const GrayImage pgm = read_pgm(path);
  const auto rows = pgm.pixels.rows();
  const auto cols = pgm.pixels.cols();
  if (rows < 3 || cols < 3 || rows % 2 == 0 || cols % 2 == 0) {
    throw MalformedGrid(path.string() + ": UCM grid must be (2W+1)x(2H+1), got " +
                        std::to_string(cols) + "x" + std::to_string(rows));
  }
  UcmGrid grid;
  grid.width = static_cast<int>((cols - 1) / 2);
  grid.height = static_cast<int>((rows - 1) / 2);
  grid.strengths = pgm.pixels.cast<double>() / 65535.0;
  return grid;
}

std::string encode_ucm(const UcmGrid& grid) {
  const Plane<std::uint16_t> q =
      (grid.strengths.max(0.0).min(1.0) * 65535.0).round().cast<std::uint16_t>();
  return encode_pgm(q, 65535);
}

RegionTree read_hierarchy(const fs::path& manifest) {
  const json j = parse_json(manifest);
  try {
    const GrayImage labels = read_pgm(resolve(manifest, j.at("leaf_labels").get<std::string>()));
    std::vector<Merge> merges;
    for (const json& m : j.at("merges")) {
      merges.push_back({m.at("children").get<std::vector<NodeId>>(), m.at("strength").get<double>()});
    }
    return tree_from_merges(labels.pixels.cast<NodeId>(), merges);
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
}

std::string encode_hierarchy(std::string_view leaf_labels_path,
                             const std::vector<Merge>& merges) {
  json j;
  j["leaf_labels"] = std::string(leaf_labels_path);
  j["merges"] = json::array();
  for (const Merge& m : merges) {
    j["merges"].push_back({{"children", m.children}, {"strength", m.strength}});
  }
  return j.dump(1) + "\n";
}

std::vector<Detection> read_detections(const fs::path& path, double min_score) {
  std::istringstream in(read_file(path));
  std::vector<Detection> out;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Detection d{j.at("image_id").get<std::string>(), j.at("class").get<std::string>(),
                  j.at("score").get<double>(), box_from_json(j.at("bbox"))};
      if (!(d.score >= 0.0 && d.score <= 1.0)) throw ParseError("score outside [0, 1]");
      if (!d.box.valid()) throw ParseError("bbox needs positive width and height");
      if (d.score >= min_score) out.push_back(std::move(d));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string encode_detection(const Detection& d) {
  const json j = {{"image_id", d.image_id},
                  {"class", d.class_label},
                  {"score", d.score},
                  {"bbox", {d.box.x, d.box.y, d.box.w, d.box.h}}};
  return j.dump();
}

std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
  json list = json::array();
  for (const ManifestEntry& e : entries) {
    list.push_back({{"image_id", e.image_id},
                    {"class", e.class_label},
                    {"score", e.score},
                    {"node_id", e.node_id},
                    {"bbox", {e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h}},
                    {"mask", e.mask_path}});
  }
  return json{{"instances", list}}.dump(1) + "\n";
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const json j = parse_json(path);
  std::vector<ManifestEntry> out;
  try {
    for (const json& e : j.at("instances")) {
      out.push_back({e.at("image_id").get<std::string>(), e.at("class").get<std::string>(),
                     e.at("score").get<double>(), e.at("node_id").get<NodeId>(),
                     box_from_json(e.at("bbox")), e.at("mask").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<InstanceMask> read_predictions(const fs::path& manifest) {
  std::vector<InstanceMask> out;
  for (ManifestEntry& e : read_manifest(manifest)) {
    Mask mask = read_mask(resolve(manifest, e.mask_path));
    out.push_back({std::move(e.image_id), std::move(e.class_label), e.score, e.node_id,
                   std::move(mask), e.bbox});
  }
  return out;
}

std::vector<GroundTruthInstance> read_ground_truth(const fs::path& manifest) {
  const json j = parse_json(manifest);
  std::vector<GroundTruthInstance> out;
  try {
    for (const json& img : j.at("images")) {
      const auto image_id = img.at("image_id").get<std::string>();
      const GrayImage labels = read_pgm(resolve(manifest, img.at("labels").get<std::string>()));
      std::map<int, std::string> classes;
      for (const auto& [value, name] : img.at("classes").items()) {
        classes[std::stoi(value)] = name.get<std::string>();
      }
      for (const auto& [value, name] : classes) {
        if (value == 0) continue;
        Mask mask = labels.pixels == static_cast<std::uint16_t>(value);
        if (!mask.any()) {
          throw ParseError("instance label " + std::to_string(value) + " of image '" +
                           image_id + "' has no pixels");
        }
        out.push_back({image_id, name, std::move(mask)});
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  return out;
}

}  // namespace hshseg::io

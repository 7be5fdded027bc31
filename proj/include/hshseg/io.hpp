#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hshseg/eval.hpp"
#include "hshseg/hierarchy.hpp"
#include "hshseg/types.hpp"

namespace hshseg::io {

namespace fs = std::filesystem;

/// Reads PNG, binary or ASCII PPM, or PGM (grayscale is replicated).
/// Throws ParseError.
RgbImage read_image(const fs::path& path);
std::string encode_ppm(const RgbImage& image);

/// Single-channel PNM raster with its declared maxval.
struct GrayImage {
  Plane<std::uint16_t> pixels;
  int maxval = 255;
};

/// Reads P5 (8- or 16-bit big-endian) or P2 PGM. Throws ParseError.
GrayImage read_pgm(const fs::path& path);
std::string encode_pgm(const Plane<std::uint16_t>& pixels, int maxval);

/// 0/255 PGM of a mask, and its inverse (any nonzero sample is set).
std::string encode_mask(const Mask& mask);
Mask read_mask(const fs::path& path);

/// UCM as a 16-bit PGM: sample v maps to strength v / 65535. The file is the
/// (2W+1)x(2H+1) doubled-resolution grid. Throws ParseError or MalformedGrid.
UcmGrid read_ucm(const fs::path& path);
std::string encode_ucm(const UcmGrid& grid);

/// Merge-list hierarchy manifest: {"leaf_labels": "<16-bit PGM path>",
/// "merges": [{"children": [ids], "strength": s}, ...]}. Relative paths
/// resolve against the manifest's directory. Throws ParseError or
/// InvalidMergeList.
RegionTree read_hierarchy(const fs::path& manifest);
std::string encode_hierarchy(std::string_view leaf_labels_path,
                             const std::vector<Merge>& merges);

/// JSON Lines detections: {"image_id", "class", "score", "bbox": [x, y, w, h]}.
/// Entries scoring below `min_score` are dropped. Throws ParseError.
std::vector<Detection> read_detections(const fs::path& path, double min_score);
std::string encode_detection(const Detection& det);

/// Prediction manifest as written by `segment`:
/// {"instances": [{"image_id", "class", "score", "node_id", "bbox", "mask"}]}.
struct ManifestEntry {
  std::string image_id;
  std::string class_label;
  double score = 0.0;
  NodeId node_id = -1;
  PixelBox bbox;
  std::string mask_path;  // relative to the manifest directory
};
std::string encode_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const fs::path& path);
/// Loads every mask referenced by a prediction manifest.
std::vector<InstanceMask> read_predictions(const fs::path& manifest);

/// Ground-truth manifest: {"images": [{"image_id", "labels": "<8-bit PGM>",
/// "classes": {"<label value>": "<class name>"}}]}. Label 0 is background;
/// label values absent from "classes" are ignored. Throws ParseError.
std::vector<GroundTruthInstance> read_ground_truth(const fs::path& manifest);

/// Writes through a temporary sibling and renames it into place.
void atomic_write(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

}  // namespace hshseg::io

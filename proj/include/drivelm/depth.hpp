#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drivelm/camera.hpp"
#include "drivelm/dataset.hpp"

namespace drivelm {

class DepthError : public Error {
 public:
  using Error::Error;
};

/// Per-camera normalized inverse depth (1 = nearest), row-major.
class DepthRaster {
 public:
  DepthRaster(std::size_t width, std::size_t height, std::vector<float> values,
              Camera camera = Camera::kFront, std::string frame_id = {});

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  Camera camera() const { return camera_; }
  const std::string& frame_id() const { return frame_id_; }
  std::span<const float> values() const { return values_; }

  float at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<float> values_;
  Camera camera_;
  std::string frame_id_;
};

/// Reads little-endian float32 pixels plus a JSON sidecar
/// {width, height, camera, frame_id}.
DepthRaster load_depth_raster(const std::filesystem::path& binary_path,
                              const std::filesystem::path& sidecar_path);

/// Writes the same format back; used by fixtures and tooling.
void save_depth_raster(const DepthRaster& raster, const std::filesystem::path& binary_path,
                       const std::filesystem::path& sidecar_path);

/// Half-open integer pixel rectangle.
struct PixelRegion {
  std::size_t x_begin = 0;
  std::size_t y_begin = 0;
  std::size_t x_end = 0;  // exclusive
  std::size_t y_end = 0;  // exclusive

  std::size_t pixel_count() const { return (x_end - x_begin) * (y_end - y_begin); }
};

struct DepthSample {
  double value = 0.0;
  std::size_t pixel_count = 0;
};

/// Nearest-rank percentile: element ceil(p/100 * n) - 1 of the sorted values
/// (index 0 when p = 0). Requires a non-empty input.
double nearest_rank_percentile(std::vector<float> values, double percentile);

/// Region covered by a bbox: floor(min)/ceil(max), clipped to the raster.
PixelRegion bbox_region(const DepthRaster& raster, const BoundingBox& bbox);

/// size x size window around (round(x), round(y)), clipped to the raster.
/// The center must lie in the continuous image domain [0,width] x [0,height];
/// a rounded center on the far edge snaps to the last pixel.
PixelRegion window_region(const DepthRaster& raster, double center_x, double center_y,
                          std::size_t size);

DepthSample bbox_depth_percentile(const DepthRaster& raster, const BoundingBox& bbox,
                                  double percentile = 75.0);
DepthSample window_depth(const DepthRaster& raster, double center_x, double center_y,
                         std::size_t size = 11, double percentile = 75.0);

struct DepthBin {
  double threshold = 0.0;
  std::string label;
};

/// Strictly decreasing thresholds; the first bin whose threshold <= value
/// wins. The last threshold must be 0 so every value in [0,1] gets a label.
class DepthBins {
 public:
  explicit DepthBins(std::vector<DepthBin> bins);
  static DepthBins defaults();

  const std::vector<DepthBin>& bins() const { return bins_; }

 private:
  std::vector<DepthBin> bins_;
};

std::string depth_to_text(double value, const DepthBins& bins = DepthBins::defaults());

struct ObjectDepth {
  std::string scene_id;
  std::string frame_id;
  std::string object_id;
  double representative = 0.0;
  std::string label;
  std::size_t pixel_count = 0;
};

struct DepthConfig {
  double percentile = 75.0;
  std::size_t window_size = 11;
  DepthBins bins = DepthBins::defaults();
};

/// Representative depth per (frame_id, object_id).
class DepthIndex {
 public:
  void add(ObjectDepth entry);
  const ObjectDepth* find(const std::string& frame_id, const std::string& object_id) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<ObjectDepth> entries() const;

 private:
  std::map<std::pair<std::string, std::string>, ObjectDepth> entries_;
};

struct DepthIndexReport {
  std::size_t objects = 0;
  std::vector<std::string> skipped;
};

/// Raster location for one camera of one frame:
/// <depth_dir>/<frame_id>/<CAMERA>.bin and .json.
std::pair<std::filesystem::path, std::filesystem::path> raster_paths(
    const std::filesystem::path& depth_dir, const std::string& frame_id, Camera camera);

/// Train frames aggregate over each key object's bbox; validation frames use
/// the window around every key-object and question tag center.
DepthIndex build_depth_index(const Corpus& corpus, const std::filesystem::path& depth_dir,
                             const DepthConfig& config, DepthIndexReport* report = nullptr);

/// JSON Lines {scene_id, frame_id, object_id, representative, label, pixel_count},
/// sorted by (frame_id, object_id).
void write_depth_index(const DepthIndex& index, const std::filesystem::path& path);
DepthIndex read_depth_index(const std::filesystem::path& path);

}  // namespace drivelm

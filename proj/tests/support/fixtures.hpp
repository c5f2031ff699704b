#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "drivelm/dataset.hpp"
#include "drivelm/depth.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return DRIVELM_TEST_SOURCE_DIR; }
inline std::filesystem::path mini_dir() { return source_dir() / "fixtures" / "mini"; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& label) {
    std::random_device device;
    path_ = std::filesystem::temp_directory_path() /
            ("drivelm-" + label + "-" + std::to_string(device()) + std::to_string(device()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ignored;
    std::filesystem::remove_all(path_, ignored);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Deterministic full-size raster: a smooth vertical ramp plus a per-camera offset.
inline drivelm::DepthRaster synthetic_raster(drivelm::Camera camera, const std::string& frame_id) {
  const std::size_t w = drivelm::kImageWidth;
  const std::size_t h = drivelm::kImageHeight;
  std::vector<float> values(w * h);
  const auto offset = static_cast<std::size_t>(camera);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t k = (y * 7 + x * 3 + offset * 131) % 1000;
      values[y * w + x] = static_cast<float>(k) / 999.0f;
    }
  }
  return drivelm::DepthRaster(w, h, std::move(values), camera, frame_id);
}

// Writes rasters for every camera a tag of the corpus points at.
inline void write_rasters(const drivelm::Corpus& corpus, const std::filesystem::path& depth_dir) {
  for (const auto& frame : corpus.frames) {
    std::set<drivelm::Camera> cameras;
    for (const auto& [id, info] : frame.key_objects) cameras.insert(info.tag.camera);
    for (const auto& qa : frame.qas) {
      for (const auto& tag : drivelm::extract_tags(qa.question)) cameras.insert(tag.camera);
    }
    for (auto camera : cameras) {
      auto [bin, json] = drivelm::raster_paths(depth_dir, frame.frame_id, camera);
      std::filesystem::create_directories(bin.parent_path());
      drivelm::save_depth_raster(synthetic_raster(camera, frame.frame_id), bin, json);
    }
  }
}

}  // namespace fixtures

#include "drivelm/depth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace drivelm {
namespace {

float from_little_endian(const unsigned char* bytes) {
  std::uint32_t raw = 0;
  for (int i = 3; i >= 0; --i) raw = (raw << 8) | bytes[i];
  float value;
  std::memcpy(&value, &raw, sizeof(value));
  return value;
}

void to_little_endian(float value, unsigned char* bytes) {
  std::uint32_t raw;
  std::memcpy(&raw, &value, sizeof(raw));
  for (int i = 0; i < 4; ++i) {
    bytes[i] = static_cast<unsigned char>(raw & 0xffu);
    raw >>= 8;
  }
}

std::vector<float> collect(const DepthRaster& raster, const PixelRegion& region) {
  std::vector<float> values;
  values.reserve(region.pixel_count());
  for (std::size_t y = region.y_begin; y < region.y_end; ++y) {
    for (std::size_t x = region.x_begin; x < region.x_end; ++x) values.push_back(raster.at(x, y));
  }
  return values;
}

std::size_t clip_index(double value, std::size_t limit) {
  if (value <= 0.0) return 0;
  if (value >= static_cast<double>(limit)) return limit;
  return static_cast<std::size_t>(value);
}

}  // namespace

DepthRaster::DepthRaster(std::size_t width, std::size_t height, std::vector<float> values,
                         Camera camera, std::string frame_id)
    : width_(width),
      height_(height),
      values_(std::move(values)),
      camera_(camera),
      frame_id_(std::move(frame_id)) {
  if (width_ == 0 || height_ == 0) throw DepthError("depth raster must be non-empty");
  if (values_.size() != width_ * height_) {
    throw DepthError("depth raster size mismatch: expected " + std::to_string(width_ * height_) +
                     " values, got " + std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const float v = values_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw DepthError("depth value out of range [0,1] at pixel index " + std::to_string(i));
    }
  }
}

DepthRaster load_depth_raster(const std::filesystem::path& binary_path,
                              const std::filesystem::path& sidecar_path) {
  std::ifstream sidecar_in(sidecar_path);
  if (!sidecar_in) throw DepthError("cannot open depth sidecar " + sidecar_path.string());
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(sidecar_in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DepthError("depth sidecar " + sidecar_path.string() + " is not valid JSON: " + e.what());
  }
  for (const char* field : {"width", "height", "camera", "frame_id"}) {
    if (!sidecar.contains(field)) {
      throw DepthError("depth sidecar " + sidecar_path.string() + " missing field '" + field + "'");
    }
  }
  if (!sidecar["width"].is_number_unsigned() || !sidecar["height"].is_number_unsigned()) {
    throw DepthError("depth sidecar width/height must be non-negative integers");
  }
  const auto width = sidecar["width"].get<std::size_t>();
  const auto height = sidecar["height"].get<std::size_t>();
  const auto camera_text = sidecar["camera"].get<std::string>();
  auto camera = camera_from_name(camera_text);
  if (!camera) throw DepthError("depth sidecar names unknown camera '" + camera_text + "'");

  std::ifstream in(binary_path, std::ios::binary);
  if (!in) throw DepthError("cannot open depth raster " + binary_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0 || bytes.size() / 4 != width * height) {
    throw DepthError("depth raster " + binary_path.string() + " size mismatch: sidecar claims " +
                     std::to_string(width) + "x" + std::to_string(height) + ", file holds " +
                     std::to_string(bytes.size()) + " bytes");
  }
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = from_little_endian(&bytes[4 * i]);
  return DepthRaster(width, height, std::move(values), *camera,
                     sidecar["frame_id"].get<std::string>());
}

void save_depth_raster(const DepthRaster& raster, const std::filesystem::path& binary_path,
                       const std::filesystem::path& sidecar_path) {
  std::vector<unsigned char> bytes(raster.values().size() * 4);
  for (std::size_t i = 0; i < raster.values().size(); ++i) {
    to_little_endian(raster.values()[i], &bytes[4 * i]);
  }
  std::ofstream out(binary_path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DepthError("cannot write depth raster " + binary_path.string());

  nlohmann::json sidecar = {{"width", raster.width()},
                            {"height", raster.height()},
                            {"camera", camera_name(raster.camera())},
                            {"frame_id", raster.frame_id()}};
  std::ofstream side(sidecar_path, std::ios::trunc);
  side << sidecar.dump() << "\n";
  if (!side) throw DepthError("cannot write depth sidecar " + sidecar_path.string());
}

double nearest_rank_percentile(std::vector<float> values, double percentile) {
  if (values.empty()) throw DepthError("percentile of an empty pixel set");
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw DepthError("percentile must lie in [0,100]");
  }
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(n)));
  const std::size_t index = rank == 0 ? 0 : std::min(rank, n) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(index), values.end());
  return values[index];
}

PixelRegion bbox_region(const DepthRaster& raster, const BoundingBox& bbox) {
  PixelRegion region;
  region.x_begin = clip_index(std::floor(bbox.x_min), raster.width());
  region.y_begin = clip_index(std::floor(bbox.y_min), raster.height());
  region.x_end = clip_index(std::ceil(bbox.x_max), raster.width());
  region.y_end = clip_index(std::ceil(bbox.y_max), raster.height());
  if (region.x_end < region.x_begin) region.x_end = region.x_begin;
  if (region.y_end < region.y_begin) region.y_end = region.y_begin;
  return region;
}

PixelRegion window_region(const DepthRaster& raster, double center_x, double center_y,
                          std::size_t size) {
  if (size == 0 || size % 2 == 0) throw DepthError("window size must be a positive odd number");
  if (!(center_x >= 0.0 && center_x <= static_cast<double>(raster.width())) ||
      !(center_y >= 0.0 && center_y <= static_cast<double>(raster.height()))) {
    throw DepthError("window center (" + std::to_string(center_x) + "," +
                     std::to_string(center_y) + ") lies outside the raster");
  }
  const auto cx = std::min<long long>(std::llround(center_x), static_cast<long long>(raster.width()) - 1);
  const auto cy = std::min<long long>(std::llround(center_y), static_cast<long long>(raster.height()) - 1);
  const auto half = static_cast<long long>(size / 2);
  PixelRegion region;
  region.x_begin = static_cast<std::size_t>(std::max(0LL, cx - half));
  region.y_begin = static_cast<std::size_t>(std::max(0LL, cy - half));
  region.x_end = static_cast<std::size_t>(std::min(static_cast<long long>(raster.width()), cx + half + 1));
  region.y_end = static_cast<std::size_t>(std::min(static_cast<long long>(raster.height()), cy + half + 1));
  return region;
}

DepthSample bbox_depth_percentile(const DepthRaster& raster, const BoundingBox& bbox,
                                  double percentile) {
  const PixelRegion region = bbox_region(raster, bbox);
  if (region.pixel_count() == 0) throw DepthError("bbox does not intersect the raster");
  return {nearest_rank_percentile(collect(raster, region), percentile), region.pixel_count()};
}

DepthSample window_depth(const DepthRaster& raster, double center_x, double center_y,
                         std::size_t size, double percentile) {
  const PixelRegion region = window_region(raster, center_x, center_y, size);
  return {nearest_rank_percentile(collect(raster, region), percentile), region.pixel_count()};
}

DepthBins::DepthBins(std::vector<DepthBin> bins) : bins_(std::move(bins)) {
  if (bins_.empty()) throw DepthError("depth bins must not be empty");
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    if (bins_[i].label.empty()) throw DepthError("depth bin label must not be empty");
    if (i > 0 && !(bins_[i].threshold < bins_[i - 1].threshold)) {
      throw DepthError("depth bin thresholds must be strictly decreasing");
    }
  }
  if (bins_.back().threshold != 0.0) throw DepthError("last depth bin threshold must be 0");
  if (bins_.front().threshold > 1.0) throw DepthError("depth bin thresholds must lie in [0,1]");
}

DepthBins DepthBins::defaults() {
  return DepthBins({{0.66, "very close"}, {0.33, "close"}, {0.0, "far"}});
}

std::string depth_to_text(double value, const DepthBins& bins) {
  if (!(value >= 0.0 && value <= 1.0)) throw DepthError("depth value out of range [0,1]");
  for (const auto& bin : bins.bins()) {
    if (value >= bin.threshold) return bin.label;
  }
  return bins.bins().back().label;
}

void DepthIndex::add(ObjectDepth entry) {
  auto key = std::make_pair(entry.frame_id, entry.object_id);
  entries_.insert_or_assign(std::move(key), std::move(entry));
}

const ObjectDepth* DepthIndex::find(const std::string& frame_id, const std::string& object_id) const {
  auto it = entries_.find({frame_id, object_id});
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<ObjectDepth> DepthIndex::entries() const {
  std::vector<ObjectDepth> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.push_back(entry);
  return out;
}

std::pair<std::filesystem::path, std::filesystem::path> raster_paths(
    const std::filesystem::path& depth_dir, const std::string& frame_id, Camera camera) {
  const std::string stem(camera_name(camera));
  return {depth_dir / frame_id / (stem + ".bin"), depth_dir / frame_id / (stem + ".json")};
}

DepthIndex build_depth_index(const Corpus& corpus, const std::filesystem::path& depth_dir,
                             const DepthConfig& config, DepthIndexReport* report) {
  DepthIndex index;
  DepthIndexReport local;
  auto skip = [&](std::string message) {
    spdlog::warn("depth index: {}", message);
    local.skipped.push_back(std::move(message));
  };

  for (const auto& frame : corpus.frames) {
    std::map<Camera, std::optional<DepthRaster>> rasters;
    auto raster_for = [&](Camera camera) -> const DepthRaster* {
      auto it = rasters.find(camera);
      if (it == rasters.end()) {
        std::optional<DepthRaster> loaded;
        auto [bin, json] = raster_paths(depth_dir, frame.frame_id, camera);
        try {
          loaded = load_depth_raster(bin, json);
        } catch (const DepthError& e) {
          skip("frame " + frame.frame_id + " " + std::string(camera_name(camera)) + ": " + e.what());
        }
        it = rasters.emplace(camera, std::move(loaded)).first;
      }
      return it->second ? &*it->second : nullptr;
    };
    auto record = [&](const std::string& object_id, const DepthSample& sample) {
      index.add({frame.scene_id, frame.frame_id, object_id, sample.value,
                 depth_to_text(sample.value, config.bins), sample.pixel_count});
      ++local.objects;
    };

    if (corpus.split == Split::kTrain) {
      for (const auto& [id, info] : frame.key_objects) {
        const DepthRaster* raster = raster_for(info.tag.camera);
        if (!raster) continue;
        try {
          record(id, bbox_depth_percentile(*raster, info.bbox, config.percentile));
        } catch (const DepthError& e) {
          skip("frame " + frame.frame_id + " object " + id + ": " + e.what());
        }
      }
      continue;
    }

    std::map<std::string, KeyObjectTag> tags;
    for (const auto& [id, info] : frame.key_objects) tags.emplace(id, info.tag);
    for (const auto& qa : frame.qas) {
      for (auto& tag : extract_tags(qa.question)) tags.emplace(tag.object_id, tag);
    }
    for (const auto& [id, tag] : tags) {
      const DepthRaster* raster = raster_for(tag.camera);
      if (!raster) continue;
      try {
        record(id, window_depth(*raster, tag.center_x, tag.center_y, config.window_size,
                                config.percentile));
      } catch (const DepthError& e) {
        skip("frame " + frame.frame_id + " object " + id + ": " + e.what());
      }
    }
  }
  if (report) *report = std::move(local);
  return index;
}

void write_depth_index(const DepthIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DepthError("cannot write depth index " + path.string());
  for (const auto& entry : index.entries()) {
    nlohmann::json line = {{"scene_id", entry.scene_id},
                           {"frame_id", entry.frame_id},
                           {"object_id", entry.object_id},
                           {"representative", entry.representative},
                           {"label", entry.label},
                           {"pixel_count", entry.pixel_count}};
    out << line.dump() << "\n";
  }
}

DepthIndex read_depth_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DepthError("cannot open depth index " + path.string());
  DepthIndex index;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      index.add({j.at("scene_id").get<std::string>(), j.at("frame_id").get<std::string>(),
                 j.at("object_id").get<std::string>(), j.at("representative").get<double>(),
                 j.at("label").get<std::string>(), j.at("pixel_count").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw DepthError("depth index " + path.string() + " line " + std::to_string(number) + ": " +
                       e.what());
    }
  }
  return index;
}

}  // namespace drivelm

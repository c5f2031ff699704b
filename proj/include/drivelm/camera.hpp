#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drivelm {

// Resolution of every nuScenes camera image in the corpus.
inline constexpr double kImageWidth = 1600.0;
inline constexpr double kImageHeight = 900.0;

enum class Camera {
  kFront,
  kFrontLeft,
  kFrontRight,
  kBack,
  kBackLeft,
  kBackRight,
};

inline constexpr std::array<Camera, 6> kAllCameras = {
    Camera::kFront, Camera::kFrontLeft, Camera::kFrontRight,
    Camera::kBack,  Camera::kBackLeft,  Camera::kBackRight,
};

std::string_view camera_name(Camera camera);
std::optional<Camera> camera_from_name(std::string_view name);

/// Base for every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drivelm

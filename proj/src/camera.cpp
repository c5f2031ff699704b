#include "drivelm/camera.hpp"

namespace drivelm {

std::string_view camera_name(Camera camera) {
  switch (camera) {
    case Camera::kFront: return "CAM_FRONT";
    case Camera::kFrontLeft: return "CAM_FRONT_LEFT";
    case Camera::kFrontRight: return "CAM_FRONT_RIGHT";
    case Camera::kBack: return "CAM_BACK";
    case Camera::kBackLeft: return "CAM_BACK_LEFT";
    case Camera::kBackRight: return "CAM_BACK_RIGHT";
  }
  return "CAM_FRONT";
}

std::optional<Camera> camera_from_name(std::string_view name) {
  for (Camera camera : kAllCameras) {
    if (camera_name(camera) == name) return camera;
  }
  return std::nullopt;
}

}  // namespace drivelm

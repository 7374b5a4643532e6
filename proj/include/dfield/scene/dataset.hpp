#pragma once

#include <string>
#include <vector>

#include "dfield/scene/camera.hpp"
#include "dfield/scene/image.hpp"
#include "dfield/scene/scene.hpp"

namespace dfield {

struct View {
  Image image;
  Mask mask;
  Camera camera;
};

struct MultiViewSample {
  std::vector<View> views;
  std::string scene_id;
  Vec2 depth_bounds = Vec2(0.0, 1.0);  // (t_n, t_f)
  Aabb bounds;                         // scene bounds, used to normalize coordinates

  int width() const { return views.empty() ? 0 : views.front().image.width; }
  int height() const { return views.empty() ? 0 : views.front().image.height; }
};

// `count` cameras evenly spaced on a horizontal circle of `radius` around the
// bounds center, starting at `offset_deg`, raised by `height` along +z, all
// looking at the center. The field of view frames every solid with margin.
std::vector<Camera> ring_cameras(const Scene& scene, int count, int width, int height_px,
                                 double radius, double offset_deg = 0.0, double height = 0.0);

// Smallest entry and largest exit distance of the camera's pixel rays through
// `box`; nullopt when no pixel ray meets it.
std::optional<Vec2> depth_bounds_for(const Camera& camera, const Aabb& box);

// Throws ValidationError for fewer than 2 views or a ring that puts cameras
// inside the scene bounds.
MultiViewSample generate_dataset(const Scene& scene, int n_views, int width, int height,
                                 double ring_radius);

// Builds a sample from explicit cameras (all must share one resolution).
MultiViewSample render_views(const Scene& scene, const std::vector<Camera>& cameras);

}  // namespace dfield

#include "dfield/scene/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfield/errors.hpp"

namespace dfield {

std::vector<Camera> ring_cameras(const Scene& scene, int count, int width, int height_px,
                                 double radius, double offset_deg, double height) {
  if (count < 1) throw ValidationError("camera ring needs at least one camera");
  if (!(radius > 0.0)) throw ValidationError("ring radius must be positive");
  const Vec3 c = scene.bounds().center();
  const double r_scene = scene.bounding_radius_about(c);
  std::vector<Camera> cams;
  for (int k = 0; k < count; ++k) {
    const double a = (offset_deg + 360.0 * k / count) * M_PI / 180.0;
    const Vec3 eye = c + Vec3(radius * std::cos(a), radius * std::sin(a), height);
    if (scene.bounds().contains(eye)) {
      throw ValidationError("ring radius places a camera inside the scene bounds");
    }
    const double dist = (eye - c).norm();
    double half_fov = 30.0;
    if (r_scene < dist) half_fov = std::min(1.05 * std::asin(r_scene / dist) * 180.0 / M_PI, 80.0);
    cams.push_back(Camera::look_at(eye, c, Vec3::UnitZ(), 2.0 * half_fov, width, height_px));
  }
  return cams;
}

std::optional<Vec2> depth_bounds_for(const Camera& camera, const Aabb& box) {
  double tn = std::numeric_limits<double>::infinity();
  double tf = -tn;
  const Vec3 o = camera.center();
  for (int y = 0; y < camera.height(); ++y) {
    for (int x = 0; x < camera.width(); ++x) {
      const Vec3 d = camera.direction(camera.pixel_center(x, y));
      if (auto iv = box.ray_interval(o, d); iv && (*iv)[1] > 0.0) {
        tn = std::min(tn, std::max((*iv)[0], 0.0));
        tf = std::max(tf, (*iv)[1]);
      }
    }
  }
  if (!(tn < tf)) return std::nullopt;
  return Vec2(tn, tf);
}

MultiViewSample render_views(const Scene& scene, const std::vector<Camera>& cameras) {
  if (cameras.empty()) throw ValidationError("no cameras given");
  MultiViewSample out;
  out.scene_id = scene.id();
  out.bounds = scene.bounds();
  double tn = std::numeric_limits<double>::infinity();
  double tf = -tn;
  for (const auto& cam : cameras) {
    if (cam.width() != cameras.front().width() || cam.height() != cameras.front().height()) {
      throw ValidationError("all views must share one resolution");
    }
    auto gt = render_ground_truth(scene, cam);
    out.views.push_back(View{std::move(gt.image), std::move(gt.mask), cam});
    if (auto iv = depth_bounds_for(cam, scene.bounds())) {
      tn = std::min(tn, (*iv)[0]);
      tf = std::max(tf, (*iv)[1]);
    }
  }
  if (!(tn < tf)) throw ValidationError("no camera sees the scene bounds");
  out.depth_bounds = Vec2(tn, tf);
  return out;
}

MultiViewSample generate_dataset(const Scene& scene, int n_views, int width, int height,
                                 double ring_radius) {
  if (n_views < 2) throw ValidationError("a dataset needs at least 2 views");
  if (width <= 0 || height <= 0) throw ValidationError("resolution must be positive");
  return render_views(scene, ring_cameras(scene, n_views, width, height, ring_radius));
}

}  // namespace dfield

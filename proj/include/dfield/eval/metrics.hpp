#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dfield/render/renderer.hpp"
#include "dfield/scene/image.hpp"
#include "dfield/scene/scene.hpp"

namespace dfield {

// Closest-point queries against a triangle mesh through an AABB tree.
class MeshDistance {
 public:
  explicit MeshDistance(const TriangleMesh& mesh);
  ~MeshDistance();
  MeshDistance(MeshDistance&&) noexcept;
  MeshDistance& operator=(MeshDistance&&) noexcept;

  double distance(const Vec3& p) const;
  Vec3 closest_point(const Vec3& p) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Area-weighted uniform samples on the mesh surface. ValidationError when the
// mesh has no triangle of positive area.
std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

inline constexpr std::size_t kMetricSamples = 10000;
inline constexpr std::uint64_t kMetricSeed = 0;

// Mean of the two directed mean surface distances. Both meshes must be
// non-empty and n_samples >= 1000 (ValidationError otherwise).
double chamfer_distance(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_samples = kMetricSamples,
                        std::uint64_t seed = kMetricSeed);

// Mean distance from samples on `pred` to the surface of `gt`.
double point_to_surface(const TriangleMesh& pred, const TriangleMesh& gt, std::size_t n_samples = kMetricSamples,
                        std::uint64_t seed = kMetricSeed);

// Chamfer and point-to-surface against the analytic boundary of a scene:
// mesh samples are measured with the scene's distance function, exact
// boundary samples with the mesh distance.
struct SurfaceErrors {
  double chamfer = 0.0;
  double p2s = 0.0;
};
SurfaceErrors surface_errors_to_scene(const TriangleMesh& pred, const Scene& scene,
                                      std::size_t n_samples = kMetricSamples, std::uint64_t seed = kMetricSeed);

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over [0, 1] images, restricted to mask pixels when a mask
// is given. Identical inputs give kPsnrCap.
double psnr(const Image& a, const Image& b, const Mask* mask = nullptr);

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) over valid
// window positions, averaged over channels. Images need both sides >= 11.
double ssim(const Image& a, const Image& b);

// Intersection over union of two silhouettes; 1 when both are empty.
double silhouette_iou(const Mask& a, const Mask& b);

struct MetricReport {
  std::string scene_id;
  std::optional<double> chamfer;
  std::optional<double> p2s;
  std::vector<double> psnr;  // per view
  std::vector<double> ssim;
  bool masked_psnr = true;
  std::string config_hash;
  std::string created;  // ISO-8601 UTC
  std::vector<std::string> errors;

  double mean_psnr() const;
  double mean_ssim() const;
};

std::string report_to_json(const MetricReport& r);
MetricReport report_from_json(const std::string& text);
std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace dfield

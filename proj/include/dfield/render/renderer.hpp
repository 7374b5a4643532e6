#pragma once

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "dfield/ad/ops.hpp"
#include "dfield/core/model.hpp"
#include "dfield/scene/camera.hpp"
#include "dfield/scene/image.hpp"

namespace dfield {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;

  Vec3 at(double t) const { return origin + t * dir; }
};

// Ray through the center of pixel (i, j).
Ray pixel_ray(const Camera& camera, int i, int j, const Vec2& bounds);

enum class SampleKind { Uniform, SurfaceGuided };

struct SampleSet {
  std::vector<double> ts;  // strictly increasing
  SampleKind kind = SampleKind::Uniform;
  double lo = 0.0;  // interval covered by the cells
  double hi = 1.0;
  double delta = 0.0;  // half-width of a surface-guided interval
};

// Midpoints of n equal cells over [t_near, t_far]; with `rng` each sample is
// drawn uniformly inside its cell instead.
SampleSet uniform_samples(const Ray& ray, int n_s, std::mt19937_64* rng = nullptr);

// n_r cell midpoints over [t* - delta, t* + delta] clipped to the ray bounds.
SampleSet surface_guided_samples(double t_star, double delta, int n_r, const Ray& ray);

// Maps points to occupancies in [0, 1].
using SurfaceFn = std::function<std::vector<double>(const std::vector<Vec3>&)>;

// First coarse sample with s >= 0.5, refined by `bisection_steps` halvings of
// the bracket formed with its predecessor (t_near for the first sample).
std::optional<double> find_surface_intersection(const Ray& ray, const SurfaceFn& surface, int n_s,
                                                int bisection_steps = 8);

// Batched form over many rays; coarse samples may be jittered.
std::vector<std::optional<double>> find_surface_intersections(const std::vector<Ray>& rays,
                                                              const SurfaceFn& surface, int n_s,
                                                              int bisection_steps = 8,
                                                              std::mt19937_64* rng = nullptr);

struct RenderResult {
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  std::optional<double> surface_t;
  std::vector<double> weights;
};

// Spacing of each sample: next minus current, the last one the mean of the
// others (the full cell width for a single sample).
std::vector<double> sample_spacing(const SampleSet& samples);

RenderResult integrate_radiance(const SampleSet& samples, const std::vector<double>& sigmas,
                                const std::vector<Vec3>& colors,
                                const Vec3& background = Vec3::Zero());

// Differentiable quadrature for R rays with N samples each. sigma is (R*N) x 1
// and color (R*N) x 3 with sample k of ray r at row r*N + k; deltas is R x N.
template <class T>
struct RadianceBatch {
  ad::Var<T> color;    // R x 3
  ad::Var<T> opacity;  // R x 1
};

template <class T>
RadianceBatch<T> integrate_radiance(const ad::Var<T>& sigma, const ad::Var<T>& color,
                                    const ad::Matrix<T>& deltas, const Vec3& background = Vec3::Zero());

struct RenderOptions {
  int n_s = 64;
  int n_r = 16;
  double delta_fraction = 0.05;  // of the bounds diagonal
  int chunk_rays = 256;
  Vec3 background = Vec3::Zero();
  std::vector<int> input_views;  // empty: all views
};

struct RenderedImage {
  Image image;
  std::vector<double> opacity;
  Mask hit;  // rays where a surface was found
};

template <class T>
struct RayBatch {
  ad::Var<T> color;    // R x 3
  ad::Var<T> opacity;  // R x 1
  std::vector<char> hit;
};

// Differentiable rendering of `rays` conditioned on `cond`: coarse surface
// search, then quadrature over the surface-guided interval. Rays that miss
// `cond.bounds` render the background. A ray without a crossing integrates
// over fresh coarse samples when fallback[r] is set, else it renders the
// background. With `rng` the coarse samples are jittered.
template <class T>
RayBatch<T> render_rays(const DoubleField<T>& model, const Conditioning<T>& cond, const std::vector<Ray>& rays,
                        const std::vector<char>& fallback, const RenderOptions& opts, std::mt19937_64* rng = nullptr);

template <class T>
RenderedImage render_image(const DoubleField<T>& model, const MultiViewSample& sample,
                           const Camera& camera, const RenderOptions& options = {});

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  bool empty() const { return faces.empty(); }
};

struct MeshResult {
  TriangleMesh mesh;
  bool empty = true;
};

// Marching cubes on grid_res^3 nodes spanning `bounds`, with the outside of
// the grid treated as empty so that closed surfaces result. Triangles wind
// counter-clockwise seen from the low-occupancy side.
MeshResult extract_mesh(const SurfaceFn& surface, const Aabb& bounds, int grid_res, double iso = 0.5);

template <class T>
MeshResult extract_mesh(const DoubleField<T>& model, const MultiViewSample& sample, int grid_res,
                        double iso = 0.5);

// Batched occupancy of the model conditioned on the given views (all if empty).
template <class T>
SurfaceFn model_surface(const DoubleField<T>& model, const Conditioning<T>& cond);

}  // namespace dfield

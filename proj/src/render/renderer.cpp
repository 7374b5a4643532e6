#include "dfield/render/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dfield/errors.hpp"

namespace dfield {

Ray pixel_ray(const Camera& camera, int i, int j, const Vec2& bounds) {
  return Ray{camera.center(), camera.direction(camera.pixel_center(i, j)), bounds[0], bounds[1]};
}

SampleSet uniform_samples(const Ray& ray, int n_s, std::mt19937_64* rng) {
  if (n_s < 1) throw ValidationError("uniform sampling needs at least one sample");
  SampleSet s;
  s.kind = SampleKind::Uniform;
  s.lo = ray.t_near;
  s.hi = ray.t_far;
  s.ts.resize(n_s);
  const double step = (ray.t_far - ray.t_near) / n_s;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n_s; ++i) s.ts[i] = ray.t_near + (i + (rng ? u(*rng) : 0.5)) * step;
  return s;
}

SampleSet surface_guided_samples(double t_star, double delta, int n_r, const Ray& ray) {
  if (n_r < 1) throw ValidationError("surface-guided sampling needs at least one sample");
  SampleSet s;
  s.kind = SampleKind::SurfaceGuided;
  s.delta = delta;
  s.lo = std::max(t_star - delta, ray.t_near);
  s.hi = std::min(t_star + delta, ray.t_far);
  if (!(s.lo < s.hi)) s.hi = s.lo + 1e-9;  // degenerate clip, keep increasing samples
  s.ts.resize(n_r);
  const double step = (s.hi - s.lo) / n_r;
  for (int i = 0; i < n_r; ++i) s.ts[i] = s.lo + (i + 0.5) * step;
  return s;
}

std::vector<std::optional<double>> find_surface_intersections(const std::vector<Ray>& rays,
                                                              const SurfaceFn& surface, int n_s,
                                                              int bisection_steps,
                                                              std::mt19937_64* rng) {
  const std::size_t n = rays.size();
  std::vector<SampleSet> coarse;
  coarse.reserve(n);
  for (const auto& r : rays) coarse.push_back(uniform_samples(r, n_s, rng));
  std::vector<std::optional<double>> out(n);
  std::vector<double> lo(n), hi(n);
  std::vector<std::size_t> active, pending(n);
  for (std::size_t r = 0; r < n; ++r) pending[r] = r;
  // March in slabs so rays stop being evaluated once their first crossing is
  // known; the result equals a single pass over all samples.
  constexpr int kSlab = 8;
  std::vector<Vec3> pts;
  for (int k0 = 0; k0 < n_s && !pending.empty(); k0 += kSlab) {
    const int k1 = std::min(n_s, k0 + kSlab);
    pts.clear();
    for (auto r : pending)
      for (int k = k0; k < k1; ++k) pts.push_back(rays[r].at(coarse[r].ts[k]));
    const auto s = surface(pts);
    std::vector<std::size_t> still;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const auto r = pending[p];
      int found = -1;
      for (int k = k0; k < k1 && found < 0; ++k)
        if (s[p * (k1 - k0) + (k - k0)] >= 0.5) found = k;
      if (found < 0) {
        still.push_back(r);
        continue;
      }
      lo[r] = found == 0 ? rays[r].t_near : coarse[r].ts[found - 1];
      hi[r] = coarse[r].ts[found];
      active.push_back(r);
    }
    pending.swap(still);
  }
  for (int step = 0; step < bisection_steps && !active.empty(); ++step) {
    std::vector<Vec3> mids;
    mids.reserve(active.size());
    for (auto r : active) mids.push_back(rays[r].at(0.5 * (lo[r] + hi[r])));
    const auto sm = surface(mids);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto r = active[a];
      const double mid = 0.5 * (lo[r] + hi[r]);
      (sm[a] >= 0.5 ? hi[r] : lo[r]) = mid;
    }
  }
  for (auto r : active) out[r] = hi[r];
  return out;
}

std::optional<double> find_surface_intersection(const Ray& ray, const SurfaceFn& surface, int n_s,
                                                int bisection_steps) {
  return find_surface_intersections({ray}, surface, n_s, bisection_steps).front();
}

std::vector<double> sample_spacing(const SampleSet& samples) {
  const auto& ts = samples.ts;
  const std::size_t n = ts.size();
  std::vector<double> d(n);
  if (n == 1) {
    d[0] = samples.hi - samples.lo;
    return d;
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    d[i] = ts[i + 1] - ts[i];
    total += d[i];
  }
  d[n - 1] = total / static_cast<double>(n - 1);
  return d;
}

RenderResult integrate_radiance(const SampleSet& samples, const std::vector<double>& sigmas,
                                const std::vector<Vec3>& colors, const Vec3& background) {
  const std::size_t n = samples.ts.size();
  if (sigmas.size() != n || colors.size() != n) {
    throw ValidationError("integrate_radiance: sample, density and color counts differ");
  }
  const auto delta = sample_spacing(samples);
  RenderResult r;
  r.weights.resize(n);
  double optical = 0.0;  // accumulated sigma * delta before sample i
  for (std::size_t i = 0; i < n; ++i) {
    if (sigmas[i] < 0.0) throw DomainError("densities must be non-negative");
    const double tau = sigmas[i] * delta[i];
    double w = std::exp(-optical) * -std::expm1(-tau);
    // Rounding can push the running sum a few ulps past 1; trim so it never does.
    while (w > 0.0 && r.opacity + w > 1.0) w = std::nextafter(std::min(w, 1.0 - r.opacity), 0.0);
    r.weights[i] = w;
    r.color += w * colors[i];
    r.opacity += w;
    optical += tau;
  }
  r.color += std::exp(-optical) * background;
  return r;
}

template <class T>
RadianceBatch<T> integrate_radiance(const ad::Var<T>& sigma, const ad::Var<T>& color,
                                    const ad::Matrix<T>& deltas, const Vec3& background) {
  const ad::Index rays = deltas.rows();
  const ad::Index n = deltas.cols();
  const auto tau = ad::mul(ad::reshape(sigma, rays, n), ad::constant(deltas));
  const auto trans = ad::exp(ad::neg(ad::cumsum_exclusive(tau)));
  const auto alpha = ad::add_scalar(ad::neg(ad::exp(ad::neg(tau))), 1.0);
  const auto w = ad::mul(trans, alpha);
  // Sum weighted colors over the samples of each ray.
  const auto weighted = ad::reshape(ad::mul_col(color, ad::reshape(w, rays * n, 1)), rays, 3 * n);
  ad::Matrix<T> fold = ad::Matrix<T>::Zero(3 * n, 3);
  for (ad::Index k = 0; k < n; ++k)
    for (int c = 0; c < 3; ++c) fold(k * 3 + c, c) = 1;
  RadianceBatch<T> out;
  out.color = ad::matmul(weighted, ad::constant(std::move(fold)));
  out.opacity = ad::sum_cols(w);
  if (background != Vec3::Zero()) {
    ad::Matrix<T> bg = background.transpose().template cast<T>();
    out.color = ad::add(out.color, ad::matmul(ad::add_scalar(ad::neg(out.opacity), 1.0),
                                              ad::constant(std::move(bg))));
  }
  return out;
}

template <class T>
SurfaceFn model_surface(const DoubleField<T>& model, const Conditioning<T>& cond) {
  return [&model, &cond](const std::vector<Vec3>& pts) {
    ad::NoGradGuard guard;
    std::vector<double> out(pts.size());
    const std::size_t chunk = 8192;
    for (std::size_t start = 0; start < pts.size(); start += chunk) {
      const std::size_t m = std::min(chunk, pts.size() - start);
      ad::Matrix<T> x(m, 3);
      for (std::size_t r = 0; r < m; ++r) x.row(r) = pts[start + r].transpose().template cast<T>();
      const auto f = evaluate(model, cond, ad::constant(std::move(x)), ad::Var<T>(), kOccupancy);
      for (std::size_t r = 0; r < m; ++r) out[start + r] = f.s.value()(r, 0);
    }
    return out;
  };
}

template <class T>
RayBatch<T> render_rays(const DoubleField<T>& model, const Conditioning<T>& cond, const std::vector<Ray>& rays,
                        const std::vector<char>& fallback, const RenderOptions& opts, std::mt19937_64* rng) {
  const std::size_t n = rays.size();
  if (fallback.size() != n) throw ValidationError("render_rays: one fallback flag per ray is required");
  const double delta = opts.delta_fraction * cond.bounds.diagonal();

  // Only rays that cross the bounds can meet the surface.
  std::vector<std::size_t> crossing;
  std::vector<Ray> search;
  for (std::size_t r = 0; r < n; ++r) {
    if (auto iv = cond.bounds.ray_interval(rays[r].origin, rays[r].dir); iv && (*iv)[1] > rays[r].t_near) {
      crossing.push_back(r);
      search.push_back(rays[r]);
    }
  }
  std::vector<std::optional<double>> hits(n);
  if (!search.empty()) {
    ad::NoGradGuard guard;
    const auto found = find_surface_intersections(search, model_surface(model, cond), opts.n_s, 8, rng);
    for (std::size_t a = 0; a < crossing.size(); ++a) hits[crossing[a]] = found[a];
  }

  RayBatch<T> out;
  out.hit.assign(n, 0);
  std::vector<std::size_t> fine_ids, coarse_ids;
  std::vector<SampleSet> fine_sets, coarse_sets;
  for (std::size_t r = 0; r < n; ++r) {
    if (hits[r]) {
      out.hit[r] = 1;
      fine_ids.push_back(r);
      fine_sets.push_back(surface_guided_samples(*hits[r], delta, opts.n_r, rays[r]));
    } else if (fallback[r]) {
      coarse_ids.push_back(r);
      coarse_sets.push_back(uniform_samples(rays[r], opts.n_s, rng));
    }
  }

  // Row layout: fine rays, then fallback rays, then constant background rows.
  std::vector<int> where(n, -1);
  std::vector<ad::Var<T>> colors, opacities;
  ad::Index next_row = 0;
  auto integrate_group = [&](const std::vector<std::size_t>& ids, const std::vector<SampleSet>& sets, int per_ray) {
    if (ids.empty()) return;
    const ad::Index rows = static_cast<ad::Index>(ids.size()) * per_ray;
    ad::Matrix<T> x(rows, 3), d(rows, 3), deltas(ids.size(), per_ray);
    for (std::size_t a = 0; a < ids.size(); ++a) {
      const Ray& ray = rays[ids[a]];
      const auto sp = sample_spacing(sets[a]);
      for (int k = 0; k < per_ray; ++k) {
        x.row(a * per_ray + k) = ray.at(sets[a].ts[k]).transpose().template cast<T>();
        d.row(a * per_ray + k) = ray.dir.transpose().template cast<T>();
        deltas(a, k) = static_cast<T>(sp[k]);
      }
      where[ids[a]] = static_cast<int>(next_row + a);
    }
    next_row += static_cast<ad::Index>(ids.size());
    const auto f = evaluate(model, cond, ad::constant(std::move(x)), ad::constant(std::move(d)), kDensity | kColor);
    const auto rad = integrate_radiance(f.sigma, f.color, deltas, opts.background);
    colors.push_back(rad.color);
    opacities.push_back(rad.opacity);
  };
  integrate_group(fine_ids, fine_sets, opts.n_r);
  integrate_group(coarse_ids, coarse_sets, opts.n_s);

  const ad::Index empty = static_cast<ad::Index>(n) - next_row;
  if (empty > 0) {
    ad::Matrix<T> bg(empty, 3);
    bg.rowwise() = opts.background.transpose().template cast<T>();
    colors.push_back(ad::constant(std::move(bg)));
    opacities.push_back(ad::constant(ad::Matrix<T>(ad::Matrix<T>::Zero(empty, 1))));
    for (std::size_t r = 0; r < n; ++r)
      if (where[r] < 0) where[r] = static_cast<int>(next_row++);
  }
  if (n == 0) {
    out.color = ad::constant(ad::Matrix<T>(0, 3));
    out.opacity = ad::constant(ad::Matrix<T>(0, 1));
    return out;
  }
  const auto order = ad::make_index(std::move(where));
  out.color = ad::gather_rows(ad::concat_rows(colors), order);
  out.opacity = ad::gather_rows(ad::concat_rows(opacities), order);
  return out;
}

template <class T>
RenderedImage render_image(const DoubleField<T>& model, const MultiViewSample& sample,
                           const Camera& camera, const RenderOptions& options) {
  ad::NoGradGuard guard;
  const int w = camera.width(), h = camera.height();
  RenderedImage out{Image(w, h, 3), std::vector<double>(static_cast<std::size_t>(w) * h, 0.0), Mask(w, h)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.image.set_rgb(x, y, options.background);
  const auto bounds = depth_bounds_for(camera, sample.bounds);
  if (!bounds) return out;

  std::vector<int> ids = options.input_views;
  if (ids.empty())
    for (std::size_t i = 0; i < sample.views.size(); ++i) ids.push_back(static_cast<int>(i));
  const auto cond = make_conditioning(model, sample, ids);

  const std::size_t total = static_cast<std::size_t>(w) * h;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, options.chunk_rays));
  for (std::size_t start = 0; start < total; start += chunk) {
    const std::size_t m = std::min(chunk, total - start);
    std::vector<Ray> rays;
    for (std::size_t p = start; p < start + m; ++p)
      rays.push_back(pixel_ray(camera, static_cast<int>(p % w), static_cast<int>(p / w), *bounds));
    const auto batch = render_rays(model, cond, rays, std::vector<char>(m, 0), options);
    for (std::size_t a = 0; a < m; ++a) {
      const int p = static_cast<int>(start + a);
      if (!batch.hit[a]) continue;
      const Vec3 c = batch.color.value().row(a).transpose().template cast<double>();
      out.image.set_rgb(p % w, p / w, c.cwiseMax(0.0).cwiseMin(1.0));
      out.opacity[p] = std::clamp(static_cast<double>(batch.opacity.value()(a, 0)), 0.0, 1.0);
      out.hit.set(p % w, p / w, true);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marching cubes. The case table is derived at startup from face segments:
// on every cube face, walking its corners counter-clockwise as seen from
// outside, each maximal run of inside corners yields one segment from the
// edge entering the run to the edge leaving it. Segments chain into closed
// loops (every crossed edge is entered on one face and left on the other),
// which are fan-triangulated. Diagonal faces always separate the inside
// corners, so neighbouring cubes agree and the mesh is closed.

namespace {

struct CubeTables {
  std::array<std::array<int, 2>, 12> edges{};
  std::array<std::vector<std::array<int, 3>>, 256> triangles;
};

Vec3 corner_pos(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

CubeTables build_tables() {
  CubeTables t;
  int e = 0;
  int edge_of[8][8];
  for (auto& row : edge_of)
    for (int& v : row) v = -1;
  for (int a = 0; a < 8; ++a)
    for (int bit = 0; bit < 3; ++bit) {
      const int b = a | (1 << bit);
      if (b == a) continue;
      t.edges[e] = {a, b};
      edge_of[a][b] = edge_of[b][a] = e++;
    }

  std::vector<std::array<int, 4>> faces;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      std::vector<int> cs;
      for (int c = 0; c < 8; ++c)
        if (((c >> axis) & 1) == side) cs.push_back(c);
      Vec3 normal = Vec3::Zero();
      normal[axis] = side ? 1.0 : -1.0;
      Vec3 center = Vec3::Zero();
      for (int c : cs) center += corner_pos(c) / 4.0;
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      std::sort(cs.begin(), cs.end(), [&](int a, int b) {
        const Vec3 pa = corner_pos(a) - center, pb = corner_pos(b) - center;
        return std::atan2(pa[v], pa[u]) < std::atan2(pb[v], pb[u]);
      });
      // Counter-clockwise seen from outside means the turn agrees with the normal.
      const Vec3 turn = (corner_pos(cs[1]) - corner_pos(cs[0])).cross(corner_pos(cs[2]) - corner_pos(cs[1]));
      if (turn.dot(normal) < 0) std::reverse(cs.begin(), cs.end());
      faces.push_back({cs[0], cs[1], cs[2], cs[3]});
    }

  for (int mask = 1; mask < 255; ++mask) {
    auto inside = [&](int c) { return (mask >> c) & 1; };
    int next[12];
    for (int& v : next) v = -1;
    for (const auto& f : faces) {
      for (int k = 0; k < 4; ++k) {
        const int prev = f[(k + 3) % 4];
        if (!inside(f[k]) || inside(prev)) continue;
        int m = k;
        while (inside(f[(m + 1) % 4])) m = (m + 1) % 4;
        next[edge_of[prev][f[k]]] = edge_of[f[m]][f[(m + 1) % 4]];
      }
    }
    bool used[12] = {};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      for (int cur = start; !used[cur]; cur = next[cur]) {
        used[cur] = true;
        loop.push_back(cur);
      }
      for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
        t.triangles[mask].push_back({loop[0], loop[i], loop[i + 1]});
      }
    }
  }

  // Orientation check on the single-corner case: the normal must point away
  // from the inside corner. Flip every triangle if the walk produced the
  // opposite winding.
  const auto& tri = t.triangles[1].front();
  auto mid = [&](int edge) -> Vec3 { return 0.5 * (corner_pos(t.edges[edge][0]) + corner_pos(t.edges[edge][1])); };
  const Vec3 n = (mid(tri[1]) - mid(tri[0])).cross(mid(tri[2]) - mid(tri[0]));
  if (n.dot(mid(tri[0]) - corner_pos(0)) < 0) {
    for (auto& list : t.triangles)
      for (auto& tr : list) std::swap(tr[1], tr[2]);
  }
  return t;
}

const CubeTables& tables() {
  static const CubeTables t = build_tables();
  return t;
}

}  // namespace

MeshResult extract_mesh(const SurfaceFn& surface, const Aabb& bounds, int grid_res, double iso) {
  if (grid_res < 16) throw ValidationError("mesh grid resolution must be at least 16");
  const auto& tab = tables();
  const int n = grid_res;
  const int p = n + 2;  // one empty layer on each side
  const Vec3 step = (bounds.hi - bounds.lo) / static_cast<double>(n - 1);
  auto node_pos = [&](int i, int j, int k) {
    return Vec3(bounds.lo.x() + (i - 1) * step.x(), bounds.lo.y() + (j - 1) * step.y(),
                bounds.lo.z() + (k - 1) * step.z());
  };
  auto node_id = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * p + j) * p + i; };

  std::vector<double> values(static_cast<std::size_t>(p) * p * p, 0.0);
  {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n) * n * n);
    for (int k = 1; k <= n; ++k)
      for (int j = 1; j <= n; ++j)
        for (int i = 1; i <= n; ++i) pts.push_back(node_pos(i, j, k));
    const auto s = surface(pts);
    std::size_t q = 0;
    for (int k = 1; k <= n; ++k)
      for (int j = 1; j <= n; ++j)
        for (int i = 1; i <= n; ++i) values[node_id(i, j, k)] = s[q++];
  }

  MeshResult out;
  std::unordered_map<std::size_t, int> vertex_of_edge;
  auto edge_vertex = [&](int i, int j, int k, int a, int b) {
    const int ia = i + (a & 1), ja = j + ((a >> 1) & 1), ka = k + ((a >> 2) & 1);
    const int ib = i + (b & 1), jb = j + ((b >> 1) & 1), kb = k + ((b >> 2) & 1);
    const std::size_t na = node_id(ia, ja, ka), nb = node_id(ib, jb, kb);
    const int axis = (ia != ib) ? 0 : (ja != jb) ? 1 : 2;
    const std::size_t key = std::min(na, nb) * 3 + axis;
    if (auto it = vertex_of_edge.find(key); it != vertex_of_edge.end()) return it->second;
    const double va = values[na], vb = values[nb];
    const double tt = std::abs(vb - va) > 1e-12 ? std::clamp((iso - va) / (vb - va), 0.0, 1.0) : 0.5;
    Vec3 v = node_pos(ia, ja, ka) + tt * (node_pos(ib, jb, kb) - node_pos(ia, ja, ka));
    v = v.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
    const int id = static_cast<int>(out.mesh.vertices.size());
    out.mesh.vertices.push_back(v);
    vertex_of_edge.emplace(key, id);
    return id;
  };

  for (int k = 0; k < p - 1; ++k)
    for (int j = 0; j < p - 1; ++j)
      for (int i = 0; i < p - 1; ++i) {
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          if (values[node_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] >= iso) mask |= 1 << c;
        }
        for (const auto& tri : tab.triangles[mask]) {
          std::array<int, 3> f;
          for (int q = 0; q < 3; ++q) {
            const auto& e = tab.edges[tri[q]];
            f[q] = edge_vertex(i, j, k, e[0], e[1]);
          }
          if (f[0] != f[1] && f[1] != f[2] && f[0] != f[2]) out.mesh.faces.push_back(f);
        }
      }
  out.empty = out.mesh.faces.empty();
  return out;
}

template <class T>
MeshResult extract_mesh(const DoubleField<T>& model, const MultiViewSample& sample, int grid_res,
                        double iso) {
  if (grid_res < 16) throw ValidationError("mesh grid resolution must be at least 16");
  std::vector<int> ids(sample.views.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  ad::NoGradGuard guard;
  const auto cond = make_conditioning(model, sample, ids);
  return extract_mesh(model_surface(model, cond), sample.bounds, grid_res, iso);
}

#define DFIELD_RENDER_INSTANTIATE(T)                                                             \
  template RadianceBatch<T> integrate_radiance(const ad::Var<T>&, const ad::Var<T>&,             \
                                               const ad::Matrix<T>&, const Vec3&);               \
  template SurfaceFn model_surface(const DoubleField<T>&, const Conditioning<T>&);               \
  template RayBatch<T> render_rays(const DoubleField<T>&, const Conditioning<T>&, const std::vector<Ray>&, \
                                   const std::vector<char>&, const RenderOptions&, std::mt19937_64*);    \
  template RenderedImage render_image(const DoubleField<T>&, const MultiViewSample&,             \
                                      const Camera&, const RenderOptions&);                      \
  template MeshResult extract_mesh(const DoubleField<T>&, const MultiViewSample&, int, double);

DFIELD_RENDER_INSTANTIATE(float)
DFIELD_RENDER_INSTANTIATE(double)

}  // namespace dfield

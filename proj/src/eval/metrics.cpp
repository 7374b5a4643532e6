#include "dfield/eval/metrics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "dfield/errors.hpp"

namespace dfield {

namespace {

// Ericson, closest point on triangle abc to p.
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double box_distance2(const Aabb& box, const Vec3& p) {
  const Vec3 d = (box.lo - p).cwiseMax(p - box.hi).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

double triangle_area(const TriangleMesh& m, const std::array<int, 3>& f) {
  return 0.5 * (m.vertices[f[1]] - m.vertices[f[0]]).cross(m.vertices[f[2]] - m.vertices[f[0]]).norm();
}

void require_mesh(const TriangleMesh& m, const char* what) {
  if (m.faces.empty()) throw ValidationError(std::string(what) + " mesh is empty");
  const int n = static_cast<int>(m.vertices.size());
  for (const auto& f : m.faces) {
    for (int i : f) {
      if (i < 0 || i >= n) throw ValidationError(std::string(what) + " mesh has an out-of-range index");
    }
  }
}

void require_samples(std::size_t n) {
  if (n < 1000) throw ValidationError("surface metrics need at least 1000 samples");
}

double mean_distance(const std::vector<Vec3>& pts, const MeshDistance& to) {
  double total = 0.0;
  for (const auto& p : pts) total += to.distance(p);
  return total / static_cast<double>(pts.size());
}

}  // namespace

struct MeshDistance::Impl {
  struct BuildNode {
    Aabb box;
    int left = -1, right = -1;  // children, or -1 for a leaf
    int first = 0, count = 0;   // leaf range in `order`
  };
  std::vector<Vec3> a, b, c;
  std::vector<int> order;
  std::vector<BuildNode> nodes;

  Aabb tri_box(int t) const {
    Aabb box{a[t].cwiseMin(b[t]).cwiseMin(c[t]), a[t].cwiseMax(b[t]).cwiseMax(c[t])};
    return box;
  }

  int build(int first, int count) {
    BuildNode node;
    node.box = tri_box(order[first]);
    for (int i = 1; i < count; ++i) node.box.extend(tri_box(order[first + i]));
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (count <= 4) {
      nodes[id].first = first;
      nodes[id].count = count;
      return id;
    }
    int axis = 0;
    (node.box.hi - node.box.lo).maxCoeff(&axis);
    const int mid = first + count / 2;
    auto centroid = [&](int t) { return a[t][axis] + b[t][axis] + c[t][axis]; };
    std::nth_element(order.begin() + first, order.begin() + mid, order.begin() + first + count,
                     [&](int x, int y) { return centroid(x) < centroid(y); });
    const int l = build(first, mid - first);
    const int r = build(mid, first + count - mid);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }

  Vec3 closest(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_pt = Vec3::Zero();
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      const auto& n = nodes[id];
      if (box_distance2(n.box, p) >= best) continue;
      if (n.left < 0) {
        for (int i = 0; i < n.count; ++i) {
          const int t = order[n.first + i];
          const Vec3 q = closest_on_triangle(p, a[t], b[t], c[t]);
          const double d = (q - p).squaredNorm();
          if (d < best) {
            best = d;
            best_pt = q;
          }
        }
        continue;
      }
      // Visit the nearer child first.
      const double dl = box_distance2(nodes[n.left].box, p);
      const double dr = box_distance2(nodes[n.right].box, p);
      if (dl < dr) {
        stack.push_back(n.right);
        stack.push_back(n.left);
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    return best_pt;
  }
};

MeshDistance::MeshDistance(const TriangleMesh& mesh) : impl_(std::make_unique<Impl>()) {
  require_mesh(mesh, "distance query");
  for (const auto& f : mesh.faces) {
    impl_->a.push_back(mesh.vertices[f[0]]);
    impl_->b.push_back(mesh.vertices[f[1]]);
    impl_->c.push_back(mesh.vertices[f[2]]);
  }
  impl_->order.resize(mesh.faces.size());
  std::iota(impl_->order.begin(), impl_->order.end(), 0);
  impl_->build(0, static_cast<int>(mesh.faces.size()));
}

MeshDistance::~MeshDistance() = default;
MeshDistance::MeshDistance(MeshDistance&&) noexcept = default;
MeshDistance& MeshDistance::operator=(MeshDistance&&) noexcept = default;

Vec3 MeshDistance::closest_point(const Vec3& p) const { return impl_->closest(p); }
double MeshDistance::distance(const Vec3& p) const { return (impl_->closest(p) - p).norm(); }

std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  require_mesh(mesh, "sampled");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    total += triangle_area(mesh, mesh.faces[i]);
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw ValidationError("mesh has zero surface area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double pick = u(rng) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto& f = mesh.faces[std::min<std::size_t>(it - cumulative.begin(), mesh.faces.size() - 1)];
    double r1 = std::sqrt(u(rng)), r2 = u(rng);
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    out.push_back((1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c);
  }
  return out;
}

double point_to_surface(const TriangleMesh& pred, const TriangleMesh& gt, std::size_t n_samples,
                        std::uint64_t seed) {
  require_samples(n_samples);
  require_mesh(gt, "ground-truth");
  return mean_distance(sample_mesh(pred, n_samples, seed), MeshDistance(gt));
}

double chamfer_distance(const TriangleMesh& a, const TriangleMesh& b, std::size_t n_samples, std::uint64_t seed) {
  require_samples(n_samples);
  require_mesh(a, "first");
  require_mesh(b, "second");
  const double ab = mean_distance(sample_mesh(a, n_samples, seed), MeshDistance(b));
  const double ba = mean_distance(sample_mesh(b, n_samples, seed + 1), MeshDistance(a));
  return 0.5 * (ab + ba);
}

SurfaceErrors surface_errors_to_scene(const TriangleMesh& pred, const Scene& scene, std::size_t n_samples,
                                      std::uint64_t seed) {
  require_samples(n_samples);
  const auto pts = sample_mesh(pred, n_samples, seed);
  double to_scene = 0.0;
  for (const auto& p : pts) to_scene += std::abs(scene.sdf(p));
  to_scene /= static_cast<double>(pts.size());
  std::mt19937_64 rng(seed + 1);
  const auto truth = scene.sample_surface(n_samples, rng);
  const double to_mesh = mean_distance(truth.points, MeshDistance(pred));
  return SurfaceErrors{0.5 * (to_scene + to_mesh), to_scene};
}

double psnr(const Image& a, const Image& b, const Mask* mask) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ValidationError("psnr: image shapes differ");
  }
  if (mask && (mask->width != a.width || mask->height != a.height)) {
    throw ValidationError("psnr: mask shape differs from the images");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (mask && !mask->at(x, y)) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sum += d * d;
      }
      count += a.channels;
    }
  }
  if (count == 0) throw ValidationError("psnr: no pixels selected");
  const double mse = sum / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCap;
  return std::clamp(10.0 * std::log10(1.0 / mse), 0.0, kPsnrCap);
}

double ssim(const Image& a, const Image& b) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5, kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ValidationError("ssim: image shapes differ");
  }
  if (a.width < kWin || a.height < kWin) throw ValidationError("ssim: images must be at least 11x11");
  std::array<double, kWin> g{};
  double norm = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    norm += g[i];
  }
  for (auto& v : g) v /= norm;

  const int w = a.width, h = a.height, ow = w - kWin + 1, oh = h - kWin + 1;
  // Separable valid-mode filter of a w x h plane.
  auto filter = [&](const std::vector<double>& in) {
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += g[k] * in[static_cast<std::size_t>(y) * w + x + k];
        tmp[static_cast<std::size_t>(y) * ow + x] = s;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = s;
      }
    return out;
  };

  double total = 0.0;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        pa[i] = a.at(x, y, c);
        pb[i] = b.at(x, y, c);
        aa[i] = pa[i] * pa[i];
        bb[i] = pb[i] * pb[i];
        ab[i] = pa[i] * pb[i];
      }
    const auto ma = filter(pa), mb = filter(pb), saa = filter(aa), sbb = filter(bb), sab = filter(ab);
    double acc = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = saa[i] - ma[i] * ma[i];
      const double vb = sbb[i] - mb[i] * mb[i];
      const double cov = sab[i] - ma[i] * mb[i];
      acc += ((2 * ma[i] * mb[i] + kC1) * (2 * cov + kC2)) /
             ((ma[i] * ma[i] + mb[i] * mb[i] + kC1) * (va + vb + kC2));
    }
    total += acc / static_cast<double>(ma.size());
  }
  return std::clamp(total / a.channels, -1.0, 1.0);
}

double silhouette_iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) throw ValidationError("iou: mask shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double MetricReport::mean_psnr() const {
  return psnr.empty() ? 0.0 : std::accumulate(psnr.begin(), psnr.end(), 0.0) / psnr.size();
}

double MetricReport::mean_ssim() const {
  return ssim.empty() ? 0.0 : std::accumulate(ssim.begin(), ssim.end(), 0.0) / ssim.size();
}

std::string report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["scene_id"] = r.scene_id;
  j["chamfer"] = r.chamfer ? nlohmann::ordered_json(*r.chamfer) : nlohmann::ordered_json(nullptr);
  j["p2s"] = r.p2s ? nlohmann::ordered_json(*r.p2s) : nlohmann::ordered_json(nullptr);
  j["psnr"] = {{"per_view", r.psnr}, {"mean", r.mean_psnr()}, {"masked", r.masked_psnr}};
  j["ssim"] = {{"per_view", r.ssim}, {"mean", r.mean_ssim()}};
  j["config_hash"] = r.config_hash;
  j["created"] = r.created;
  j["errors"] = r.errors;
  return j.dump(2);
}

MetricReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report is not valid JSON: ") + e.what());
  }
  MetricReport r;
  try {
    r.scene_id = j.at("scene_id").get<std::string>();
    if (!j.at("chamfer").is_null()) r.chamfer = j["chamfer"].get<double>();
    if (!j.at("p2s").is_null()) r.p2s = j["p2s"].get<double>();
    r.psnr = j.at("psnr").at("per_view").get<std::vector<double>>();
    r.masked_psnr = j["psnr"].at("masked").get<bool>();
    r.ssim = j.at("ssim").at("per_view").get<std::vector<double>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.created = j.at("created").get<std::string>();
    r.errors = j.at("errors").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report does not match the schema: ") + e.what());
  }
  for (double p : r.psnr) {
    if (!(p >= 0.0 && p <= kPsnrCap)) throw ValidationError("report psnr out of range");
  }
  for (double s : r.ssim) {
    if (!(s >= -1.0 && s <= 1.0)) throw ValidationError("report ssim out of range");
  }
  return r;
}

std::string report_csv_header() { return "scene_id,chamfer,p2s,psnr,ssim"; }

std::string report_csv_row(const MetricReport& r) {
  auto num = [](std::optional<double> v) {
    if (!v) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return std::string(buf);
  };
  return r.scene_id + "," + num(r.chamfer) + "," + num(r.p2s) + "," +
         num(r.psnr.empty() ? std::nullopt : std::optional<double>(r.mean_psnr())) + "," +
         num(r.ssim.empty() ? std::nullopt : std::optional<double>(r.mean_ssim()));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dfield

#include "dfield/train/training.hpp"

#include <chrono>
#include <cmath>

#include "dfield/errors.hpp"

namespace dfield {

void validate(const LossConfig& c) {
  if (c.lambda_g < 0 || c.lambda_r < 0 || c.lambda_c < 0) throw ValidationError("loss weights must be non-negative");
  if (c.n_geo < 1 || c.n_reg < 1 || c.n_rays < 1) throw ValidationError("sample counts must be at least 1");
  if (c.iters_pretrain < 0 || c.iters_ft_geometry < 0 || c.iters_ft_color < 0) {
    throw ValidationError("iteration counts must be non-negative");
  }
  if (!(c.lr_pretrain >= 0) || !(c.lr_finetune >= 0)) throw ValidationError("learning rates must be non-negative");
  if (c.near_surface_fraction < 0 || c.near_surface_fraction > 1 || c.foreground_fraction < 0 ||
      c.foreground_fraction > 1 || !(c.perturb_std > 0)) {
    throw ValidationError("sampling fractions must lie in [0, 1] and the perturbation must be positive");
  }
}

template <class T>
ad::Var<T> geometry_loss(const ad::Var<T>& s_pred, const ad::Var<T>& s_star) {
  if (s_pred.rows() == 0 || s_pred.rows() != s_star.rows() || s_pred.cols() != s_star.cols()) {
    throw ValidationError("geometry loss needs two non-empty batches of equal shape");
  }
  return ad::mean(ad::square(ad::sub(s_pred, s_star)));
}

template <class T>
ad::Var<T> color_loss(const ad::Var<T>& c_hat, const ad::Var<T>& c_star) {
  if (c_hat.rows() == 0 || c_hat.rows() != c_star.rows() || c_hat.cols() != c_star.cols()) {
    throw ValidationError("color loss needs two non-empty batches of equal shape");
  }
  return ad::mean(ad::abs(ad::sub(c_hat, c_star)));
}

template <class T>
ad::Var<T> regularization_loss(const ad::Var<T>& grad_s, const ad::Matrix<T>& outward_normals) {
  if (grad_s.rows() == 0 || grad_s.rows() != outward_normals.rows() || grad_s.cols() != 3 ||
      outward_normals.cols() != 3) {
    throw ValidationError("regularization loss needs matching N x 3 gradients and normals");
  }
  // Only the direction of the gradient is matched: a step-like occupancy has
  // a gradient far longer than one at the boundary.
  constexpr double kEps = 1e-6;
  const auto length = ad::sqrt(ad::add_scalar(ad::sum_cols(ad::square(grad_s)), kEps * kEps));
  const auto dir = ad::mul_col(grad_s, ad::reciprocal(length));
  const auto diff = ad::add(dir, ad::constant(ad::Matrix<T>(outward_normals)));
  return ad::scale(ad::sum(ad::abs(diff)), 1.0 / static_cast<double>(grad_s.rows()));
}

template <class T>
ad::Var<T> occupancy_gradient(const DoubleField<T>& model, const Conditioning<T>& cond, const ad::Matrix<T>& x) {
  ad::GradModeGuard on(true);
  const auto xv = ad::parameter(ad::Matrix<T>(x));
  const auto f = evaluate(model, cond, xv, ad::Var<T>(), kOccupancy);
  return ad::grad(ad::sum(f.s), {xv}, true)[0];
}

template <class T>
void Adam<T>::step(const std::vector<ad::Var<T>>& params, const std::vector<ad::Var<T>>& grads,
                   const std::vector<std::size_t>& ids) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Var<T> p = params[i];
    const ad::Matrix<T>& g = grads[i].value();
    auto& [m, v] = moments_[ids[i]];
    if (m.size() == 0) {
      m = ad::Matrix<T>::Zero(g.rows(), g.cols());
      v = ad::Matrix<T>::Zero(g.rows(), g.cols());
    }
    m = static_cast<T>(beta1_) * m + static_cast<T>(1 - beta1_) * g;
    v = static_cast<T>(beta2_) * v + static_cast<T>(1 - beta2_) * g.cwiseProduct(g);
    if (lr_ == 0.0) continue;
    const auto mh = m.array() / static_cast<T>(c1);
    const auto vh = v.array() / static_cast<T>(c2);
    p.mutable_value().array() -= static_cast<T>(lr_) * mh / (vh.sqrt() + static_cast<T>(eps_));
  }
}

namespace {

using Mf = ad::Matrix<float>;
using Vf = ad::Var<float>;

std::vector<int> all_but(int n, int skip) {
  std::vector<int> ids;
  for (int i = 0; i < n; ++i)
    if (i != skip) ids.push_back(i);
  return ids;
}

Mf to_rows(const std::vector<Vec3>& pts) {
  Mf m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) = pts[i].transpose().cast<float>();
  return m;
}

// Near-surface perturbations and uniform points with their occupancy labels.
std::pair<Mf, Mf> geometry_batch(const Scene& scene, const Aabb& bounds, const LossConfig& c, std::mt19937_64& rng) {
  const int n_near = static_cast<int>(std::lround(c.n_geo * c.near_surface_fraction));
  std::vector<Vec3> pts;
  pts.reserve(c.n_geo);
  if (n_near > 0) {
    const auto surf = scene.sample_surface(n_near, rng);
    std::normal_distribution<double> noise(0.0, c.perturb_std * bounds.diagonal());
    for (const auto& p : surf.points) pts.push_back(p + Vec3(noise(rng), noise(rng), noise(rng)));
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (static_cast<int>(pts.size()) < c.n_geo) {
    pts.push_back(bounds.lo + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(bounds.hi - bounds.lo));
  }
  Mf labels(pts.size(), 1);
  for (std::size_t i = 0; i < pts.size(); ++i) labels(i, 0) = static_cast<float>(scene.occupancy(pts[i]));
  return {to_rows(pts), labels};
}

struct RaySet {
  std::vector<Ray> rays;
  std::vector<char> foreground;
  Mf target;
};

RaySet ray_batch(const MultiViewSample& sample, int view, int count, double fg_fraction, std::mt19937_64& rng) {
  const View& v = sample.views[view];
  const int w = v.image.width, h = v.image.height;
  std::vector<int> fg;
  for (int p = 0; p < w * h; ++p)
    if (v.mask.data[p]) fg.push_back(p);
  const int n_fg = fg.empty() ? 0 : static_cast<int>(std::lround(count * fg_fraction));
  std::uniform_int_distribution<int> any(0, w * h - 1);
  RaySet out;
  out.target.resize(count, 3);
  for (int i = 0; i < count; ++i) {
    int p;
    if (i < n_fg) {
      std::uniform_int_distribution<std::size_t> pick(0, fg.size() - 1);
      p = fg[pick(rng)];
    } else {
      p = any(rng);
    }
    out.rays.push_back(pixel_ray(v.camera, p % w, p / w, sample.depth_bounds));
    out.foreground.push_back(v.mask.data[p] ? 1 : 0);
    out.target.row(i) = v.image.rgb(p % w, p / w).transpose().cast<float>();
  }
  return out;
}

std::vector<std::size_t> indices_of(const Model& model, const std::vector<std::string>& groups) {
  std::vector<std::size_t> ids;
  const auto& ps = model.params().params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    bool take = groups.empty();
    for (const auto& g : groups) take = take || g == ps[i].group;
    if (take) ids.push_back(i);
  }
  return ids;
}

void apply_step(Model& model, Adam<float>& opt, const Vf& loss, const std::vector<std::size_t>& ids) {
  std::vector<Vf> vars;
  for (auto i : ids) vars.push_back(model.params().params()[i].var);
  const auto grads = ad::grad(loss, vars);
  for (const auto& g : grads) {
    if (!g.value().allFinite()) throw NumericalError("non-finite gradient");
  }
  opt.step(vars, grads, ids);
}

void check_finite(double v, long step) {
  if (!std::isfinite(v)) throw NumericalError("loss became non-finite at step " + std::to_string(step));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vf color_term(const Model& model, const Conditioning<float>& cond, const RaySet& rays, const RenderOptions& opts,
              std::mt19937_64& rng) {
  const auto out = render_rays(model, cond, rays.rays, rays.foreground, opts, &rng);
  return color_loss(out.color, ad::constant(Mf(rays.target)));
}

}  // namespace

void pretrain(TrainState& state, const std::vector<TrainingScene>& scenes, const TrainConfig& config, int steps,
              const StepCallback& on_step) {
  validate(config.loss);
  if (scenes.empty()) throw ValidationError("pretraining needs at least one scene");
  for (const auto& s : scenes) {
    if (!s.scene || !s.sample || s.sample->views.size() < 2) {
      throw ValidationError("every pretraining scene needs an oracle and at least two views");
    }
  }
  const auto& lc = config.loss;
  Model& model = *state.model;
  const auto ids = indices_of(model, {});
  const auto t0 = std::chrono::steady_clock::now();
  ad::GradModeGuard on(true);

  for (int it = 0; it < steps; ++it) {
    auto& rng = state.rng;
    const auto& ts = scenes[std::uniform_int_distribution<std::size_t>(0, scenes.size() - 1)(rng)];
    const MultiViewSample& sample = *ts.sample;
    const int n_views = static_cast<int>(sample.views.size());
    const int target = std::uniform_int_distribution<int>(0, n_views - 1)(rng);
    const auto cond = make_conditioning(model, sample, all_but(n_views, target));

    StepLosses log;
    log.phase = "pretrain";
    Vf total = ad::constant(Mf(Mf::Zero(1, 1)));
    if (lc.lambda_g > 0) {
      auto [x, s_star] = geometry_batch(*ts.scene, sample.bounds, lc, rng);
      const auto f = evaluate(model, cond, ad::constant(std::move(x)), Vf(), kOccupancy);
      const auto lg = geometry_loss(f.s, ad::constant(std::move(s_star)));
      log.geometry = lg.item();
      total = ad::add(total, ad::scale(lg, lc.lambda_g));
    }
    if (lc.lambda_r > 0) {
      const auto surf = ts.scene->sample_surface(lc.n_reg, rng);
      const auto g = occupancy_gradient(model, cond, to_rows(surf.points));
      const auto lr = regularization_loss(g, to_rows(surf.normals));
      log.regularization = lr.item();
      total = ad::add(total, ad::scale(lr, lc.lambda_r));
    }
    if (lc.lambda_c > 0) {
      const auto rays = ray_batch(sample, target, lc.n_rays, lc.foreground_fraction, rng);
      const auto lcol = color_term(model, cond, rays, config.render, rng);
      log.color = lcol.item();
      total = ad::add(total, ad::scale(lcol, lc.lambda_c));
    }
    log.total = total.item();
    check_finite(log.total, state.step + 1);
    if (total.requires_grad()) apply_step(model, state.optimizer, total, ids);

    ++state.step;
    state.avg_geometry = state.step == 1 ? log.geometry : 0.98 * state.avg_geometry + 0.02 * log.geometry;
    state.avg_color = state.step == 1 ? log.color : 0.98 * state.avg_color + 0.02 * log.color;
    log.step = state.step;
    log.seconds = seconds_since(t0);
    if (on_step) on_step(log);
  }
}

std::vector<std::string> finetune_groups(int phase) {
  if (phase == 1) return {group::kImageEncoder, group::kDoubleMlp, group::kGeometry};
  if (phase == 2) return {group::kViewEncoder, group::kDecoder, group::kTexture};
  throw ValidationError("finetuning has phases 1 and 2");
}

FinetuneResult finetune(TrainState& state, const MultiViewSample& sample, const TrainConfig& config,
                        const StepCallback& on_step) {
  validate(config.loss);
  const int n_views = static_cast<int>(sample.views.size());
  if (n_views < 2) throw ValidationError("finetuning holds one view out and needs at least two views");
  Model& model = *state.model;
  const auto& lc = config.loss;
  FinetuneResult result;
  const auto t0 = std::chrono::steady_clock::now();
  ad::GradModeGuard on(true);
  long k = 0;
  for (int phase = 1; phase <= 2; ++phase) {
    const auto ids = indices_of(model, finetune_groups(phase));
    Adam<float> opt(lc.lr_finetune);
    const int iters = phase == 1 ? lc.iters_ft_geometry : lc.iters_ft_color;
    for (int it = 0; it < iters; ++it, ++k) {
      auto& rng = state.rng;
      const int target = config.random_finetune_view ? std::uniform_int_distribution<int>(0, n_views - 1)(rng)
                                                     : static_cast<int>(k % n_views);
      result.targets.push_back(target);
      const auto cond = make_conditioning(model, sample, all_but(n_views, target));
      const auto rays = ray_batch(sample, target, lc.n_rays, lc.foreground_fraction, rng);
      const auto loss = color_term(model, cond, rays, config.render, rng);
      StepLosses log;
      log.phase = phase == 1 ? "finetune_geometry" : "finetune_color";
      log.color = log.total = loss.item();
      check_finite(log.total, state.step + 1);
      if (loss.requires_grad()) apply_step(model, opt, loss, ids);
      ++state.step;
      log.step = state.step;
      log.seconds = seconds_since(t0);
      if (on_step) on_step(log);
    }
  }
  return result;
}

double probe_geometry_loss(const Model& model, const TrainingScene& scene, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LossConfig c;
  c.n_geo = count;
  const auto [x, s_star] = geometry_batch(*scene.scene, scene.sample->bounds, c, rng);
  std::vector<Vec3> xs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) xs.push_back(x.row(i).transpose().cast<double>());
  ad::NoGradGuard guard;
  std::vector<int> ids(scene.sample->views.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  const auto cond = make_conditioning(model, *scene.sample, ids);
  const auto s = model_surface(model, cond)(xs);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sum += (s[i] - s_star(i, 0)) * (s[i] - s_star(i, 0));
  return sum / static_cast<double>(s.size());
}

double probe_color_l1(const Model& model, const MultiViewSample& sample, int target, const RenderOptions& opts) {
  RenderOptions o = opts;
  o.input_views = all_but(static_cast<int>(sample.views.size()), target);
  const auto img = render_image(model, sample, sample.views[target].camera, o);
  const auto& gt = sample.views[target].image;
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) sum += std::abs(img.image.data[i] - gt.data[i]);
  return sum / static_cast<double>(gt.data.size());
}

#define DFIELD_TRAIN_INSTANTIATE(T)                                                              \
  template ad::Var<T> geometry_loss(const ad::Var<T>&, const ad::Var<T>&);                       \
  template ad::Var<T> color_loss(const ad::Var<T>&, const ad::Var<T>&);                          \
  template ad::Var<T> regularization_loss(const ad::Var<T>&, const ad::Matrix<T>&);              \
  template ad::Var<T> occupancy_gradient(const DoubleField<T>&, const Conditioning<T>&,          \
                                         const ad::Matrix<T>&);                                  \
  template class Adam<T>;

DFIELD_TRAIN_INSTANTIATE(float)
DFIELD_TRAIN_INSTANTIATE(double)

}  // namespace dfield

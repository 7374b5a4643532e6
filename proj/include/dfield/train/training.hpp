#pragma once

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dfield/core/model.hpp"
#include "dfield/render/renderer.hpp"
#include "dfield/scene/scene.hpp"

namespace dfield {

struct LossConfig {
  double lambda_g = 1.0;
  double lambda_r = 0.1;
  double lambda_c = 1.0;
  int n_geo = 2048;
  int n_reg = 512;
  int n_rays = 512;
  double lr_pretrain = 1e-5;
  double lr_finetune = 1e-6;
  int iters_pretrain = 5000;
  int iters_ft_geometry = 2000;
  int iters_ft_color = 2000;
  double near_surface_fraction = 0.5;
  double perturb_std = 0.025;       // of the bounds diagonal
  double foreground_fraction = 0.5;  // of the color rays drawn from the mask
};

struct TrainConfig {
  LossConfig loss;
  RenderOptions render;  // n_s, n_r, delta used for the color term
  bool random_finetune_view = false;
};

// Throws ValidationError unless counts are >= 1, rates > 0 and weights >= 0.
void validate(const LossConfig& c);

// Mean squared error; ValidationError on empty or mismatched batches.
template <class T>
ad::Var<T> geometry_loss(const ad::Var<T>& s_pred, const ad::Var<T>& s_star);

// Mean absolute error over all ray-channel entries.
template <class T>
ad::Var<T> color_loss(const ad::Var<T>& c_hat, const ad::Var<T>& c_star);

// Mean L1 distance between the unit direction of the spatial gradient of s
// and the target direction. Occupancy grows inward, so the target for an
// outward unit normal n* is -n*; a vanishing gradient costs |n*|_1. `grad_s`
// must carry a graph to train through it.
template <class T>
ad::Var<T> regularization_loss(const ad::Var<T>& grad_s, const ad::Matrix<T>& outward_normals);

// Spatial gradient of the predicted occupancy at x (N x 3), differentiable
// with respect to the parameters.
template <class T>
ad::Var<T> occupancy_gradient(const DoubleField<T>& model, const Conditioning<T>& cond, const ad::Matrix<T>& x);

// Adam without weight decay. Moments are kept per parameter index.
template <class T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Updates params[i] with grads[i]; `ids` name the moment slots.
  void step(const std::vector<ad::Var<T>>& params, const std::vector<ad::Var<T>>& grads,
            const std::vector<std::size_t>& ids);

  double lr() const { return lr_; }
  long steps() const { return t_; }
  std::map<std::size_t, std::pair<ad::Matrix<T>, ad::Matrix<T>>>& moments() { return moments_; }
  const std::map<std::size_t, std::pair<ad::Matrix<T>, ad::Matrix<T>>>& moments() const { return moments_; }
  void set_steps(long t) { t_ = t; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::map<std::size_t, std::pair<ad::Matrix<T>, ad::Matrix<T>>> moments_;
};

using Model = DoubleField<float>;

struct StepLosses {
  long step = 0;
  double geometry = 0.0;
  double regularization = 0.0;
  double color = 0.0;
  double total = 0.0;
  double seconds = 0.0;  // wall time since the loop started
  std::string phase;
};

struct TrainState {
  std::unique_ptr<Model> model;
  Adam<float> optimizer;
  long step = 0;
  std::mt19937_64 rng;
  double avg_geometry = 0.0;  // exponential running means
  double avg_color = 0.0;

  TrainState(const ModelConfig& config, double lr, std::uint64_t seed)
      : model(std::make_unique<Model>(config)), optimizer(lr), rng(seed) {}
};

// One scene with its analytic oracle, used for pretraining.
struct TrainingScene {
  const Scene* scene = nullptr;
  const MultiViewSample* sample = nullptr;
};

using StepCallback = std::function<void(const StepLosses&)>;

// Runs `steps` pretraining steps. Each step draws a scene, holds out one of
// its views as the color target and conditions on the rest. Throws
// NumericalError when the loss stops being finite.
void pretrain(TrainState& state, const std::vector<TrainingScene>& scenes, const TrainConfig& config,
              int steps, const StepCallback& on_step = {});

struct FinetuneResult {
  std::vector<int> targets;  // target view of every step
};

// Two-phase leave-one-out finetuning with the color loss only. Phase one
// trains the image encoder, double MLP and geometry MLP; phase two the view
// encoder, decoder and texture MLP. Each phase uses a fresh optimizer.
FinetuneResult finetune(TrainState& state, const MultiViewSample& sample, const TrainConfig& config,
                        const StepCallback& on_step = {});

// Parameter groups updated by each finetuning phase.
std::vector<std::string> finetune_groups(int phase);

// Mean squared occupancy error on a fixed set of probe points.
double probe_geometry_loss(const Model& model, const TrainingScene& scene, int count, std::uint64_t seed);

// Mean absolute error of a full render of view `target` conditioned on the
// other views.
double probe_color_l1(const Model& model, const MultiViewSample& sample, int target, const RenderOptions& opts);

}  // namespace dfield

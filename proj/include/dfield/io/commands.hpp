#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dfield/eval/metrics.hpp"
#include "dfield/io/checkpoint.hpp"

namespace dfield {

// Pipeline stages behind the command-line subcommands. Each throws
// ValidationError for bad input and NumericalError when training diverges.
// Warnings go to `warn` (stderr in the CLI).
using WarnFn = std::function<void(const std::string&)>;

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
  int views = 6;
  int width = 128;
  int height = 128;
  std::optional<std::uint64_t> seed;  // overrides the scene file's seed
  double ring_radius = 3.0;
  bool force = false;
};
void cmd_synth(const SynthArgs& a);

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> data_dirs;  // empty: paths.data from the config
  std::string out_dir;                 // empty: paths.out from the config
  std::string resume;                  // checkpoint to continue from
  std::optional<int> steps;            // steps to run; default runs up to iters_pretrain
};
// Writes train_log.jsonl (appended on resume), ckpt_<step>.dfck every
// checkpoint_every steps and final.dfck. When the loss stops being finite the
// parameters from before the failing step go to last_good.dfck and the
// NumericalError propagates. Returns the path of the final checkpoint.
std::string cmd_train(const TrainArgs& a, const WarnFn& warn = {});

struct FinetuneArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out_dir;
  std::optional<int> geometry_steps;  // default: the config's iters_ft_geometry
  std::optional<int> color_steps;
  bool random_view = false;
};
// Writes finetune_log.jsonl and final.dfck; returns the final checkpoint path.
std::string cmd_finetune(const FinetuneArgs& a, const WarnFn& warn = {});

struct RenderArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out_dir;
  std::vector<std::string> camera_paths;  // camera JSON documents
  int orbit = 0;                          // cameras on the training ring
};
// Writes view_<k>.png per camera, conditioned on every dataset view. Returns
// the written paths.
std::vector<std::string> cmd_render(const RenderArgs& a, const WarnFn& warn = {});

struct MeshArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out_path;
  int grid = 128;
};
// Returns the number of triangles written.
std::size_t cmd_mesh(const MeshArgs& a, const WarnFn& warn = {});

struct EvalArgs {
  std::string gt_dir;
  std::string images_dir;  // predicted view_<k>.png, optional
  std::string mesh_path;   // predicted OBJ, optional
  std::string out_json;
  std::string csv_path;    // optional; appended, header written once
  std::string checkpoint;  // optional, supplies the config hash
  bool full_frame = false;
};
MetricReport cmd_eval(const EvalArgs& a, const WarnFn& warn = {});

// Thread count from DFIELD_THREADS, applied to Eigen and OpenMP. Returns the
// value used, or 0 when the variable is unset.
int apply_thread_env();

// One JSON-lines record of a training step.
std::string log_line(const StepLosses& s);

}  // namespace dfield

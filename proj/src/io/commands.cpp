#include "dfield/io/commands.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>

#include <Eigen/Core>

#include "dfield/errors.hpp"
#include "dfield/io/dataset_io.hpp"
#include "dfield/io/obj.hpp"
#include "dfield/io/png.hpp"

namespace dfield {

namespace fs = std::filesystem;

namespace {

void emit(const WarnFn& warn, const std::string& msg) {
  if (warn) warn(msg);
}

std::string numbered(const std::string& dir, const char* stem, long k, int digits, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%0*ld.%s", stem, digits, k, ext);
  return (fs::path(dir) / buf).string();
}

std::vector<LoadedDataset> load_all(const std::vector<std::string>& dirs, const WarnFn& warn) {
  std::vector<LoadedDataset> out;
  for (const auto& d : dirs) {
    out.push_back(read_dataset(d));
    for (const auto& w : out.back().warnings) emit(warn, d + ": " + w);
  }
  return out;
}

std::ofstream open_log(const std::string& path, bool append) {
  std::ofstream log(path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw ValidationError("cannot open log " + path);
  return log;
}

}  // namespace

std::string log_line(const StepLosses& s) {
  nlohmann::ordered_json j;
  j["step"] = s.step;
  j["phase"] = s.phase;
  j["geometry"] = s.geometry;
  j["regularization"] = s.regularization;
  j["color"] = s.color;
  j["total"] = s.total;
  j["seconds"] = s.seconds;
  return j.dump();
}

int apply_thread_env() {
  const char* v = std::getenv("DFIELD_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw ValidationError("DFIELD_THREADS must be a positive integer");
  Eigen::setNbThreads(static_cast<int>(n));
  omp_set_num_threads(static_cast<int>(n));
  return static_cast<int>(n);
}

void cmd_synth(const SynthArgs& a) {
  if (a.views < 2) throw ValidationError("--views must be at least 2");
  SceneSpec spec = read_spec(a.spec_path);
  if (a.seed) spec.seed = *a.seed;
  const fs::path out(a.out_dir);
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw ValidationError(a.out_dir + " exists and is not a directory");
    if (!fs::is_empty(out)) {
      if (!a.force) throw ValidationError(a.out_dir + " is not empty; pass --force to overwrite");
      // Only files of the dataset layout are removed.
      static const std::regex ours(R"((view|mask)_\d{3}\.png|camera_\d{3}\.json|scene\.json|meta\.json)");
      for (const auto& e : fs::directory_iterator(out))
        if (e.is_regular_file() && std::regex_match(e.path().filename().string(), ours)) fs::remove(e.path());
    }
  }
  const Scene scene = make_scene(spec);
  const auto sample = generate_dataset(scene, a.views, a.width, a.height, a.ring_radius);
  write_dataset(a.out_dir, spec, sample);
}

std::string cmd_train(const TrainArgs& a, const WarnFn& warn) {
  RunConfig cfg = read_config(a.config_path);
  if (!a.data_dirs.empty()) cfg.data_dirs = a.data_dirs;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (cfg.data_dirs.empty()) throw ValidationError("no training data: pass --data or set paths.data");
  if (cfg.out_dir.empty()) throw ValidationError("no output directory: pass --out or set paths.out");
  if (a.steps && *a.steps < 0) throw ValidationError("--steps must be non-negative");

  const auto data = load_all(cfg.data_dirs, warn);
  std::vector<Scene> scenes;
  for (const auto& d : data) scenes.push_back(make_scene(d.spec));
  std::vector<TrainingScene> ts;
  for (std::size_t i = 0; i < data.size(); ++i) ts.push_back({&scenes[i], &data[i].sample});

  std::unique_ptr<TrainState> state;
  if (!a.resume.empty()) {
    auto ck = load_checkpoint(a.resume);
    if (config_hash(ck.config) != config_hash(cfg)) {
      throw ValidationError("checkpoint " + a.resume + " was written under a different config");
    }
    state = std::move(ck.state);
  } else {
    state = initial_state(cfg);
  }
  const int steps = a.steps.value_or(std::max<long>(0, cfg.train.loss.iters_pretrain - state->step));

  fs::create_directories(cfg.out_dir);
  auto log = open_log((fs::path(cfg.out_dir) / "train_log.jsonl").string(), !a.resume.empty());
  const auto on_step = [&](const StepLosses& s) {
    log << log_line(s) << '\n' << std::flush;
    if (s.step % cfg.checkpoint_every == 0) {
      save_checkpoint(numbered(cfg.out_dir, "ckpt", s.step, 6, "dfck"), *state, cfg, utc_timestamp());
    }
  };
  try {
    pretrain(*state, ts, cfg.train, steps, on_step);
  } catch (const NumericalError&) {
    save_checkpoint((fs::path(cfg.out_dir) / "last_good.dfck").string(), *state, cfg, utc_timestamp());
    throw;
  }
  const std::string final_path = (fs::path(cfg.out_dir) / "final.dfck").string();
  save_checkpoint(final_path, *state, cfg, utc_timestamp());
  return final_path;
}

std::string cmd_finetune(const FinetuneArgs& a, const WarnFn& warn) {
  auto ck = load_checkpoint(a.checkpoint);
  const auto data = load_all({a.data_dir}, warn);
  const auto& sample = data.front().sample;
  if (sample.views.size() < 2) throw ValidationError("leave-one-out finetuning needs at least two views");
  if (a.out_dir.empty()) throw ValidationError("no output directory given");
  RunConfig cfg = ck.config;
  if (a.geometry_steps) cfg.train.loss.iters_ft_geometry = *a.geometry_steps;
  if (a.color_steps) cfg.train.loss.iters_ft_color = *a.color_steps;
  if (a.random_view) cfg.train.random_finetune_view = true;
  validate(cfg.train.loss);

  fs::create_directories(a.out_dir);
  auto log = open_log((fs::path(a.out_dir) / "finetune_log.jsonl").string(), false);
  auto& state = *ck.state;
  const auto on_step = [&](const StepLosses& s) {
    log << log_line(s) << '\n' << std::flush;
    if (s.step % cfg.checkpoint_every == 0) {
      save_checkpoint(numbered(a.out_dir, "ckpt", s.step, 6, "dfck"), state, cfg, utc_timestamp());
    }
  };
  try {
    finetune(state, sample, cfg.train, on_step);
  } catch (const NumericalError&) {
    save_checkpoint((fs::path(a.out_dir) / "last_good.dfck").string(), state, cfg, utc_timestamp());
    throw;
  }
  const std::string final_path = (fs::path(a.out_dir) / "final.dfck").string();
  save_checkpoint(final_path, state, cfg, utc_timestamp());
  return final_path;
}

std::vector<std::string> cmd_render(const RenderArgs& a, const WarnFn& warn) {
  if (a.orbit < 0) throw ValidationError("--orbit must be positive");
  if (a.camera_paths.empty() && a.orbit == 0) throw ValidationError("give --camera or --orbit");
  const auto ck = load_checkpoint(a.checkpoint);
  const auto data = load_all({a.data_dir}, warn);
  const auto& sample = data.front().sample;

  std::vector<Camera> cams;
  for (const auto& p : a.camera_paths) cams.push_back(camera_from_json(read_json_file(p)));
  if (a.orbit > 0) {
    // Same radius, height and phase as the first input camera.
    const Scene scene = make_scene(data.front().spec);
    const Vec3 c = scene.bounds().center();
    const Vec3 e = sample.views.front().camera.center() - c;
    const double r = std::hypot(e.x(), e.y());
    const double phase = std::atan2(e.y(), e.x()) * 180.0 / M_PI;
    for (const auto& cam : ring_cameras(scene, a.orbit, sample.width(), sample.height(), r, phase, e.z()))
      cams.push_back(cam);
  }

  fs::create_directories(a.out_dir);
  std::vector<std::string> written;
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const auto& cam = cams[k];
    if (sample.bounds.contains(cam.center())) emit(warn, "camera " + std::to_string(k) + " is inside the scene bounds");
    else if (cam.to_camera(sample.bounds.center()).z() <= 0.0)
      emit(warn, "camera " + std::to_string(k) + " faces away from the scene");
    const auto img = render_image(*ck.state->model, sample, cam, ck.config.train.render);
    written.push_back(numbered(a.out_dir, "view", static_cast<long>(k), 3, "png"));
    write_png(written.back(), img.image);
  }
  return written;
}

std::size_t cmd_mesh(const MeshArgs& a, const WarnFn& warn) {
  if (a.grid < 16) throw ValidationError("--grid must be at least 16");
  const auto ck = load_checkpoint(a.checkpoint);
  const auto data = load_all({a.data_dir}, warn);
  const auto res = extract_mesh(*ck.state->model, data.front().sample, a.grid);
  if (res.empty) emit(warn, "no surface crossing found; the mesh is empty");
  if (const auto parent = fs::path(a.out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_obj(a.out_path, res.mesh);
  return res.mesh.faces.size();
}

MetricReport cmd_eval(const EvalArgs& a, const WarnFn& warn) {
  if (a.images_dir.empty() && a.mesh_path.empty()) throw ValidationError("give predicted --images, --mesh or both");
  const auto gt = read_dataset(a.gt_dir);
  MetricReport r;
  r.scene_id = gt.sample.scene_id;
  r.created = utc_timestamp();
  if (!a.checkpoint.empty()) r.config_hash = config_hash(load_checkpoint(a.checkpoint).config);

  if (!a.images_dir.empty()) {
    bool masked = !a.full_frame;
    if (masked && !gt.has_masks) {
      emit(warn, "ground-truth masks are missing; PSNR falls back to the full frame");
      masked = false;
    }
    for (std::size_t k = 0; k < gt.sample.views.size(); ++k) {
      const auto& v = gt.sample.views[k];
      const Image pred = read_png_image(numbered(a.images_dir, "view", static_cast<long>(k), 3, "png"));
      if (pred.width != v.image.width || pred.height != v.image.height) {
        throw ValidationError("view " + std::to_string(k) + ": predicted resolution differs from the ground truth");
      }
      bool use_mask = masked;
      if (use_mask && v.mask.count() == 0) {
        emit(warn, "view " + std::to_string(k) + " has an empty mask; PSNR uses the full frame");
        use_mask = false;
        masked = false;
      }
      r.psnr.push_back(psnr(pred, v.image, use_mask ? &v.mask : nullptr));
      r.ssim.push_back(ssim(pred, v.image));
    }
    r.masked_psnr = masked;
  }

  if (!a.mesh_path.empty()) {
    const auto mesh = read_obj(a.mesh_path);
    if (mesh.empty()) {
      r.errors.push_back("chamfer, p2s: the predicted mesh is empty");
    } else {
      const auto e = surface_errors_to_scene(mesh, make_scene(gt.spec));
      r.chamfer = e.chamfer;
      r.p2s = e.p2s;
    }
  }

  if (!a.out_json.empty()) {
    if (const auto parent = fs::path(a.out_json).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_text_file(a.out_json, report_to_json(r) + "\n");
  }
  if (!a.csv_path.empty()) {
    const bool fresh = !fs::exists(a.csv_path) || fs::file_size(a.csv_path) == 0;
    std::ofstream csv(a.csv_path, std::ios::app);
    if (!csv) throw ValidationError("cannot open " + a.csv_path);
    if (fresh) csv << report_csv_header() << '\n';
    csv << report_csv_row(r) << '\n';
  }
  return r;
}

}  // namespace dfield

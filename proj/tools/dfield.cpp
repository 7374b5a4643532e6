#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "dfield/errors.hpp"
#include "dfield/io/commands.hpp"

using namespace dfield;

namespace {

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface and radiance field pipeline on synthetic multi-view scenes"};
  app.require_subcommand(1);

  SynthArgs synth;
  std::uint64_t synth_seed = 0;
  int res = 128;
  auto* s = app.add_subcommand("synth", "Render a dataset directory from a scene spec");
  s->add_option("spec", synth.spec_path, "scene spec JSON")->required()->check(CLI::ExistingFile);
  s->add_option("out", synth.out_dir, "output directory")->required();
  s->add_option("--views", synth.views, "number of views (>= 2)")->capture_default_str();
  auto* res_opt = s->add_option("--res", res, "square image resolution")->capture_default_str();
  s->add_option("--width", synth.width, "image width")->excludes(res_opt);
  s->add_option("--height", synth.height, "image height")->excludes(res_opt);
  auto* seed_opt = s->add_option("--seed", synth_seed, "override the scene file's seed");
  s->add_option("--radius", synth.ring_radius, "camera ring radius")->capture_default_str();
  s->add_flag("--force", synth.force, "overwrite dataset files in a non-empty directory");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Pretrain on one or more dataset directories");
  t->add_option("config", train.config_path, "run config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--data", train.data_dirs, "dataset directories (default: paths.data)");
  t->add_option("--out", train.out_dir, "output directory (default: paths.out)");
  t->add_option("--resume", train.resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_option("--steps", train.steps, "steps to run (default: up to iters_pretrain)");

  FinetuneArgs ft;
  auto* f = app.add_subcommand("finetune", "Two-phase leave-one-out finetuning on one scene");
  f->add_option("checkpoint", ft.checkpoint, "pretrained checkpoint")->required()->check(CLI::ExistingFile);
  f->add_option("data", ft.data_dir, "dataset directory")->required();
  f->add_option("out", ft.out_dir, "output directory")->required();
  f->add_option("--geometry-steps", ft.geometry_steps, "phase one steps (default from config)");
  f->add_option("--color-steps", ft.color_steps, "phase two steps (default from config)");
  f->add_flag("--random-view", ft.random_view, "draw the held-out view at random instead of round-robin");

  RenderArgs render;
  auto* r = app.add_subcommand("render", "Render novel views");
  r->add_option("checkpoint", render.checkpoint)->required()->check(CLI::ExistingFile);
  r->add_option("data", render.data_dir, "dataset directory with the input views")->required();
  r->add_option("out", render.out_dir, "output directory")->required();
  r->add_option("--camera", render.camera_paths, "camera JSON (repeatable)")->check(CLI::ExistingFile);
  r->add_option("--orbit", render.orbit, "N cameras on the input camera ring");

  MeshArgs mesh;
  auto* m = app.add_subcommand("mesh", "Extract the 0.5 iso-surface as OBJ");
  m->add_option("checkpoint", mesh.checkpoint)->required()->check(CLI::ExistingFile);
  m->add_option("data", mesh.data_dir, "dataset directory with the input views")->required();
  m->add_option("out", mesh.out_path, "OBJ path")->required();
  m->add_option("--grid", mesh.grid, "grid nodes per axis (>= 16)")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predicted images and/or a mesh against a dataset");
  e->add_option("gt", ev.gt_dir, "ground-truth dataset directory")->required();
  e->add_option("--images", ev.images_dir, "directory of predicted view_<k>.png");
  e->add_option("--mesh", ev.mesh_path, "predicted OBJ")->check(CLI::ExistingFile);
  e->add_option("--out", ev.out_json, "report JSON path")->required();
  e->add_option("--csv", ev.csv_path, "append a CSV row here");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint whose config hash goes into the report");
  e->add_flag("--full-frame", ev.full_frame, "PSNR over every pixel instead of the foreground");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    apply_thread_env();
    if (*s) {
      if (*res_opt) synth.width = synth.height = res;
      if (*seed_opt) synth.seed = synth_seed;
      cmd_synth(synth);
    } else if (*t) {
      std::cout << cmd_train(train, warn) << '\n';
    } else if (*f) {
      std::cout << cmd_finetune(ft, warn) << '\n';
    } else if (*r) {
      for (const auto& p : cmd_render(render, warn)) std::cout << p << '\n';
    } else if (*m) {
      std::cout << cmd_mesh(mesh, warn) << " triangles\n";
    } else if (*e) {
      const auto rep = cmd_eval(ev, warn);
      std::cout << report_csv_header() << '\n' << report_csv_row(rep) << '\n';
    }
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}

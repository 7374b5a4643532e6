#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "dfield/errors.hpp"
#include "dfield/io/commands.hpp"
#include "dfield/io/dataset_io.hpp"
#include "dfield/io/obj.hpp"
#include "dfield/io/png.hpp"
#include "support.hpp"

using namespace dfield;
using namespace testing;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / ("dfield_cmd_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string operator/(const std::string& n) const { return (root / n).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

const char* kSphereSpec = R"({"id": "sphere", "seed": 1,
  "primitives": [{"kind": "sphere", "radius": 1.0, "texture": {"kind": "checker"}}]})";

const char* kSmokeConfig = R"({"schema_version": 1, "seed": 2, "checkpoint_every": 5,
  "model": {"feature_channels": 8, "encoder_stages": 2, "refine_blocks": 1, "pos_bands": 2, "col_bands": 2,
            "dir_bands": 2, "hidden": 16, "double_layers": 2, "geometry_layers": 1, "texture_layers": 1,
            "encoder_dim": 16, "decoder_dim": 8, "ffn": 16, "heads": 2},
  "loss": {"n_geo": 32, "n_reg": 16, "n_rays": 16, "lr_pretrain": 1e-3, "lr_finetune": 1e-4,
           "iters_pretrain": 10, "iters_ft_geometry": 3, "iters_ft_color": 3},
  "render": {"n_s": 16, "n_r": 4}})";

}  // namespace

TEST_CASE("pipeline commands end to end") {
  Workspace ws;
  write_text_file(ws / "spec.json", kSphereSpec);
  write_text_file(ws / "config.json", kSmokeConfig);
  std::vector<std::string> warnings;
  const WarnFn warn = [&](const std::string& w) { warnings.push_back(w); };

  SUBCASE("synth layout, idempotence and refusal") {
    SynthArgs s{ws / "spec.json", ws / "data", 6, 32, 32, std::nullopt, 3.0, false};
    cmd_synth(s);
    int png = 0, json = 0;
    for (const auto& e : fs::directory_iterator(ws / "data")) {
      png += e.path().extension() == ".png";
      json += e.path().extension() == ".json";
    }
    CHECK(png == 12);
    CHECK(json == 8);  // 6 cameras, scene, meta
    const std::string first = slurp(ws / "data/view_003.png");
    CHECK_THROWS_AS(cmd_synth(s), ValidationError);
    s.force = true;
    write_text_file(ws / "data/notes.txt", "keep me");
    cmd_synth(s);
    CHECK(slurp(ws / "data/view_003.png") == first);
    CHECK(fs::exists(ws / "data/notes.txt"));
    s.views = 1;
    CHECK_THROWS_AS(cmd_synth(s), ValidationError);
    s.views = 6;
    s.seed = 9;
    cmd_synth(s);
    CHECK(read_json_file(ws / "data/scene.json")["seed"] == 9);
  }

  SUBCASE("train, resume, finetune, render, mesh and eval") {
    cmd_synth({ws / "spec.json", ws / "data", 4, 24, 24, std::nullopt, 3.0, false});

    const auto final_ck = cmd_train({ws / "config.json", {ws / "data"}, ws / "run", "", std::nullopt}, warn);
    CHECK(fs::exists(final_ck));
    const auto lines = read_lines(ws / "run/train_log.jsonl");
    REQUIRE(lines.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(lines[i]["step"] == i + 1);
    CHECK(lines[0].contains("geometry"));
    CHECK(lines[0].contains("seconds"));
    CHECK(fs::exists(ws / "run/ckpt_000005.dfck"));

    // Resume from step 5 for 3 steps: the log continues at 6, 7, 8.
    cmd_train({ws / "config.json", {ws / "data"}, ws / "resumed", ws / "run/ckpt_000005.dfck", 3}, warn);
    const auto more = read_lines(ws / "resumed/train_log.jsonl");
    REQUIRE(more.size() == 3);
    CHECK(more.front()["step"] == 6);
    CHECK(more.back()["step"] == 8);
    CHECK(load_checkpoint(ws / "resumed/final.dfck").state->step == 8);

    const auto ft = cmd_finetune({final_ck, ws / "data", ws / "ft", std::nullopt, std::nullopt, false}, warn);
    const auto ft_lines = read_lines(ws / "ft/finetune_log.jsonl");
    CHECK(ft_lines.size() == 6);
    CHECK(ft_lines.front()["phase"] == "finetune_geometry");
    CHECK(ft_lines.back()["phase"] == "finetune_color");
    CHECK(load_checkpoint(ft).state->step == 16);

    const auto views = cmd_render({final_ck, ws / "data", ws / "orbit", {}, 4}, warn);
    CHECK(views.size() == 4);
    const std::string bytes = slurp(views[2]);
    cmd_render({final_ck, ws / "data", ws / "orbit2", {}, 4}, warn);
    CHECK(slurp(ws / "orbit2/view_002.png") == bytes);
    // Re-render the input cameras for image metrics.
    std::vector<std::string> cams;
    for (const auto& v : read_dataset(ws / "data").sample.views) {
      cams.push_back(ws / ("cam" + std::to_string(cams.size()) + ".json"));
      write_text_file(cams.back(), camera_to_json(v.camera).dump());
    }
    CHECK(cmd_render({final_ck, ws / "data", ws / "inputs", cams, 0}, warn).size() == 4);
    CHECK_THROWS_AS(cmd_render({final_ck, ws / "data", ws / "none", {}, 0}, warn), ValidationError);

    CHECK_THROWS_AS(cmd_mesh({final_ck, ws / "data", ws / "m.obj", 8}, warn), ValidationError);
    cmd_mesh({final_ck, ws / "data", ws / "m.obj", 16}, warn);
    CHECK(fs::exists(ws / "m.obj"));

    const auto rep = cmd_eval({ws / "data", ws / "inputs", ws / "m.obj", ws / "r.json", ws / "r.csv", final_ck, false},
                              warn);
    CHECK(rep.psnr.size() == 4);
    CHECK(rep.config_hash.size() == 16);
    CHECK(report_from_json(slurp(ws / "r.json")).psnr == rep.psnr);
    CHECK(slurp(ws / "r.csv").rfind(report_csv_header() + "\n", 0) == 0);
  }

  SUBCASE("eval fixtures") {
    cmd_synth({ws / "spec.json", ws / "data", 3, 24, 24, std::nullopt, 3.0, false});
    auto self = cmd_eval({ws / "data", ws / "data", "", ws / "self.json", "", "", false}, warn);
    for (double p : self.psnr) CHECK(p == 99.0);
    for (double s : self.ssim) CHECK(std::abs(s - 1.0) < 1e-9);
    CHECK(self.masked_psnr);

    // A fine marching-cubes mesh of the analytic sphere scores near zero.
    const Scene scene = make_scene(read_spec(ws / "data/scene.json"));
    const SurfaceFn field = [&](const std::vector<Vec3>& pts) {
      std::vector<double> s(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) s[i] = 0.5 - scene.sdf(pts[i]);
      return s;
    };
    write_obj(ws / "gt.obj", extract_mesh(field, scene.bounds(), 96).mesh);
    const auto geo = cmd_eval({ws / "data", "", ws / "gt.obj", ws / "geo.json", "", "", false}, warn);
    REQUIRE(geo.chamfer);
    CHECK(*geo.chamfer < 5e-3);
    CHECK(*geo.p2s < 5e-3);

    write_obj(ws / "empty.obj", TriangleMesh{});
    const auto none = cmd_eval({ws / "data", "", ws / "empty.obj", ws / "e.json", "", "", false}, warn);
    CHECK(!none.chamfer);
    CHECK(none.errors.size() == 1);

    fs::copy(ws / "data", ws / "nomask");
    for (int k = 0; k < 3; ++k) fs::remove(ws / ("nomask/mask_00" + std::to_string(k) + ".png"));
    warnings.clear();
    const auto full = cmd_eval({ws / "nomask", ws / "data", "", ws / "f.json", "", "", false}, warn);
    CHECK(!full.masked_psnr);
    CHECK(!warnings.empty());

    cmd_synth({ws / "spec.json", ws / "small", 3, 16, 16, std::nullopt, 3.0, false});
    CHECK_THROWS_AS(cmd_eval({ws / "data", ws / "small", "", ws / "x.json", "", "", false}, warn), ValidationError);
  }

  SUBCASE("validation and numerical failures") {
    cmd_synth({ws / "spec.json", ws / "data", 3, 24, 24, std::nullopt, 3.0, false});
    write_text_file(ws / "bad.json", R"({"schema_version": 1, "loss": {"lamda_g": 1}})");
    CHECK_THROWS_AS(cmd_train({ws / "bad.json", {ws / "data"}, ws / "x", "", std::nullopt}), ValidationError);
    CHECK_THROWS_AS(cmd_train({ws / "config.json", {}, ws / "x", "", std::nullopt}), ValidationError);

    // Leave-one-out needs two views.
    const auto ck = cmd_train({ws / "config.json", {ws / "data"}, ws / "run", "", 2}, warn);
    const Scene scene = make_scene(read_spec(ws / "spec.json"));
    const auto one = render_views(scene, {read_dataset(ws / "data").sample.views[0].camera});
    write_dataset(ws / "single", read_spec(ws / "spec.json"), one);
    CHECK_THROWS_AS(cmd_finetune({ck, ws / "single", ws / "ft", std::nullopt, std::nullopt, false}), ValidationError);

    // A poisoned parameter makes the loss non-finite; the state before the
    // failing step is kept.
    auto loaded = load_checkpoint(ck);
    auto& w = loaded.state->model->params().params().front().var.mutable_value();
    w.setConstant(std::numeric_limits<float>::quiet_NaN());
    save_checkpoint(ws / "poison.dfck", *loaded.state, loaded.config, "2026-01-01T00:00:00Z");
    CHECK_THROWS_AS(cmd_train({ws / "config.json", {ws / "data"}, ws / "nan", ws / "poison.dfck", 3}), NumericalError);
    CHECK(fs::exists(ws / "nan/last_good.dfck"));
    CHECK(!fs::exists(ws / "nan/final.dfck"));
    CHECK(load_checkpoint(ws / "nan/last_good.dfck").state->step == 2);
  }
}

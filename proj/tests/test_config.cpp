#include "hetnet/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "hetnet/common.hpp"
#include "hetnet/manifest.hpp"

using namespace hetnet;
namespace fs = std::filesystem;

TEST_CASE("minimal config fills documented defaults") {
  auto c = config_from_text("dataset_root=/data\ncategory=bolt\n");
  CHECK(c.dataset_root == "/data");
  CHECK(c.category == "bolt");
  CHECK(c.image_size == 256);
  CHECK(c.alpha == 0.1);
  CHECK(c.learning_rate == 0.005);
  CHECK(c.adam_beta1 == 0.5);
  CHECK(c.adam_beta2 == 0.999);
  CHECK(c.epochs == 200);
  CHECK(c.batch_size == 16);
  CHECK(c.layers_used == std::vector<int>{1, 2, 3});
  CHECK(c.noise_type == NoiseType::kMultivariateGaussian);
  CHECK(c.lmgn_enabled);
  CHECK(c.algf_enabled);
  CHECK(c.toy_mode);
  CHECK(c.smoothing_sigma == 4.0);
  CHECK(c.pro_fpr_limit == 0.3);
  // Toy mode defaults normalization to 0.5 / 0.5.
  CHECK(c.norm_mean[0] == 0.5);
  CHECK(c.norm_std[2] == 0.5);
}

TEST_CASE("paper mode defaults normalization to pretraining statistics") {
  auto c = config_from_text("toy_mode=false\nlmgn_enabled=true\n");
  CHECK(c.norm_mean[0] == doctest::Approx(0.485));
  CHECK(c.norm_std[0] == doctest::Approx(0.229));
}

TEST_CASE("comments, blank lines, and whitespace are tolerated") {
  auto c = config_from_text(
      "# experiment\n"
      "\n"
      "  alpha = 0.25   # regularizer\n"
      "epochs=3\n");
  CHECK(c.alpha == 0.25);
  CHECK(c.epochs == 3);
}

TEST_CASE("unknown keys are rejected with their names listed") {
  CHECK_THROWS_WITH_AS(config_from_text("alhpa=0.1\n"), doctest::Contains("alhpa"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("foo=1\nbar=2\n"), doctest::Contains("foo"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("foo=1\nbar=2\n"), doctest::Contains("bar"), Error);
}

TEST_CASE("invariant violations name the offending field") {
  CHECK_THROWS_WITH_AS(config_from_text("alpha=-1\n"), doctest::Contains("alpha"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("layers_used=2,1\n"),
                       doctest::Contains("strictly increasing"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("layers_used=\n"), doctest::Contains("layers_used"),
                       Error);
  CHECK_THROWS_WITH_AS(config_from_text("learning_rate=0\n"),
                       doctest::Contains("learning_rate"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("epochs=0\n"), doctest::Contains("epochs"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("image_size=100\n"), doctest::Contains("image_size"),
                       Error);
  CHECK_THROWS_WITH_AS(config_from_text("alpha=abc\n"), doctest::Contains("alpha"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("noise_type=gaussian\n"),
                       doctest::Contains("noise_type"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("lmgn_enabled=true\nnoise_type=none\n"),
                       doctest::Contains("lmgn_enabled"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("noise_layers=2\nlayers_used=1,3\n"),
                       doctest::Contains("noise_layers"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("alpha=0.1\nalpha=0.2\n"),
                       doctest::Contains("duplicate"), Error);
}

TEST_CASE("overrides apply after the file and still validate") {
  auto c = config_from_text("alpha=0.1\nepochs=5\n", {"alpha=0.7", "batch_size=2"});
  CHECK(c.alpha == 0.7);
  CHECK(c.epochs == 5);
  CHECK(c.batch_size == 2);
  CHECK_THROWS_WITH_AS(config_from_text("", {"alpha=-3"}), doctest::Contains("alpha"), Error);
  CHECK_THROWS_WITH_AS(config_from_text("", {"noalpha"}), doctest::Contains("override"), Error);
}

TEST_CASE("serialize and reparse is the identity") {
  auto c = config_from_text(
      "dataset_root=/d\ncategory=x\nalpha=0.3\nlayers_used=1,3\nsmoothing_sigma=none\n"
      "noise_layers=3\nseed=99\nsynth_defect_types=blob\noutput_dir=/tmp/o\n"
      "patch_side_fractions=0.25,0.75\nadam_betas=0.4,0.99\n");
  const std::string text = serialize_config(c);
  auto r = config_from_text(text);
  CHECK(serialize_config(r) == text);
  CHECK(r.smoothing_sigma == 0.0);
  CHECK(r.layers_used == std::vector<int>{1, 3});
  CHECK(r.noise_layers == std::vector<int>{3});
  CHECK(r.patch_frac_hi == 0.75);
  CHECK(config_fingerprint(r) == config_fingerprint(c));

  auto c2 = config_from_text(text, {"seed=100"});
  CHECK(config_fingerprint(c2) != config_fingerprint(c));
}

TEST_CASE("noise layer selection defaults to all used layers") {
  auto c = config_from_text("layers_used=1,2\n");
  CHECK(c.effective_noise_layers() == std::vector<int>{1, 2});
  auto c2 = config_from_text("layers_used=1,2,3\nnoise_layers=2\n");
  CHECK(c2.effective_noise_layers() == std::vector<int>{2});
}

TEST_CASE("output dir falls back to the environment variable") {
  ::setenv("HETNET_OUTPUT_DIR", "/tmp/envout", 1);
  auto c = config_from_text("");
  CHECK(c.output_dir == "/tmp/envout");
  CHECK(c.resolved_stats_path() == "/tmp/envout/noise_stats.hntc");
  ::unsetenv("HETNET_OUTPUT_DIR");
  auto c2 = config_from_text("output_dir=/tmp/explicit\n");
  CHECK(c2.output_dir == "/tmp/explicit");
  auto c3 = config_from_text("stats_path=/s.hntc\n");
  CHECK(c3.resolved_stats_path() == "/s.hntc");
}

TEST_CASE("load_config reads files and reports missing ones") {
  const fs::path p = fs::temp_directory_path() / "hetnet_cfg_test.cfg";
  {
    std::ofstream f(p);
    f << "alpha=0.2\nseed=5\n";
  }
  auto c = load_config(p.string());
  CHECK(c.alpha == 0.2);
  CHECK(c.seed == 5);
  fs::remove(p);
  CHECK_THROWS_WITH_AS(load_config(p.string()), doctest::Contains("cannot open"), Error);
}

TEST_CASE("manifest records artifacts and verifies their existence") {
  const fs::path dir = fs::temp_directory_path() / "hetnet_manifest_test";
  fs::create_directories(dir);
  const fs::path art = dir / "artifact.bin";
  { std::ofstream(art) << "x"; }

  auto cfg = config_from_text("seed=3\noutput_dir=" + dir.string() + "\n");
  RunManifest m("train", cfg);
  m.add_artifact("blob", art.string());
  m.set_loss_trace({1.0, 0.5, 0.25});
  const std::string written = m.write(dir.string());
  CHECK(fs::exists(written));

  std::ifstream f(written);
  nlohmann::json j;
  f >> j;
  CHECK(j["command"] == "train");
  CHECK(j["seed"] == 3);
  CHECK(j["loss_trace"].size() == 3);
  CHECK(j["artifacts"]["blob"] == art.string());
  CHECK(j["config_fingerprint"] == config_fingerprint(cfg));

  RunManifest bad("train", cfg);
  bad.add_artifact("gone", (dir / "missing.bin").string());
  CHECK_THROWS_WITH_AS(bad.write(dir.string()), doctest::Contains("missing.bin"), Error);
  fs::remove_all(dir);
}

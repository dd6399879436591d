#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hpnet/cli.hpp"
#include "hpnet/errors.hpp"

using namespace hpnet;
using namespace hpnet::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hpnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* leaf) const { return (path / leaf).string(); }
};

const char* kTinyConfig =
    "# tiny model\n"
    "levels = 2\n"
    "channels = 2,3\n"
    "block_depth = 2\n"
    "block_stride = 2\n"
    "frame_size = 12\n"
    "n = 3\n"
    "frames = 8\n"
    "motion = mixed\n";

}  // namespace

TEST_CASE("config text and keys") {
  RunConfig cfg;
  apply_config_text(cfg, kTinyConfig);
  cfg.finalize();
  CHECK(cfg.net.levels == 2);
  CHECK(cfg.net.channels == std::vector<std::size_t>{2, 3});
  CHECK(cfg.net.block_depth == 2);
  CHECK(cfg.net.frame_height == 12);
  CHECK(cfg.motion == "mixed");

  RunConfig ff;
  ff.set("scheme", "ff");
  ff.set("frame_size", "16x24");
  ff.finalize();
  CHECK(ff.net.block_depth == 1);
  CHECK(ff.net.frame_width == 24);
  CHECK(ff.net.channels == std::vector<std::size_t>{8, 16});

  RunConfig bad;
  try {
    bad.set("learning_rate", "1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "learning_rate");
  }
  CHECK_THROWS_AS(bad.set("levels", "two"), ConfigError);
  RunConfig mismatch;
  mismatch.set("levels", "3");
  mismatch.set("channels", "4,4");
  CHECK_THROWS_AS(mismatch.finalize(), ConfigError);
  for (auto k : config_keys()) CHECK(!k.empty());
}

TEST_CASE("PGM round trip is quantization exact") {
  TempDir dir("hpnet_unit_pgm");
  Frame f(5, 7);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = double(i) / 34.0;
  write_pgm(dir / "a.pgm", f);
  const Frame g = read_pgm(dir / "a.pgm");
  REQUIRE(g.height == 5);
  REQUIRE(g.width == 7);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) CHECK(g.pixels[i] == quantize_pixel(f.pixels[i]) / 255.0);
  write_pgm(dir / "b.pgm", g);
  CHECK(slurp(dir / "a.pgm") == slurp(dir / "b.pgm"));
  std::ofstream(dir / "c.pgm") << "P2\n1 1\n255\n0\n";
  CHECK_THROWS_AS(read_pgm(dir / "c.pgm"), FormatError);
  CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), IoError);
}

TEST_CASE("gen-data is deterministic and handles the empty set") {
  TempDir dir("hpnet_unit_gen");
  std::ofstream(dir / "cfg.txt") << kTinyConfig;
  auto r = invoke({"gen-data", "--config", dir / "cfg.txt", "--out", dir / "a.hpnd", "--seed", "4"});
  CHECK(r.code == 0);
  CHECK(invoke({"gen-data", "--config", dir / "cfg.txt", "--out", dir / "b.hpnd", "--seed", "4"}).code == 0);
  CHECK(slurp(dir / "a.hpnd") == slurp(dir / "b.hpnd"));
  CHECK(read_dataset(dir / "a.hpnd").size() == 3);
  CHECK(invoke({"gen-data", "--out", dir / "e.hpnd", "--n", "0"}).code == 0);
  CHECK(read_dataset(dir / "e.hpnd").empty());
}

TEST_CASE("usage and configuration errors exit with 2") {
  TempDir dir("hpnet_unit_err");
  std::ofstream(dir / "bad.txt") << "levels=2\nbogus_key=1\n";
  auto r = invoke({"gen-data", "--config", dir / "bad.txt"});
  CHECK(r.code == 2);
  CHECK(r.err.find("bogus_key") != std::string::npos);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"train", "--no-such-flag"}).code == 2);
  CHECK(invoke({"predict", "--checkpoint", dir / "missing.hpnc"}).code == 2);
  CHECK(invoke({"gen-data", "--out", "/nonexistent_dir_hpnet/x.hpnd"}).code == 2);
}

TEST_CASE("train, resume, predict and eval") {
  TempDir dir("hpnet_unit_train");
  std::ofstream(dir / "cfg.txt") << kTinyConfig;
  const std::string cfg = dir / "cfg.txt";

  CHECK(invoke({"train", "--config", cfg, "--epochs", "0", "--out", dir / "zero"}).code == 0);
  CHECK(fs::exists(dir.path / "zero" / "checkpoint.hpnc"));

  REQUIRE(invoke({"train", "--config", cfg, "--epochs", "2", "--out", dir / "full"}).code == 0);
  REQUIRE(invoke({"train", "--config", cfg, "--epochs", "1", "--out", dir / "half"}).code == 0);
  REQUIRE(invoke({"train", "--config", cfg, "--epochs", "1", "--out", dir / "half", "--checkpoint",
                  (dir.path / "half" / "checkpoint.hpnc").string()})
              .code == 0);
  CHECK(slurp(dir.path / "full" / "checkpoint.hpnc") == slurp(dir.path / "half" / "checkpoint.hpnc"));
  std::ifstream log(dir.path / "half" / "train_log.tsv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(log, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "epoch\ttrain_loss\tval_loss\tseconds");
  CHECK(lines[2].rfind("2\t", 0) == 0);

  // A model key that contradicts the checkpoint is refused.
  CHECK(invoke({"train", "--config", cfg, "--levels", "3", "--channels", "2,2,2", "--checkpoint",
                (dir.path / "full" / "checkpoint.hpnc").string(), "--out", dir / "x"})
            .code == 2);

  const std::string ckpt = (dir.path / "full" / "checkpoint.hpnc").string();
  CHECK(invoke({"predict", "--config", cfg, "--checkpoint", ckpt, "--seed-frames", "4", "--horizon",
                "4", "--out", dir / "pred"})
            .code == 0);
  CHECK(fs::exists(dir.path / "pred" / "pred_003.pgm"));
  CHECK(fs::exists(dir.path / "pred" / "gt_003.pgm"));
  CHECK(fs::exists(dir.path / "pred" / "seed_003.pgm"));
  CHECK(invoke({"predict", "--config", cfg, "--checkpoint", ckpt, "--seed-frames", "4", "--horizon",
                "0", "--out", dir / "pred0"})
            .code == 0);
  CHECK_FALSE(fs::exists(dir.path / "pred0" / "pred_000.pgm"));

  CHECK(invoke({"eval", "--config", cfg, "--checkpoint", ckpt, "--seed-frames", "4", "--horizon", "4",
                "--out", dir / "ev"})
            .code == 0);
  CHECK(fs::exists(dir.path / "ev" / "eval.tsv"));

  // Ground truth used as the prediction scores a perfect SSIM.
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "gt_%03d.pgm", i);
    std::snprintf(name + 16, 16, "pred_%03d.pgm", i);
    fs::copy_file(dir.path / "pred" / name, dir.path / "pred" / (name + 16),
                  fs::copy_options::overwrite_existing);
  }
  auto r = invoke({"eval", "--pred-dir", (dir.path / "pred").string()});
  CHECK(r.code == 0);
  std::ifstream ev(dir.path / "pred" / "eval.tsv");
  std::getline(ev, line);
  CHECK(line == "# hpnet-eval v1");
  std::getline(ev, line);
  if (line.rfind("frame", 0) == 0) std::getline(ev, line);
  std::istringstream row(line);
  double frame = -1, mse_v = -1, ssim_v = -1;
  row >> frame >> mse_v >> ssim_v;
  CHECK(frame == 0);
  CHECK(mse_v == 0.0);
  CHECK(ssim_v == doctest::Approx(1.0));
}

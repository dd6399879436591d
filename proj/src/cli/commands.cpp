#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "CLI11.hpp"
#include "hpnet/cli.hpp"
#include "hpnet/errors.hpp"
#include "hpnet/metrics.hpp"
#include "hpnet/neurophys.hpp"

namespace hpnet::cli {

namespace {

namespace fs = std::filesystem;

/// Thrown for failed checks; maps to exit code 1.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlagValue {
  std::string key, raw;
  CLI::Option* option = nullptr;
};

struct FlagSet {
  std::string config;
  std::deque<FlagValue> values;  // stable addresses for CLI11

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& v = values.emplace_back(FlagValue{key, {}, nullptr});
    v.option = app->add_option(flag, v.raw, help);
  }
};

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.pgm", prefix, i);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

fs::path out_dir(const RunConfig& cfg, const char* fallback) {
  return cfg.out.empty() ? fs::path(fallback) : fs::path(cfg.out);
}

std::vector<BlockSequence> to_blocks(const HPNetConfig& config, const std::vector<Sequence>& seqs,
                                     std::size_t begin, std::size_t end) {
  std::vector<BlockSequence> out;
  for (std::size_t i = begin; i < end; ++i)
    out.push_back(extract_blocks(seqs[i].frames, config.block_depth, config.block_stride));
  return out;
}

void check_frame_size(const HPNetConfig& config, const std::vector<Sequence>& seqs) {
  for (const auto& s : seqs)
    if (!s.frames.empty() && (s.frames[0].height != config.frame_height ||
                              s.frames[0].width != config.frame_width)) {
      throw ConfigError("frame_size", "data frames are " + std::to_string(s.frames[0].height) +
                                          "x" + std::to_string(s.frames[0].width) +
                                          ", network expects " +
                                          std::to_string(config.frame_height) + "x" +
                                          std::to_string(config.frame_width));
    }
}

TrainState load_required_checkpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("checkpoint", "required");
  if (!fs::exists(cfg.checkpoint)) throw IoError("checkpoint " + cfg.checkpoint + " not found");
  return load_checkpoint(cfg.checkpoint);
}

int cmd_gen_data(RunConfig& cfg, std::ostream& out) {
  const fs::path path = cfg.out.empty() ? fs::path("data.hpnd") : fs::path(cfg.out);
  const auto seqs = load_or_generate(cfg);
  write_dataset(path, seqs);
  out << "wrote " << seqs.size() << " sequences to " << path.string() << '\n';
  return 0;
}

int cmd_train(RunConfig& cfg, std::ostream& out) {
  TrainState state;
  const bool resume = !cfg.checkpoint.empty();
  if (resume) {
    state = load_required_checkpoint(cfg);
    if (!(state.config == cfg.net))
      for (const char* k : {"levels", "channels", "block_depth", "block_stride", "scheme",
                            "frame_size", "p_max", "upper_level_weight"})
        if (std::find(cfg.explicit_keys.begin(), cfg.explicit_keys.end(), k) !=
            cfg.explicit_keys.end())
          throw ConfigError(k, "differs from the checkpoint being resumed");
  } else {
    state = make_train_state(cfg.net, cfg.seed, cfg.adam);
  }
  const auto seqs = load_or_generate(cfg);
  check_frame_size(state.config, seqs);
  const std::size_t n_train = seqs.size() - std::min(cfg.val, seqs.size());
  const auto train_set = to_blocks(state.config, seqs, 0, n_train);
  const auto val_set = to_blocks(state.config, seqs, n_train, seqs.size());

  const fs::path dir = out_dir(cfg, "run");
  ensure_dir(dir);
  const fs::path log_path = dir / "train_log.tsv";
  const bool append = resume && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  if (!append) log << "epoch\ttrain_loss\tval_loss\tseconds\n";
  log << std::setprecision(10);

  TrainOptions opts;
  opts.clip_norm = cfg.clip_norm;
  opts.on_epoch = [&](const TrainRecord& r) {
    log << r.epoch << '\t' << r.train_loss << '\t' << r.val_loss << '\t' << r.seconds << '\n';
    log.flush();
    out << "epoch " << r.epoch << " train_loss " << r.train_loss;
    if (!std::isnan(r.val_loss)) out << " val_loss " << r.val_loss;
    out << '\n';
  };
  train(state, train_set, val_set, cfg.epochs, opts);
  const fs::path ckpt = dir / "checkpoint.hpnc";
  save_checkpoint(ckpt, state);
  out << "saved " << ckpt.string() << " after " << state.epochs_done << " epochs\n";
  return 0;
}

int cmd_predict(RunConfig& cfg, std::ostream& out) {
  const TrainState state = load_required_checkpoint(cfg);
  const auto seqs = load_or_generate(cfg);
  if (cfg.index >= seqs.size()) {
    throw ConfigError("index", std::to_string(cfg.index) + " is past the " +
                                   std::to_string(seqs.size()) + " sequences");
  }
  check_frame_size(state.config, seqs);
  const auto& frames = seqs[cfg.index].frames;
  const fs::path dir = out_dir(cfg, "pred");
  ensure_dir(dir);
  const auto pred = predict_frames(state.config, state.params, frames, cfg.seed_frames, cfg.horizon);
  for (std::size_t i = 0; i < cfg.seed_frames; ++i) write_pgm(dir / numbered("seed", i), frames[i]);
  std::size_t gt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    write_pgm(dir / numbered("pred", i), pred[i]);
    if (cfg.seed_frames + i < frames.size()) {
      write_pgm(dir / numbered("gt", i), frames[cfg.seed_frames + i]);
      ++gt;
    }
  }
  out << "wrote " << cfg.seed_frames << " seed, " << pred.size() << " predicted and " << gt
      << " ground-truth frames to " << dir.string() << '\n';
  return 0;
}

std::vector<Frame> read_series(const fs::path& dir, const char* prefix) {
  std::vector<Frame> out;
  while (fs::exists(dir / numbered(prefix, out.size()))) out.push_back(read_pgm(dir / numbered(prefix, out.size())));
  return out;
}

int cmd_eval(RunConfig& cfg, std::ostream& out) {
  EvalReport report;
  fs::path dir;
  if (!cfg.pred_dir.empty()) {
    dir = cfg.out.empty() ? fs::path(cfg.pred_dir) : fs::path(cfg.out);
    const auto seed = read_series(cfg.pred_dir, "seed");
    const auto pred = read_series(cfg.pred_dir, "pred");
    const auto gt = read_series(cfg.pred_dir, "gt");
    if (seed.empty() || pred.empty()) throw IoError("no seed_/pred_ frames in " + cfg.pred_dir);
    if (gt.size() < pred.size()) {
      throw IoError(cfg.pred_dir + " has " + std::to_string(pred.size()) + " predicted but " +
                    std::to_string(gt.size()) + " ground-truth frames");
    }
    const std::vector<Frame> truth(gt.begin(), gt.begin() + static_cast<std::ptrdiff_t>(pred.size()));
    report = evaluate(pred, truth, copy_last_baseline(seed, pred.size()));
  } else {
    dir = out_dir(cfg, "eval");
    const TrainState state = load_required_checkpoint(cfg);
    const auto seqs = load_or_generate(cfg);
    check_frame_size(state.config, seqs);
    const bool n_given = std::find(cfg.explicit_keys.begin(), cfg.explicit_keys.end(), "n") !=
                         cfg.explicit_keys.end();
    const std::size_t end = n_given && !cfg.data.empty()
                                ? std::min(seqs.size(), cfg.index + cfg.n)
                                : seqs.size();
    if (cfg.index >= end) throw ConfigError("index", "selects no sequences");
    for (std::size_t i = cfg.index; i < end; ++i) {
      const auto& frames = seqs[i].frames;
      if (frames.size() < cfg.seed_frames + cfg.horizon) {
        throw ConfigError("horizon", "sequence " + std::to_string(i) + " has only " +
                                         std::to_string(frames.size()) + " frames");
      }
      const auto pred = predict_frames(state.config, state.params, frames, cfg.seed_frames, cfg.horizon);
      const std::vector<Frame> seed(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(cfg.seed_frames));
      const std::vector<Frame> truth(frames.begin() + static_cast<std::ptrdiff_t>(cfg.seed_frames),
                                     frames.begin() + static_cast<std::ptrdiff_t>(cfg.seed_frames + cfg.horizon));
      const auto r = evaluate(pred, truth, copy_last_baseline(seed, cfg.horizon));
      if (report.mse.empty()) {
        report = r;
      } else {
        for (std::size_t f = 0; f < r.mse.size(); ++f) {
          report.mse[f] += r.mse[f];
          report.ssim[f] += r.ssim[f];
          report.baseline_mse[f] += r.baseline_mse[f];
          report.baseline_ssim[f] += r.baseline_ssim[f];
        }
      }
    }
    const double count = static_cast<double>(end - cfg.index);
    for (auto* v : {&report.mse, &report.ssim, &report.baseline_mse, &report.baseline_ssim})
      for (auto& x : *v) x /= count;
  }
  ensure_dir(dir);
  const fs::path path = dir / "eval.tsv";
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_eval_report(os, report);
  out << "mean mse " << report.mean_mse() << " ssim " << report.mean_ssim() << " (baseline mse "
      << report.mean_baseline_mse() << " ssim " << report.mean_baseline_ssim() << ")\n";
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_neurophys(RunConfig& cfg, std::ostream& out) {
  const fs::path dir = out_dir(cfg, "neurophys");
  ensure_dir(dir);
  std::ofstream summary(dir / "suppression.tsv");
  if (!summary) throw IoError("cannot write " + (dir / "suppression.tsv").string());
  summary << "protocol\tstage\tunit\tlevel\tindex\n" << std::setprecision(10);

  const std::size_t n = std::max<std::size_t>(cfg.pairs, 2);
  const auto pool = make_texture_pool(2 * n, cfg.net.frame_height, cfg.net.frame_width,
                                      derive_seed(cfg.seed, 1));
  for (ProtocolKind kind : {ProtocolKind::PairedSequence, ProtocolKind::StaticFamiliarity}) {
    const char* name = kind == ProtocolKind::PairedSequence ? "prediction" : "familiarity";
    StimulusProtocol protocol;
    protocol.kind = kind;
    const auto set = build_protocol_sequences(protocol, pool, n, derive_seed(cfg.seed, 2));
    TrainState state = make_train_state(cfg.net, derive_seed(cfg.seed, 3), cfg.adam);
    TrainOptions opts;
    opts.clip_norm = cfg.clip_norm;
    for (const char* stage : {"pre", "post"}) {
      if (std::string_view(stage) == "post") exposure_train(state, set.exposed, cfg.epochs, opts);
      const auto result = run_protocol(state.config, state.params, protocol, set);
      const fs::path path = dir / (std::string(name) + "_" + stage + ".tsv");
      std::ofstream os(path);
      if (!os) throw IoError("cannot write " + path.string());
      write_traces(os, result.traces);
      out << name << ' ' << stage << ':';
      for (const auto& s : result.indices) {
        summary << name << '\t' << stage << '\t' << unit_name(s.unit) << '\t' << s.level + 1
                << '\t' << s.index << '\n';
        out << ' ' << unit_name(s.unit) << s.level + 1 << '=' << std::fixed << std::setprecision(3)
            << s.index << std::defaultfloat;
      }
      out << '\n';
    }
  }
  out << "wrote traces to " << dir.string() << '\n';
  return 0;
}

int cmd_selftest(std::ostream& out) {
  const auto checks = run_selftest(out);
  std::string failed;
  for (const auto& c : checks) {
    out << (c.passed ? "ok   " : "FAIL ") << c.name;
    if (!c.detail.empty()) out << "  (" << c.detail << ')';
    out << '\n';
    if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
  }
  if (!failed.empty()) throw CheckFailure("selftest failed: " + failed);
  out << "selftest passed (" << checks.size() << " checks)\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hpnet: hierarchical predictive network on synthetic video"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  struct Sub {
    CLI::App* app;
    FlagSet flags;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto make = [&](const char* name, const char* help,
                  std::initializer_list<std::tuple<const char*, const char*, const char*>> opts) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, help);
    s->app->add_option("--config", s->flags.config, "key=value config file");
    for (const auto& [flag, key, h] : opts) s->flags.add(s->app, flag, key, h);
    subs.push_back(std::move(s));
    return subs.back().get();
  };
  using O = std::tuple<const char*, const char*, const char*>;
  const O seed{"--seed", "seed", "master seed"};
  const O scheme{"--scheme", "scheme", "ff, bf or bb"};
  const O levels{"--levels", "levels", "number of cortical modules"};
  const O channels{"--channels", "channels", "comma-separated widths per level"};
  const O epochs{"--epochs", "epochs", "training epochs"};
  const O outp{"--out", "out", "output path"};
  const O ckpt{"--checkpoint", "checkpoint", "checkpoint file"};
  const O horizon{"--horizon", "horizon", "predicted frames"};
  const O data{"--data", "data", "HPND dataset (generated from --seed if absent)"};
  const O n{"--n", "n", "number of sequences"};
  const O frames{"--frames", "frames", "frames per sequence"};
  const O size{"--size", "frame_size", "frame size, N or HxW"};
  const O motion{"--motion", "motion", "motion class or 'mixed'"};
  const O index{"--index", "index", "sequence index"};
  const O seed_frames{"--seed-frames", "seed_frames", "teacher-forced frames"};
  const O lr{"--lr", "lr", "Adam learning rate"};

  auto* gen = make("gen-data", "write a synthetic dataset", {seed, outp, n, frames, size, motion});
  auto* trn = make("train", "train and write checkpoint + log",
                   {seed, scheme, levels, channels, epochs, outp, ckpt, data, n, frames, size,
                    motion, lr, {"--val", "val", "held-out trailing sequences"}});
  auto* prd = make("predict", "roll out one sequence to PGM frames",
                   {seed, ckpt, data, horizon, outp, index, seed_frames, n, frames, size, motion});
  auto* evl = make("eval", "score a rollout against ground truth and the copy-last baseline",
                   {seed, ckpt, data, horizon, outp, index, seed_frames, n, frames, size, motion,
                    {"--pred-dir", "pred_dir", "directory written by predict"}});
  auto* nph = make("neurophys", "prediction and familiarity suppression protocols",
                   {seed, scheme, levels, channels, epochs, outp, size, lr,
                    {"--pairs", "pairs", "images per condition"}});
  auto* slf = make("selftest", "gradient checks and oracle equivalences", {});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  Sub* active = nullptr;
  for (auto& s : subs)
    if (s->app->parsed()) active = s.get();

  try {
    RunConfig cfg;
    if (active == nph) {
      cfg.net.levels = 3;
      cfg.net.channels = {8, 8, 16};
      cfg.net.frame_height = cfg.net.frame_width = 16;
      cfg.epochs = 400;
    }
    if (!active->flags.config.empty()) apply_config_file(cfg, active->flags.config);
    for (const auto& v : active->flags.values)
      if (v.option->count() > 0) cfg.set(v.key, v.raw);
    cfg.finalize();

    if (active == gen) return cmd_gen_data(cfg, out);
    if (active == trn) return cmd_train(cfg, out);
    if (active == prd) return cmd_predict(cfg, out);
    if (active == evl) return cmd_eval(cfg, out);
    if (active == nph) return cmd_neurophys(cfg, out);
    if (active == slf) return cmd_selftest(out);
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const CheckFailure& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hpnet::cli

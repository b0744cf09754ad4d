#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "starpose/checkpoint.hpp"
#include "starpose/config.hpp"
#include "starpose/datasynth.hpp"
#include "starpose/engine.hpp"
#include "starpose/errors.hpp"
#include "starpose/evalkit.hpp"
#include "starpose/plots.hpp"
#include "starpose/pose_io.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace starpose;

struct CliOptions {
  std::string config, in, out, pred, gt, variant;
  std::uint64_t seed = 0;
  double rho = 0.0;
  bool seed_set = false, rho_set = false;
  bool no_guidance = false, no_hpim = false;
};

// Flags override config-file keys; the merged result is echoed and saved
// next to the outputs so every run is auditable.
RunConfig effective_config(const CliOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed_set) cfg.seed = o.seed;
  if (o.rho_set) cfg.rho = o.rho;
  if (o.no_guidance) cfg.guidance_enabled = false;
  if (o.no_hpim) cfg.no_hpim = true;
  if (!o.variant.empty()) cfg.variant = o.variant;
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

void echo_and_save_config(const RunConfig& cfg, const std::string& out_path, bool out_is_dir) {
  const std::string text = dump_config(cfg);
  std::cout << "effective config:\n" << text;
  if (out_path.empty()) return;
  const std::string dest = out_is_dir
                               ? (fs::path(out_path) / "effective-config.json").string()
                               : out_path + ".effective-config.json";
  write_text(dest, text);
}

Tensor train_pose_matrix(const Dataset& ds) {
  std::size_t rows = 0;
  for (int s : ds.train_indices) rows += ds.seq3d[s].frames.size();
  if (rows == 0) throw DataError("dataset has no training frames");
  const int dim = 3 * ds.topology.num_joints;
  Tensor data({static_cast<std::int64_t>(rows), dim});
  std::int64_t r = 0;
  for (int s : ds.train_indices) {
    for (const Pose3d& p : ds.seq3d[s].frames) {
      std::copy(p.xyz.begin(), p.xyz.end(), data.row(r));
      ++r;
    }
  }
  return data;
}

int cmd_synth(const CliOptions& o) {
  const RunConfig cfg = effective_config(o);
  fs::create_directories(o.out);
  echo_and_save_config(cfg, o.out, true);
  const Dataset ds = synth_dataset(cfg.synth, cfg.seed);
  const std::string manifest = write_dataset(ds, o.out);
  std::cout << "wrote dataset manifest: " << manifest << "\n";
  return 0;
}

int cmd_fit_gmm(const CliOptions& o) {
  const RunConfig cfg = effective_config(o);
  echo_and_save_config(cfg, o.out, false);
  const Dataset ds = load_dataset(o.in);
  const Tensor data = train_pose_matrix(ds);
  EmOptions opts;
  opts.max_iters = cfg.gmm_max_iters;
  opts.tol = cfg.gmm_tol;
  const EmResult result = fit_em(data, cfg.gmm_components, derive_seed(cfg.seed, 1), opts);

  ParamTable tensors;
  tensors.emplace("gmm/weights", result.model.weights);
  tensors.emplace("gmm/means", result.model.means);
  tensors.emplace("gmm/vars", result.model.vars);
  tensors.emplace("gmm/mixture_mean", result.model.mixture_mean);
  save_checkpoint(o.out, tensors);

  json log;
  log["log_likelihoods"] = result.log_likelihoods;
  log["events"] = result.events;
  write_text(o.out + ".em_log.json", log.dump(1) + "\n");
  std::cout << "fitted " << cfg.gmm_components << " components on " << data.rows()
            << " poses; final log-likelihood " << result.log_likelihoods.back() << "\n";
  return 0;
}

int cmd_pretrain_context(const CliOptions& o) {
  const RunConfig cfg = effective_config(o);
  echo_and_save_config(cfg, o.out, false);
  const Dataset ds = load_dataset(o.in);
  std::vector<ContextPretrainExample> examples;
  for (int s : ds.train_indices) {
    for (int t = 0; t < ds.seq2d[s].frame_count(); ++t) {
      examples.push_back(
          {context_window(ds.seq2d[s], t, cfg.context_frames), ds.seq3d[s].frames[t].xyz});
    }
  }
  const ContextEncoderConfig enc_cfg{cfg.context_embed, cfg.context_dim};
  const ContextPretrainOptions opts{cfg.pretrain_epochs, cfg.pretrain_batch, cfg.pretrain_lr};
  const ContextPretrainResult result =
      pretrain_context(examples, enc_cfg, opts, derive_seed(cfg.seed, 2));
  save_checkpoint(o.out, result.encoder);
  json log;
  log["loss_curve"] = result.loss_curve;
  write_text(o.out + ".pretrain_log.json", log.dump(1) + "\n");
  std::cout << "pretrained context encoder on " << examples.size() << " windows; loss "
            << result.loss_curve.front() << " -> " << result.loss_curve.back() << "\n";
  return 0;
}

json training_log_json(const TrainResult& result) {
  json log;
  log["epochs"] = json::array();
  for (const auto& e : result.log) {
    log["epochs"].push_back({{"epoch", e.epoch},
                             {"lr", e.lr},
                             {"loss", e.loss},
                             {"diff_loss", e.diff_loss},
                             {"stpg_loss", e.stpg_loss}});
  }
  log["pretrain_curve"] = result.pretrain_curve;
  log["em_log_likelihoods"] = result.em_log_likelihoods;
  log["notes"] = result.notes;
  return log;
}

int cmd_train(const CliOptions& o) {
  const RunConfig cfg = effective_config(o);
  echo_and_save_config(cfg, o.out, false);
  const Dataset ds = load_dataset(o.in);
  const TrainResult result = train(ds, cfg, cfg.seed);
  save_bundle(o.out, result.bundle);
  write_text(o.out + ".training_log.json", training_log_json(result).dump(1) + "\n");
  std::cout << "trained " << result.log.size() << " epochs; final loss "
            << (result.log.empty() ? 0.0 : result.log.back().loss) << "\n";
  std::cout << "wrote model checkpoint: " << o.out << "\n";
  return 0;
}

json trace_json(const InferenceTrace& trace) {
  json out;
  out["frames"] = json::array();
  for (const auto& f : trace.frames) {
    out["frames"].push_back(
        {{"mean_energy_per_step", f.mean_energy_per_step}, {"final_energy", f.final_energy}});
  }
  out["warnings"] = trace.warnings;
  return out;
}

int cmd_infer(const CliOptions& o) {
  const RunConfig cfg = effective_config(o);
  if (cfg.model_checkpoint.empty()) {
    throw DataError("infer needs model_checkpoint in the config file");
  }
  echo_and_save_config(cfg, o.out, false);
  const ModelBundle bundle = load_bundle(cfg.model_checkpoint);
  const PoseSeq2d seq2d = load_seq2d(o.in);
  InferenceTrace trace;
  const PoseSeq3d out3d = infer_sequence(bundle, seq2d, cfg, &trace);
  save_seq3d(o.out, out3d);
  write_text(o.out + ".trace.json", trace_json(trace).dump(1) + "\n");
  for (const auto& w : trace.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "inferred " << out3d.frame_count() << " frames -> " << o.out << "\n";
  return 0;
}

int cmd_eval(const CliOptions& o) {
  const PoseSeq3d pred = load_seq3d(o.pred);
  const PoseSeq3d gt = load_seq3d(o.gt);
  if (pred.fps != gt.fps) throw DataError("eval: fps differs between prediction and truth");
  const MetricsReport report = evaluate(pred, gt);
  std::cout << report_table(report);
  if (!o.out.empty()) write_text(o.out, report_to_json(report));
  return 0;
}

int cmd_guide_demo(const CliOptions& o) {
  RunConfig cfg = effective_config(o);
  if (cfg.model_checkpoint.empty()) {
    throw DataError("guide-demo needs model_checkpoint in the config file");
  }
  echo_and_save_config(cfg, o.out, false);
  const ModelBundle bundle = load_bundle(cfg.model_checkpoint);
  const Dataset ds = load_dataset(o.in);
  if (ds.test_indices.empty()) throw DataError("guide-demo: dataset has no test split");

  json per_seq = json::array();
  double mpjpe_guided = 0.0, mpjpe_unguided = 0.0;
  double energy_guided = 0.0, energy_unguided = 0.0;
  for (int s : ds.test_indices) {
    RunConfig guided_cfg = cfg;
    guided_cfg.guidance_enabled = true;
    guided_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(s));
    RunConfig unguided_cfg = guided_cfg;
    unguided_cfg.guidance_enabled = false;

    InferenceTrace tg, tu;
    const PoseSeq3d pg = infer_sequence(bundle, ds.seq2d[s], guided_cfg, &tg);
    const PoseSeq3d pu = infer_sequence(bundle, ds.seq2d[s], unguided_cfg, &tu);
    const double mg = mpjpe(pg, ds.seq3d[s]);
    const double mu = mpjpe(pu, ds.seq3d[s]);
    auto mean_energy = [](const InferenceTrace& t) {
      double acc = 0.0;
      for (const auto& f : t.frames) acc += f.final_energy;
      return t.frames.empty() ? 0.0 : acc / static_cast<double>(t.frames.size());
    };
    const double eg = mean_energy(tg);
    const double eu = mean_energy(tu);
    mpjpe_guided += mg;
    mpjpe_unguided += mu;
    energy_guided += eg;
    energy_unguided += eu;
    per_seq.push_back({{"sequence", s},
                       {"mpjpe_guided", mg},
                       {"mpjpe_unguided", mu},
                       {"energy_guided", eg},
                       {"energy_unguided", eu}});
  }
  const double n = static_cast<double>(ds.test_indices.size());
  mpjpe_guided /= n;
  mpjpe_unguided /= n;
  energy_guided /= n;
  energy_unguided /= n;

  char line[160];
  std::printf("variant       MPJPE (mm)   mean final energy\n");
  std::printf("-----------   ----------   -----------------\n");
  std::snprintf(line, sizeof(line), "%-11s   %10.4f   %17.4f\n", "unguided", mpjpe_unguided,
                energy_unguided);
  std::cout << line;
  std::snprintf(line, sizeof(line), "%-11s   %10.4f   %17.4f\n", "guided", mpjpe_guided,
                energy_guided);
  std::cout << line;
  const double rel =
      mpjpe_unguided > 0.0 ? 100.0 * (mpjpe_unguided - mpjpe_guided) / mpjpe_unguided : 0.0;
  std::snprintf(line, sizeof(line), "MPJPE change: %+.2f%% (rho=%g)\n", -rel, cfg.rho);
  std::cout << line;

  if (!o.out.empty()) {
    json report;
    report["rho"] = cfg.rho;
    report["per_sequence"] = per_seq;
    report["aggregate"] = {{"mpjpe_guided", mpjpe_guided},
                           {"mpjpe_unguided", mpjpe_unguided},
                           {"energy_guided", energy_guided},
                           {"energy_unguided", energy_unguided}};
    write_text(o.out, report.dump(1) + "\n");
  }
  return 0;
}

int cmd_plot(const CliOptions& o) {
  if (o.pred.empty() && o.gt.empty() && o.in.empty()) {
    std::cerr << "plot needs --pred/--gt pose files or a --in log file\n";
    return 1;
  }
  if (o.pred.empty() != o.gt.empty()) {
    std::cerr << "plot needs --pred and --gt together\n";
    return 1;
  }
  fs::create_directories(o.out);
  std::vector<std::string> written;

  if (!o.pred.empty()) {
    const PoseSeq3d pred = load_seq3d(o.pred);
    const PoseSeq3d gt = load_seq3d(o.gt);
    if (pred.frame_count() != gt.frame_count() || pred.frame_count() == 0) {
      throw DataError("plot: prediction and truth must have the same non-zero frame count");
    }
    SkeletonTopology topo;
    const int J = pred.frames.front().joint_count();
    if (!o.config.empty()) {
      const RunConfig cfg = load_config(o.config);
      if (!cfg.topology_path.empty()) topo = load_topology(cfg.topology_path);
    }
    if (topo.num_joints == 0) {
      if (J == 17) {
        topo = default_topology_17();
      } else {
        std::vector<int> parents(J);
        parents[0] = -1;
        for (int j = 1; j < J; ++j) parents[j] = j - 1;
        topo = make_topology(J, 0, std::move(parents), {}, std::vector<double>(J, 1.0));
      }
    }
    const int n = pred.frame_count();
    std::vector<int> picks = {0, n / 2, n - 1};
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    for (int t : picks) {
      char name[64];
      std::snprintf(name, sizeof(name), "overlay_frame_%04d.svg", t);
      const std::string path = (fs::path(o.out) / name).string();
      write_text(path, svg_skeleton_overlay(pred.frames[t], gt.frames[t], topo,
                                            "frame " + std::to_string(t)));
      written.push_back(path);
    }
  }

  if (!o.in.empty()) {
    std::ifstream f(o.in);
    if (!f) throw DataError("cannot open log file: " + o.in);
    json log;
    try {
      log = json::parse(f);
    } catch (const json::parse_error& e) {
      throw DataError(o.in + ": " + e.what());
    }
    if (log.contains("epochs")) {
      ChartSeries loss{"loss", {}}, diff{"diff_loss", {}}, stpg{"stpg_loss", {}};
      for (const auto& e : log["epochs"]) {
        loss.values.push_back(e.value("loss", 0.0));
        diff.values.push_back(e.value("diff_loss", 0.0));
        stpg.values.push_back(e.value("stpg_loss", 0.0));
      }
      const std::string path = (fs::path(o.out) / "training_curves.svg").string();
      write_text(path, svg_line_chart("training loss per epoch", "epoch", {loss, diff, stpg}));
      written.push_back(path);
    }
    if (log.contains("frames")) {
      ChartSeries energy{"mean energy at h0|k", {}};
      ChartSeries final_e{"final energy per frame", {}};
      std::size_t steps = 0;
      for (const auto& fr : log["frames"]) {
        const auto& per_step = fr["mean_energy_per_step"];
        steps = std::max(steps, per_step.size());
        final_e.values.push_back(fr.value("final_energy", 0.0));
      }
      if (steps > 0) {
        energy.values.assign(steps, 0.0);
        std::size_t count = 0;
        for (const auto& fr : log["frames"]) {
          const auto& per_step = fr["mean_energy_per_step"];
          for (std::size_t i = 0; i < per_step.size(); ++i) {
            energy.values[i] += per_step[i].get<double>();
          }
          ++count;
        }
        if (count > 0) {
          for (auto& v : energy.values) v /= static_cast<double>(count);
        }
      }
      const std::string path1 = (fs::path(o.out) / "energy_per_step.svg").string();
      write_text(path1, svg_line_chart("energy along the reverse process", "reverse step",
                                       {energy}));
      written.push_back(path1);
      const std::string path2 = (fs::path(o.out) / "energy_per_frame.svg").string();
      write_text(path2, svg_line_chart("final energy per frame", "frame", {final_e}));
      written.push_back(path2);
    }
    if (!log.contains("epochs") && !log.contains("frames")) {
      const std::string path = (fs::path(o.out) / "placeholder.svg").string();
      write_text(path, svg_line_chart("no plottable content", "", {}));
      written.push_back(path);
    }
  }

  for (const auto& p : written) std::cout << "wrote " << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autoregressive diffusion 2D-to-3D pose lifter"};
  app.require_subcommand(1);

  CliOptions o;
  auto add_common = [&](CLI::App* cmd, bool with_io) {
    cmd->add_option("--config", o.config, "run configuration file (JSON)");
    cmd->add_option("--seed", o.seed, "PRNG seed override")->each([&](const std::string&) {
      o.seed_set = true;
    });
    if (with_io) {
      cmd->add_option("--in", o.in, "input path");
      cmd->add_option("--out", o.out, "output path");
    }
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, true);
  synth->get_option("--out")->required();

  CLI::App* fit = app.add_subcommand("fit-gmm", "fit the pose mixture on a dataset");
  add_common(fit, true);
  fit->get_option("--in")->required();
  fit->get_option("--out")->required();

  CLI::App* pre = app.add_subcommand("pretrain-context", "pretrain the frozen 2D context encoder");
  add_common(pre, true);
  pre->get_option("--in")->required();
  pre->get_option("--out")->required();

  CLI::App* tr = app.add_subcommand("train", "train the full model on a dataset");
  add_common(tr, true);
  tr->get_option("--in")->required();
  tr->get_option("--out")->required();
  tr->add_flag("--no-hpim", o.no_hpim, "train without the history encoder");

  CLI::App* inf = app.add_subcommand("infer", "lift a 2D sequence to 3D");
  add_common(inf, true);
  inf->get_option("--in")->required();
  inf->get_option("--out")->required();
  inf->add_option("--rho", o.rho, "guidance step size override")->each([&](const std::string&) {
    o.rho_set = true;
  });
  inf->add_flag("--no-guidance", o.no_guidance, "disable inference-time guidance");
  inf->add_flag("--no-hpim", o.no_hpim, "force an empty history at every frame");
  inf->add_option("--variant", o.variant, "reverse update variant: mu-consistent or literal");

  CLI::App* ev = app.add_subcommand("eval", "compare a prediction against ground truth");
  ev->add_option("--pred", o.pred, "predicted 3D sequence")->required();
  ev->add_option("--gt", o.gt, "ground-truth 3D sequence")->required();
  ev->add_option("--out", o.out, "metrics report JSON path");

  CLI::App* gd = app.add_subcommand("guide-demo",
                                    "paired guided/unguided inference on the test split");
  add_common(gd, true);
  gd->get_option("--in")->required();
  gd->add_option("--rho", o.rho, "guidance step size override")->each([&](const std::string&) {
    o.rho_set = true;
  });
  gd->add_flag("--no-hpim", o.no_hpim, "force an empty history at every frame");
  gd->add_option("--variant", o.variant, "reverse update variant");

  CLI::App* pl = app.add_subcommand("plot", "emit SVG plots from run artifacts");
  pl->add_option("--config", o.config, "run configuration file (JSON)");
  pl->add_option("--in", o.in, "trace or training-log JSON");
  pl->add_option("--pred", o.pred, "predicted 3D sequence");
  pl->add_option("--gt", o.gt, "ground-truth 3D sequence");
  pl->add_option("--out", o.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (fit->parsed()) return cmd_fit_gmm(o);
    if (pre->parsed()) return cmd_pretrain_context(o);
    if (tr->parsed()) return cmd_train(o);
    if (inf->parsed()) return cmd_infer(o);
    if (ev->parsed()) return cmd_eval(o);
    if (gd->parsed()) return cmd_guide_demo(o);
    if (pl->parsed()) return cmd_plot(o);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

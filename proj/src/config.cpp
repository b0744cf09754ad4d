#include "starpose/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

using nlohmann::json;

// Tracks which keys of a JSON object were consumed; leftovers are errors.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj.is_object()) throw DataError("config: " + where_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    claimed_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      target = it->get<T>();
    } catch (const json::exception&) {
      throw DataError("config: bad value type for " + where_ + "." + key);
    }
  }

  void read_range(const char* key, std::array<double, 2>& target) {
    claimed_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    if (!it->is_array() || it->size() != 2) {
      throw DataError("config: " + where_ + "." + key + " must be a [lo, hi] pair");
    }
    target[0] = (*it)[0].get<double>();
    target[1] = (*it)[1].get<double>();
  }

  const json* claim_object(const char* key) {
    claimed_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    return &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!claimed_.count(it.key())) {
        throw DataError("config: unknown key " + where_ + "." + it.key());
      }
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> claimed_;
};

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DataError(std::string("config: ") + what);
  };
  require(steps >= 1, "diffusion.steps must be >= 1");
  require(beta_min > 0 && beta_min <= beta_max && beta_max < 1,
          "diffusion betas must satisfy 0 < beta_min <= beta_max < 1");
  require(ddim_steps >= 1 && ddim_steps <= steps, "diffusion.ddim_steps must lie in [1, steps]");
  require(gmm_components >= 1, "gmm.components must be >= 1");
  require(hidden > 0 && heads > 0 && hidden % heads == 0, "model.heads must divide model.hidden");
  require(blocks >= 1, "model.blocks must be >= 1");
  require(context_dim > 0 && context_embed > 0, "context dims must be positive");
  require(context_frames >= 1, "model.context_frames must be >= 1");
  require(hpim_dim > 0 && hpim_heads > 0 && hpim_dim % hpim_heads == 0,
          "model.hpim_heads must divide model.hpim_dim");
  require(hpim_out > 0, "model.hpim_out must be positive");
  require(step_embed_dim > 0 && step_embed_dim % 2 == 0, "model.step_embed_dim must be even");
  require(history >= 1, "model.history must be >= 1");
  require(lambda_p >= 0 && lambda_s >= 0 && lambda_b >= 0 && lambda_d >= 0,
          "guidance weights must be non-negative");
  require(rho_schedule == "constant" || rho_schedule == "sqrt1ma",
          "guidance.rho_schedule must be constant or sqrt1ma");
  require(gradient_mode == "approximate" || gradient_mode == "exact",
          "guidance.gradient_mode must be approximate or exact");
  require(hypotheses >= 1, "sampling.hypotheses must be >= 1");
  require(variant == "mu-consistent" || variant == "literal",
          "sampling.variant must be mu-consistent or literal");
  require(epochs >= 0 && batch_size >= 1, "train.epochs/batch_size out of range");
  require(synth.num_sequences >= 1 && synth.frames >= 1, "synth sizes must be positive");
  require(synth.train_fraction > 0 && synth.train_fraction < 1,
          "synth.train_fraction must be in (0,1)");
  require(synth.camera.fx > 0 && synth.camera.fy > 0, "synth camera focal lengths must be > 0");
}

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  ObjectReader top(root, "<root>");
  top.read("seed", cfg.seed);
  top.read("model_checkpoint", cfg.model_checkpoint);
  top.read("topology", cfg.topology_path);

  if (const json* j = top.claim_object("diffusion")) {
    ObjectReader r(*j, "diffusion");
    r.read("steps", cfg.steps);
    r.read("beta_min", cfg.beta_min);
    r.read("beta_max", cfg.beta_max);
    r.read("ddim_steps", cfg.ddim_steps);
    r.finish();
  }
  if (const json* j = top.claim_object("gmm")) {
    ObjectReader r(*j, "gmm");
    r.read("components", cfg.gmm_components);
    r.read("max_iters", cfg.gmm_max_iters);
    r.read("tol", cfg.gmm_tol);
    r.finish();
  }
  if (const json* j = top.claim_object("model")) {
    ObjectReader r(*j, "model");
    r.read("hidden", cfg.hidden);
    r.read("heads", cfg.heads);
    r.read("blocks", cfg.blocks);
    r.read("context_dim", cfg.context_dim);
    r.read("context_embed", cfg.context_embed);
    r.read("context_frames", cfg.context_frames);
    r.read("hpim_dim", cfg.hpim_dim);
    r.read("hpim_out", cfg.hpim_out);
    r.read("hpim_heads", cfg.hpim_heads);
    r.read("step_embed_dim", cfg.step_embed_dim);
    r.read("history", cfg.history);
    r.finish();
  }
  if (const json* j = top.claim_object("guidance")) {
    ObjectReader r(*j, "guidance");
    r.read("lambda_p", cfg.lambda_p);
    r.read("lambda_s", cfg.lambda_s);
    r.read("lambda_b", cfg.lambda_b);
    r.read("lambda_d", cfg.lambda_d);
    r.read("rho", cfg.rho);
    r.read("rho_schedule", cfg.rho_schedule);
    r.read("gradient_mode", cfg.gradient_mode);
    r.read("enabled", cfg.guidance_enabled);
    r.read("train_losses", cfg.train_stpg);
    r.finish();
  }
  if (const json* j = top.claim_object("sampling")) {
    ObjectReader r(*j, "sampling");
    r.read("hypotheses", cfg.hypotheses);
    r.read("variant", cfg.variant);
    r.read("no_hpim", cfg.no_hpim);
    r.finish();
  }
  if (const json* j = top.claim_object("train")) {
    ObjectReader r(*j, "train");
    r.read("epochs", cfg.epochs);
    r.read("batch_size", cfg.batch_size);
    r.read("lr", cfg.lr);
    r.read("lr_decay", cfg.lr_decay);
    r.read("lr_decay_every", cfg.lr_decay_every);
    r.read("pretrain_epochs", cfg.pretrain_epochs);
    r.read("pretrain_batch", cfg.pretrain_batch);
    r.read("pretrain_lr", cfg.pretrain_lr);
    r.finish();
  }
  if (const json* j = top.claim_object("synth")) {
    ObjectReader r(*j, "synth");
    r.read("num_sequences", cfg.synth.num_sequences);
    r.read("frames", cfg.synth.frames);
    r.read("fps", cfg.synth.fps);
    r.read("noise_px", cfg.synth.noise_px);
    r.read("train_fraction", cfg.synth.train_fraction);
    r.read_range("gait_freq_hz", cfg.synth.gait_freq_hz);
    r.read_range("hip_amplitude", cfg.synth.hip_amplitude);
    r.read_range("knee_amplitude", cfg.synth.knee_amplitude);
    r.read_range("arm_amplitude", cfg.synth.arm_amplitude);
    r.read_range("sway_amplitude", cfg.synth.sway_amplitude);
    r.read_range("depth_mm", cfg.synth.depth_mm);
    r.read("bone_lengths_mm", cfg.synth.bone_lengths_mm);
    if (const json* cam = r.claim_object("camera")) {
      ObjectReader rc(*cam, "synth.camera");
      rc.read("fx", cfg.synth.camera.fx);
      rc.read("fy", cfg.synth.camera.fy);
      rc.read("cx", cfg.synth.camera.cx);
      rc.read("cy", cfg.synth.camera.cy);
      rc.finish();
    }
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string dump_config(const RunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  root["model_checkpoint"] = cfg.model_checkpoint;
  root["topology"] = cfg.topology_path;
  root["diffusion"] = {{"steps", cfg.steps},
                       {"beta_min", cfg.beta_min},
                       {"beta_max", cfg.beta_max},
                       {"ddim_steps", cfg.ddim_steps}};
  root["gmm"] = {{"components", cfg.gmm_components},
                 {"max_iters", cfg.gmm_max_iters},
                 {"tol", cfg.gmm_tol}};
  root["model"] = {{"hidden", cfg.hidden},
                   {"heads", cfg.heads},
                   {"blocks", cfg.blocks},
                   {"context_dim", cfg.context_dim},
                   {"context_embed", cfg.context_embed},
                   {"context_frames", cfg.context_frames},
                   {"hpim_dim", cfg.hpim_dim},
                   {"hpim_out", cfg.hpim_out},
                   {"hpim_heads", cfg.hpim_heads},
                   {"step_embed_dim", cfg.step_embed_dim},
                   {"history", cfg.history}};
  root["guidance"] = {{"lambda_p", cfg.lambda_p},
                      {"lambda_s", cfg.lambda_s},
                      {"lambda_b", cfg.lambda_b},
                      {"lambda_d", cfg.lambda_d},
                      {"rho", cfg.rho},
                      {"rho_schedule", cfg.rho_schedule},
                      {"gradient_mode", cfg.gradient_mode},
                      {"enabled", cfg.guidance_enabled},
                      {"train_losses", cfg.train_stpg}};
  root["sampling"] = {{"hypotheses", cfg.hypotheses},
                      {"variant", cfg.variant},
                      {"no_hpim", cfg.no_hpim}};
  root["train"] = {{"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"lr", cfg.lr},
                   {"lr_decay", cfg.lr_decay},
                   {"lr_decay_every", cfg.lr_decay_every},
                   {"pretrain_epochs", cfg.pretrain_epochs},
                   {"pretrain_batch", cfg.pretrain_batch},
                   {"pretrain_lr", cfg.pretrain_lr}};
  root["synth"] = {{"num_sequences", cfg.synth.num_sequences},
                   {"frames", cfg.synth.frames},
                   {"fps", cfg.synth.fps},
                   {"noise_px", cfg.synth.noise_px},
                   {"train_fraction", cfg.synth.train_fraction},
                   {"gait_freq_hz", cfg.synth.gait_freq_hz},
                   {"hip_amplitude", cfg.synth.hip_amplitude},
                   {"knee_amplitude", cfg.synth.knee_amplitude},
                   {"arm_amplitude", cfg.synth.arm_amplitude},
                   {"sway_amplitude", cfg.synth.sway_amplitude},
                   {"depth_mm", cfg.synth.depth_mm},
                   {"bone_lengths_mm", cfg.synth.bone_lengths_mm},
                   {"camera",
                    {{"fx", cfg.synth.camera.fx},
                     {"fy", cfg.synth.camera.fy},
                     {"cx", cfg.synth.camera.cx},
                     {"cy", cfg.synth.camera.cy}}}};
  return root.dump(2) + "\n";
}

}  // namespace starpose

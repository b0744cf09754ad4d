#include <doctest.h>

#include "starpose/config.hpp"
#include "starpose/errors.hpp"

using namespace starpose;

TEST_CASE("defaults parse and validate") {
  const RunConfig cfg = parse_config_text("{}");
  CHECK(cfg.steps == 50);
  CHECK(cfg.beta_min == 1e-4);
  CHECK(cfg.beta_max == 2e-3);
  CHECK(cfg.ddim_steps == 5);
  CHECK(cfg.gmm_components == 5);
  CHECK(cfg.hypotheses == 5);
  CHECK(cfg.lambda_p == 1.0);
  CHECK(cfg.lambda_b == 0.01);
  CHECK(cfg.lr == 1e-4);
  CHECK(cfg.lr_decay == 0.9);
  CHECK(cfg.lr_decay_every == 10);
}

TEST_CASE("nested keys override defaults") {
  const RunConfig cfg = parse_config_text(R"({
    "seed": 42,
    "diffusion": {"steps": 20, "ddim_steps": 4},
    "guidance": {"rho": 0.5, "gradient_mode": "exact"},
    "sampling": {"hypotheses": 7, "variant": "literal"},
    "synth": {"num_sequences": 3, "camera": {"fx": 900.0}}
  })");
  CHECK(cfg.seed == 42);
  CHECK(cfg.steps == 20);
  CHECK(cfg.ddim_steps == 4);
  CHECK(cfg.rho == 0.5);
  CHECK(cfg.gradient_mode == "exact");
  CHECK(cfg.hypotheses == 7);
  CHECK(cfg.variant == "literal");
  CHECK(cfg.synth.num_sequences == 3);
  CHECK(cfg.synth.camera.fx == 900.0);
  CHECK(cfg.synth.camera.fy == 1145.04);  // untouched default
}

TEST_CASE("unknown keys are errors at every level") {
  CHECK_THROWS_AS(parse_config_text(R"({"mystery": 1})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"diffusion": {"step": 20}})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"synth": {"camera": {"fz": 1.0}}})"), DataError);
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(parse_config_text(R"({"diffusion": {"steps": 0}})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"diffusion": {"ddim_steps": 100}})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"model": {"hidden": 10, "heads": 3}})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"model": {"step_embed_dim": 7}})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"guidance": {"rho_schedule": "bogus"}})"), DataError);
  CHECK_THROWS_AS(parse_config_text(R"({"guidance": {"lambda_p": -1.0}})"), DataError);
  CHECK_THROWS_AS(parse_config_text("{broken"), DataError);
}

TEST_CASE("dump/parse round trip preserves every field") {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.steps = 25;
  cfg.rho = 0.125;
  cfg.no_hpim = true;
  cfg.variant = "literal";
  cfg.synth.noise_px = 1.5;
  const RunConfig back = parse_config_text(dump_config(cfg));
  CHECK(back.seed == 7);
  CHECK(back.steps == 25);
  CHECK(back.rho == 0.125);
  CHECK(back.no_hpim);
  CHECK(back.variant == "literal");
  CHECK(back.synth.noise_px == 1.5);
  CHECK(dump_config(back) == dump_config(cfg));
}

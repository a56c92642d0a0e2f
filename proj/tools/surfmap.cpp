// surfmap: simulate, annotate, fuse, render, eval and plan.

#include "surfmap/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace surfmap;
using pipeline::PipelineConfig;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Seed for every random draw");
  cmd->add_option("--set", c.overrides, "Config override key=value (repeatable)");
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
}

PipelineConfig make_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : PipelineConfig::load(c.config);
  for (const auto& o : c.overrides) cfg.set(o);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

Vec2 parse_point(const std::vector<double>& v) { return {v.at(0), v.at(1)}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface maps from trajectories: annotate, fuse, render, evaluate and plan"};
  app.require_subcommand(1);

  Common sim_c;
  auto* sim = app.add_subcommand("simulate", "Write a synthetic run directory");
  add_common(sim, sim_c);

  Common ann_c;
  std::string ann_run;
  auto* ann = app.add_subcommand("annotate", "D0 masks from ego path, tracklets and obstacles");
  add_common(ann, ann_c);
  ann->add_option("--run", ann_run, "Run directory")->required();

  Common fuse_c;
  std::vector<std::string> fuse_runs;
  auto* fuse = app.add_subcommand("fuse", "Fuse per-frame predictions into a map");
  add_common(fuse, fuse_c);
  fuse->add_option("--run", fuse_runs, "Run directory (repeatable)")->required();

  Common ren_c;
  std::string ren_map, ren_run, ren_d0;
  auto* ren = app.add_subcommand("render", "D1 masks by rendering the map mesh into each frame");
  add_common(ren, ren_c);
  ren->add_option("--map", ren_map, "Map file (.tmap)")->required();
  ren->add_option("--run", ren_run, "Run directory")->required();
  ren->add_option("--d0", ren_d0, "D0 mask directory for the coverage comparison");

  Common eval_c;
  std::string ev_masks, ev_pred, ev_gt, ev_map, ev_bev;
  auto* ev = app.add_subcommand("eval", "Per-class IoU, precision and recall");
  add_common(ev, eval_c);
  ev->add_option("--masks", ev_masks, "Directory of class masks to score");
  ev->add_option("--predictions", ev_pred, "Directory of .sprb predictions to score");
  ev->add_option("--gt", ev_gt, "Directory of ground-truth class masks");
  ev->add_option("--map", ev_map, "Map to score (.tmap or class PNG with .geo)");
  ev->add_option("--bev", ev_bev, "Ground-truth BEV class PNG with .geo");

  Common plan_c;
  std::string plan_map;
  std::vector<double> plan_start, plan_goal;
  auto* plan = app.add_subcommand("plan", "A* route on the costmap of a map");
  add_common(plan, plan_c);
  plan->add_option("--map", plan_map, "Map (.tmap or class PNG with .geo)")->required();
  plan->add_option("--start", plan_start, "Start x y in world metres")->expected(2)->required();
  plan->add_option("--goal", plan_goal, "Goal x y in world metres")->expected(2)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      pipeline::cmd_simulate(make_config(sim_c), sim_c.out);
    } else if (ann->parsed()) {
      pipeline::cmd_annotate(make_config(ann_c), ann_run, ann_c.out);
    } else if (fuse->parsed()) {
      std::vector<std::filesystem::path> runs(fuse_runs.begin(), fuse_runs.end());
      pipeline::cmd_fuse(make_config(fuse_c), runs, fuse_c.out);
    } else if (ren->parsed()) {
      std::optional<std::filesystem::path> d0;
      if (!ren_d0.empty()) d0 = ren_d0;
      pipeline::cmd_render(make_config(ren_c), ren_map, ren_run, ren_c.out, d0);
    } else if (ev->parsed()) {
      pipeline::EvalInputs in;
      if (!ev_masks.empty()) in.masks = ev_masks;
      if (!ev_pred.empty()) in.predictions = ev_pred;
      if (!ev_gt.empty()) in.gt = ev_gt;
      if (!ev_map.empty()) in.map = ev_map;
      if (!ev_bev.empty()) in.bev = ev_bev;
      pipeline::cmd_eval(make_config(eval_c), in, eval_c.out);
    } else if (plan->parsed()) {
      pipeline::cmd_plan(make_config(plan_c), plan_map, parse_point(plan_start), parse_point(plan_goal),
                         plan_c.out);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(error_kind_name(e.kind())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 3;
  }
  return 0;
}

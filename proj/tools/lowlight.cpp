// Command-line front end: parses flags into a RunConfig and dispatches.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lowlight/cli.hpp"

namespace {

using lowlight::cli::Command;
using lowlight::cli::RunConfig;

void add_scatter_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--alpha", cfg.alpha, "Light variation strength, A = 1 - alpha*u")->capture_default_str();
  app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app->add_option("--t-min", cfg.t_min, "Lower bound on transmission")->capture_default_str();
  app->add_option("--t-radius", cfg.t_radius, "Box-blur radius of the synthetic transmission")->capture_default_str();
}

void add_eval_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--list", cfg.list, "File of '<saliency.png> <gt.png>' lines (relative to the list file)");
  app->add_option("--saliency", cfg.saliency, "Single saliency map");
  app->add_option("--gt", cfg.gt, "Ground truth for --saliency");
  app->add_option("--n-thresholds", cfg.n_thresholds, "Thresholds k/(n-1), k = 0..n-1")->capture_default_str();
  app->add_option("--beta-sq", cfg.beta_sq, "F-measure beta squared")->capture_default_str();
  app->add_option("--jobs", cfg.jobs, "Images scored in parallel")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Low-light degradation, enhancement and saliency evaluation tools"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synthesize", "Make a synthetic low-light image with its A and t maps");
  synth->add_option("--input", cfg.input, "Bright source PNG")->required();
  synth->add_option("--output", cfg.output, "Degraded PNG")->required();
  synth->add_option("--a-out", cfg.light_out, "Atmospheric light PNG")->required();
  synth->add_option("--t-out", cfg.transmission_out, "Transmission PNG")->required();
  synth->add_option("--sidecar", cfg.sidecar, "Parameter JSON (default: <output>.scatter.json)");
  add_scatter_flags(synth, cfg);

  auto* degrade = app.add_subcommand("degrade", "Apply the scattering model with given A and t maps");
  degrade->add_option("--input", cfg.input, "Clean PNG")->required();
  degrade->add_option("--output", cfg.output, "Degraded PNG")->required();
  degrade->add_option("--a", cfg.light, "Atmospheric light PNG")->required();
  degrade->add_option("--t", cfg.transmission, "Transmission PNG")->required();
  degrade->add_option("--sidecar", cfg.sidecar, "Parameter JSON providing t_min");
  degrade->add_option("--t-min", cfg.t_min, "Lower bound on transmission")->capture_default_str();

  auto* enh = app.add_subcommand("enhance", "Recover the scene image from a low-light PNG");
  enh->add_option("--input", cfg.input, "Low-light PNG")->required();
  enh->add_option("--output", cfg.output, "Enhanced PNG")->required();
  enh->add_option("--a", cfg.light, "Known atmospheric light PNG (skips estimation)");
  enh->add_option("--t", cfg.transmission, "Known transmission PNG (skips estimation)");
  enh->add_option("--sidecar", cfg.sidecar, "Parameter JSON providing t_min");
  enh->add_option("--a-out", cfg.light_out, "Write the estimated atmospheric light");
  enh->add_option("--t-out", cfg.transmission_out, "Write the estimated transmission");
  enh->add_option("--t-min", cfg.t_min, "Lower bound on transmission")->capture_default_str();
  enh->add_option("--omega", cfg.omega, "Haze retention factor")->capture_default_str();
  enh->add_option("--radius", cfg.radius, "Dark channel window radius")->capture_default_str();
  enh->add_option("--top-fraction", cfg.top_fraction, "Brightest dark-channel fraction used for A")
      ->capture_default_str();
  enh->add_flag("!--no-refine", cfg.refine, "Skip the smoothness refinement of t");
  enh->add_option("--refine-lambda", cfg.refine_cfg.lambda_smooth, "Smoothness weight")->capture_default_str();
  enh->add_option("--refine-steps", cfg.refine_cfg.steps, "Gradient steps")->capture_default_str();
  enh->add_option("--refine-step-size", cfg.refine_cfg.step_size, "Initial step size")->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "Score saliency maps: MAE, PR curve, max F-beta");
  eval->add_option("--report", cfg.report, "Report JSON")->required();
  eval->add_option("--csv", cfg.csv, "Optional PR curve CSV");
  add_eval_flags(eval, cfg);

  auto* pr = app.add_subcommand("pr-export", "Write the dataset PR curve as CSV");
  pr->add_option("--csv", cfg.csv, "PR curve CSV")->required();
  add_eval_flags(pr, cfg);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the non-local block gradients");
  grad->add_option("--channels", cfg.channels, "Feature channels (even)")->capture_default_str();
  grad->add_option("--size", cfg.size, "Spatial size (square)")->capture_default_str();
  grad->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  grad->add_option("--instances", cfg.instances, "Random instances")->capture_default_str();

  auto* cons = app.add_subcommand("consensus", "Merge annotator boxes into consensus regions");
  cons->add_option("--input", cfg.input, "Annotation JSON")->required();
  cons->add_option("--output", cfg.output, "Consensus JSON")->required();
  cons->add_option("--threshold", cfg.consensus_threshold, "Pairwise IoU gate")->capture_default_str();
  cons->add_option("--mask-dir", cfg.mask_dir, "Write <image_id>.png consensus masks here");

  auto* split = app.add_subcommand("split", "Assign train/test tags to a manifest");
  split->add_option("--input", cfg.input, "Manifest JSON")->required();
  split->add_option("--output", cfg.output, "Tagged manifest JSON")->required();
  split->add_option("--train-fraction", cfg.train_fraction, "Fraction of entries tagged train")
      ->capture_default_str();
  split->add_option("--seed", cfg.seed, "Shuffle seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return lowlight::cli::kUsage;
  }

  const auto* chosen = app.get_subcommands().front();
  cfg.command = *lowlight::cli::parse_command(chosen->get_name());
  return lowlight::cli::run(cfg, std::cout, std::cerr);
}

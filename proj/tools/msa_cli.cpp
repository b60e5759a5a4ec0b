// Experiment driver.  Subcommands cover the full pipeline:
//   prepare -> synthetic corpus + noise bank
//   mix     -> deterministic evaluation mixing manifest
//   train   -> checkpoint + metrics log for one variant
//   evaluate-> identification CSV over the 16-condition grid
//   score   -> verification score files + EER/DCF CSV
//   fuse    -> alpha-sweep CSV over the two configured variants
//   report  -> merged summary (refuses artifacts from other configs)
// Exit status is nonzero on error with a one-line "error <CODE>: ..." message.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "msa/experiment.hpp"

namespace {

struct Args {
  std::string config_path;
  std::int64_t seed = -1;  // <0: keep the config's seed
  std::string variant;     // empty: keep the config's variant
};

msa::ExperimentConfig resolve_config(const Args& args) {
  auto cfg = msa::load_experiment_config(args.config_path);
  if (args.seed >= 0) cfg.seed = std::uint64_t(args.seed);
  if (!args.variant.empty()) cfg.variant = args.variant;
  if (const char* env = std::getenv("MSA_OUTPUT_DIR")) cfg.output_dir = env;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("--config", args.config_path, "experiment config (JSON)")
      ->required();
  sub->add_option("--seed", args.seed, "override the config seed");
  sub->add_option("--variant", args.variant, "override the config variant");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascaded speech-enhancement / speaker-recognition experiments"};
  app.require_subcommand(1);
  Args args;
  for (const char* name :
       {"prepare", "mix", "train", "evaluate", "score", "fuse", "report"})
    add_common(app.add_subcommand(name), args);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(args);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "prepare") {
      msa::run_prepare(cfg);
      std::cout << "prepared corpus=" << cfg.corpus_dir
                << " noise=" << cfg.noise_dir << "\n";
    } else if (cmd == "mix") {
      msa::run_mix(cfg);
      std::cout << "wrote " << msa::Paths(cfg).mix_manifest().string() << "\n";
    } else if (cmd == "train") {
      const auto log_path = msa::Paths(cfg).train_log(cfg.variant);
      std::filesystem::create_directories(log_path.parent_path());
      std::ofstream log(log_path, std::ios::trunc);
      if (!log) throw msa::PipelineError("E_IO", "cannot write " + log_path.string());
      const auto res = msa::run_train(cfg, cfg.variant, &log);
      std::cout << "trained " << cfg.variant << ": steps=" << res.steps
                << " final_loss=" << res.final_loss << "\n";
    } else if (cmd == "evaluate") {
      msa::run_evaluate(cfg, cfg.variant);
      std::cout << "wrote "
                << msa::Paths(cfg).identification_csv(cfg.variant).string()
                << "\n";
    } else if (cmd == "score") {
      msa::run_score(cfg, cfg.variant);
      std::cout << "wrote "
                << msa::Paths(cfg).verification_csv(cfg.variant).string()
                << "\n";
    } else if (cmd == "fuse") {
      msa::run_fuse(cfg);
      std::cout << "wrote " << msa::Paths(cfg).fusion_csv().string() << "\n";
    } else if (cmd == "report") {
      msa::run_report(cfg);
      std::cout << "wrote " << msa::Paths(cfg).report_csv().string() << "\n";
    }
  } catch (const msa::PipelineError& e) {
    std::cerr << "error " << e.code << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error E_INTERNAL: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

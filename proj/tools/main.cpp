// Command-line front end: train / eval / ablate / gradcheck / synth.
// All real work lives in the core library; this file only parses arguments.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convemo/commands.hpp"

using namespace convemo;
using namespace convemo::cli;

namespace {

// Shared --config + override flags for train-like commands.
struct TrainArgs {
  std::string config_path;
  std::optional<std::string> manifest;
  std::optional<std::string> out_dir;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<std::string> mode;
  std::optional<std::string> encoder;
  std::optional<std::string> modal;
  bool sentiment = false;
  bool synth_default = false;
};

void add_train_flags(CLI::App* app, TrainArgs& a) {
  app->add_option("-c,--config", a.config_path, "experiment config JSON file");
  app->add_flag("--synthetic", a.synth_default,
                "use the built-in synthetic corpus (default spec)");
  app->add_option("--manifest", a.manifest, "corpus manifest path override");
  app->add_option("--out", a.out_dir, "output directory");
  app->add_option("--lr", a.lr, "learning rate");
  app->add_option("--epochs", a.epochs, "max epochs");
  app->add_option("--batch", a.batch, "batch size (dialogues)");
  app->add_option("--seed", a.seed, "training seed");
  app->add_option("--lambda", a.lambda, "manual trade-off weight");
  app->add_option("--objective", a.mode, "manual | automatic");
  app->add_option("--encoder", a.encoder, "acme | tfe1 | tfe2");
  app->add_option("--modal", a.modal, "modal setting, e.g. TVA, TV, T");
  app->add_flag("--sentiment", a.sentiment, "coarsen labels to sentiment");
}

ExperimentConfig resolve_config(const TrainArgs& a) {
  ExperimentConfig cfg;
  if (!a.config_path.empty()) cfg = load_experiment_config(a.config_path);
  else if (a.synth_default) cfg.synth = SynthSpec{};
  else if (!a.manifest) throw ConfigError("config: need --config, --manifest or --synthetic");
  if (a.manifest) { cfg.manifest = *a.manifest; cfg.synth.reset(); }
  if (a.out_dir) cfg.out_dir = *a.out_dir;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.lambda) cfg.objective.lambda = *a.lambda;
  if (a.mode) {
    if (*a.mode == "manual") cfg.objective.mode = ObjectiveConfig::Mode::Manual;
    else if (*a.mode == "automatic") cfg.objective.mode = ObjectiveConfig::Mode::Automatic;
    else throw ConfigError("config: --objective must be manual|automatic");
  }
  if (a.encoder) cfg.model.encoder = parse_encoder_kind(*a.encoder);
  if (a.modal) cfg.model.modal_setting = parse_modal_setting(*a.modal);
  if (a.sentiment) cfg.sentiment = true;
  cfg.objective.validate();
  cfg.train.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conversational emotion recognition over precomputed utterance features"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_train_flags(train_cmd, train_args);

  EvalOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
  eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint.bin path")->required();
  eval_cmd->add_option("--manifest", eval_opt.manifest, "corpus manifest path")->required();
  eval_cmd->add_option("--split", eval_opt.split, "train | val | test");
  eval_cmd->add_flag("--sentiment", eval_opt.sentiment, "coarsen labels to sentiment");
  eval_cmd->add_option("--out", eval_opt.out_dir, "directory for metrics/confusion exports");
  eval_cmd->add_flag("--predictions", eval_opt.export_predictions, "write predictions.csv");
  eval_cmd->add_flag("--embeddings", eval_opt.export_embeddings, "write embeddings.csv");

  TrainArgs ablate_base;
  AblateOptions ablate_opt;
  auto* ablate_cmd = app.add_subcommand("ablate", "train a grid of configuration variants");
  add_train_flags(ablate_cmd, ablate_base);
  ablate_cmd->add_option("--modal-settings", ablate_opt.modal_settings,
                         "modal settings to sweep (TVA TV TA VA T V A)");
  ablate_cmd->add_option("--lambdas", ablate_opt.lambdas,
                         "trade-off values to sweep (numbers or 'automatic')");
  ablate_cmd->add_option("--encoders", ablate_opt.encoders, "encoders to sweep");
  ablate_cmd->add_option("--switches", ablate_opt.switches,
                         "full | no_rume | no_acme | no_lesm");

  GradcheckOptions gc_opt;
  auto* gc_cmd = app.add_subcommand("gradcheck",
                                    "finite-difference check of the full objective");
  gc_cmd->add_option("--encoder", gc_opt.encoder, "acme | tfe1 | tfe2");
  gc_cmd->add_option("--objective", gc_opt.lambda_mode, "manual | automatic");
  gc_cmd->add_flag("--all", gc_opt.all_configs, "sweep all encoder/objective pairs");
  gc_cmd->add_option("--tolerance", gc_opt.tolerance, "max relative error allowed");
  gc_cmd->add_option("--eps", gc_opt.eps, "finite-difference step");
  gc_cmd->add_option("--seed", gc_opt.seed, "model/data seed");

  SynthSpec synth_spec;
  std::string synth_out = "synth_corpus";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus on disk");
  synth_cmd->add_option("--out", synth_out, "output directory");
  synth_cmd->add_option("--classes", synth_spec.classes, "number of emotion classes");
  synth_cmd->add_option("--train-dialogues", synth_spec.train_dialogues, "");
  synth_cmd->add_option("--val-dialogues", synth_spec.val_dialogues, "");
  synth_cmd->add_option("--test-dialogues", synth_spec.test_dialogues, "");
  synth_cmd->add_option("--utterances", synth_spec.utterances_per_dialogue,
                        "utterances per dialogue");
  synth_cmd->add_option("--d-text", synth_spec.d_text, "");
  synth_cmd->add_option("--d-visual", synth_spec.d_visual, "");
  synth_cmd->add_option("--d-audio", synth_spec.d_audio, "");
  synth_cmd->add_option("--separation", synth_spec.separation, "class center scale");
  synth_cmd->add_option("--shift-rate", synth_spec.shift_rate,
                        "probability the next label differs");
  synth_cmd->add_option("--seed", synth_spec.seed, "");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(resolve_config(train_args), std::cout);
    if (eval_cmd->parsed()) return cmd_eval(eval_opt, std::cout);
    if (ablate_cmd->parsed()) {
      ablate_opt.base = resolve_config(ablate_base);
      return cmd_ablate(ablate_opt, std::cout);
    }
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_opt, std::cout);
    if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

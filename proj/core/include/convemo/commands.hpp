#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "convemo/data.hpp"
#include "convemo/gradcheck.hpp"
#include "convemo/model.hpp"
#include "convemo/train.hpp"

namespace convemo::cli {

// process exit codes shared by all subcommands
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitGradcheck = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string manifest;              // exactly one of manifest / synth
  std::optional<SynthSpec> synth;
  bool sentiment = false;
  ModelConfig model;                 // dims + n_classes filled from the corpus
  ObjectiveConfig objective;
  TrainConfig train;
  std::string out_dir = "out";
};

ExperimentConfig experiment_config_from_json_text(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json_text(const ExperimentConfig& cfg);

/// Runs training end to end and writes checkpoint.bin, history.jsonl,
/// metrics.json, confusion.csv and the effective config.json into out_dir.
int cmd_train(const ExperimentConfig& cfg, std::ostream& log);

struct EvalOptions {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";   // train | val | test
  bool sentiment = false;
  std::string out_dir;          // when set: metrics.json + confusion.csv
  bool export_predictions = false;  // predictions.csv in out_dir
  bool export_embeddings = false;   // embeddings.csv in out_dir
};
int cmd_eval(const EvalOptions& opt, std::ostream& log);

struct AblateOptions {
  ExperimentConfig base;
  std::vector<std::string> modal_settings;  // empty = base setting only
  std::vector<std::string> lambdas;         // numbers or "automatic"
  std::vector<std::string> encoders;        // acme | tfe1 | tfe2
  std::vector<std::string> switches;        // full | no_rume | no_acme | no_lesm
};
int cmd_ablate(const AblateOptions& opt, std::ostream& log);

struct GradcheckOptions {
  std::string encoder = "acme";      // acme | tfe1 | tfe2
  std::string lambda_mode = "manual";  // manual | automatic
  bool all_configs = false;          // sweep the 3 x 2 grid
  double tolerance = 1e-4;
  double eps = 1e-5;
  std::uint64_t seed = 7;
};
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& log);

/// Library entry behind cmd_gradcheck: builds the forced-tiny model
/// (D=8, |U|=4, |E|=3, depths (1,1), h=2, dropout off) and checks the full
/// objective's gradients.
GradCheckReport gradcheck_tiny_model(EncoderKind encoder, bool automatic,
                                     double eps, std::uint64_t seed);

int cmd_synth(const SynthSpec& spec, const std::string& out_dir,
              std::ostream& log);

}  // namespace convemo::cli

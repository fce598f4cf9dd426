#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "convemo/data.hpp"
#include "convemo/metrics.hpp"
#include "convemo/model.hpp"
#include "convemo/params.hpp"
#include "convemo/tensor.hpp"

namespace convemo {

struct ObjectiveConfig {
  enum class Mode { Manual, Automatic };
  Mode mode = Mode::Manual;
  double lambda = 0.9;        // manual trade-off in [0,1]
  double weight_decay = 1e-4; // decoupled L2, applied inside the optimizer

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  std::uint64_t seed = 1;
  double log_clamp = 1e-12;

  void validate() const;
};

/// Batch-level classification loss: sum over dialogues of per-utterance
/// cross-entropies divided by the total utterance count of the batch.
double loss_classification(const std::vector<Tensor>& probs,
                           const std::vector<std::vector<int>>& gold,
                           double clamp = 1e-12);

/// Batch-level shift loss over all ordered pairs; denominator is the sum of
/// squared dialogue sizes.
double loss_shift(const std::vector<Tensor>& z,
                  const std::vector<ShiftLabelMatrix>& labels,
                  double clamp = 1e-12);

/// Combined objective value for reporting; the weight-decay term lives in the
/// optimizer, not here.
double total_objective(double loss_c, double loss_s, const ObjectiveConfig& cfg,
                       const ParamStore& params);

/// Adaptive moment estimation with decoupled weight decay.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params);

  std::size_t steps_taken() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_c = 0.0;
  double loss_s = 0.0;
  double objective = 0.0;
  double train_shift_f1 = -1.0;
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;
};

struct TrainResult {
  ParamStore best_params;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_weighted_f1 = 0.0;
  std::vector<EpochRecord> history;
};

struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runs a scalar objective + gradient accumulation over a set of dialogues.
/// Used by both the training loop and the full-model gradient check.
double batch_objective(ParamStore& params, const ModelConfig& mcfg,
                       const ObjectiveConfig& ocfg,
                       const std::vector<const Conversation*>& batch,
                       bool train_mode, RngState& rng, RngState& lesm_rng,
                       bool accumulate_grads, double log_clamp = 1e-12,
                       double* out_loss_c = nullptr,
                       double* out_loss_s = nullptr,
                       std::vector<std::vector<std::uint8_t>>* out_shift_preds =
                           nullptr);

TrainResult train(const Corpus& corpus, const ModelConfig& mcfg,
                  const ObjectiveConfig& ocfg, const TrainConfig& tcfg);

MetricsReport evaluate(ParamStore& params, const ModelConfig& mcfg,
                       const std::vector<Conversation>& split);

/// Per-utterance predictions plus fused embeddings for one split (eval mode).
struct PredictionRow {
  std::string dialogue_id;
  std::size_t utterance_index = 0;
  int gold = 0;
  int pred = 0;
  std::vector<double> fused;
};
std::vector<PredictionRow> predict(ParamStore& params, const ModelConfig& mcfg,
                                   const std::vector<Conversation>& split,
                                   bool with_embeddings);

}  // namespace convemo

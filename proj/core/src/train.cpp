#include "convemo/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace convemo {

void ObjectiveConfig::validate() const {
  if (mode == Mode::Manual && (lambda < 0.0 || lambda > 1.0))
    throw std::invalid_argument("objective: manual lambda must lie in [0,1]");
  if (weight_decay < 0.0)
    throw std::invalid_argument("objective: weight decay must be >= 0");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  if (max_epochs == 0) throw std::invalid_argument("train: max epochs must be positive");
}

double loss_classification(const std::vector<Tensor>& probs,
                           const std::vector<std::vector<int>>& gold,
                           double clamp) {
  if (probs.size() != gold.size())
    throw std::invalid_argument("loss_classification: dialogue count mismatch");
  double total = 0.0;
  std::size_t utts = 0;
  for (std::size_t d = 0; d < probs.size(); ++d) {
    const Tensor& p = probs[d];
    if (p.rows() != gold[d].size())
      throw std::invalid_argument("loss_classification: utterance count mismatch");
    utts += p.rows();
    for (std::size_t i = 0; i < p.rows(); ++i)
      total -= std::log(std::max(p.at(i, gold[d][i]), clamp));
  }
  return utts ? total / static_cast<double>(utts) : 0.0;
}

double loss_shift(const std::vector<Tensor>& z,
                  const std::vector<ShiftLabelMatrix>& labels, double clamp) {
  if (z.size() != labels.size())
    throw std::invalid_argument("loss_shift: dialogue count mismatch");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t d = 0; d < z.size(); ++d) {
    const std::size_t n = labels[d].n;
    if (z[d].rows() != n * n || z[d].cols() != 2)
      throw std::invalid_argument("loss_shift: pair count mismatch");
    pairs += n * n;
    for (std::size_t i = 0; i < n * n; ++i)
      total -= std::log(std::max(z[d].at(i, labels[d].s[i]), clamp));
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

double total_objective(double loss_c, double loss_s, const ObjectiveConfig& cfg,
                       const ParamStore& params) {
  if (cfg.mode == ObjectiveConfig::Mode::Manual)
    return loss_c + cfg.lambda * loss_s;
  const double sc = params.value("obj.log_var.c").data[0];
  const double ss = params.value("obj.log_var.s").data[0];
  return std::exp(-sc) * loss_c + std::exp(-ss) * loss_s + 0.5 * (sc + ss);
}

void AdamW::step(ParamStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, e] : params) {
    auto it = moments_.find(name);
    if (it == moments_.end())
      it = moments_
               .emplace(name, std::make_pair(Tensor(e.value.shape, 0.0),
                                             Tensor(e.value.shape, 0.0)))
               .first;
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad.data[i];
      if (!std::isfinite(g))
        throw TrainingDivergence("non-finite gradient in parameter '" + name + "'");
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      e.value.data[i] -= lr_ * wd_ * e.value.data[i];
      e.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

namespace {

std::vector<int> gold_labels(const Conversation& conv) {
  std::vector<int> out;
  out.reserve(conv.utterances.size());
  for (const auto& u : conv.utterances) out.push_back(u.label);
  return out;
}

}  // namespace

double batch_objective(ParamStore& params, const ModelConfig& mcfg,
                       const ObjectiveConfig& ocfg,
                       const std::vector<const Conversation*>& batch,
                       bool train_mode, RngState& rng, RngState& lesm_rng,
                       bool accumulate_grads, double log_clamp,
                       double* out_loss_c, double* out_loss_s,
                       std::vector<std::vector<std::uint8_t>>* out_shift_preds) {
  std::size_t total_utts = 0, total_pairs = 0;
  for (const Conversation* conv : batch) {
    const std::size_t n = conv->utterances.size();
    total_utts += n;
    total_pairs += n * n;
  }
  const bool automatic = ocfg.mode == ObjectiveConfig::Mode::Automatic;
  const double nb = static_cast<double>(batch.size());

  double objective_total = 0.0, lc_total = 0.0, ls_total = 0.0;
  for (const Conversation* conv : batch) {
    const std::size_t n = conv->utterances.size();
    Tape tape;
    const ModalStreams streams = modal_inputs(*conv, mcfg.modal_setting);
    DialogueForward fwd =
        forward_dialogue(tape, params, mcfg, streams, train_mode, rng);
    Value ce = tape.cross_entropy_sum(fwd.cls.probs, gold_labels(*conv), log_clamp);
    Value lc = tape.scale(ce, 1.0 / static_cast<double>(total_utts));
    lc_total += tape.val(ce).data[0] / static_cast<double>(total_utts);

    Value ls = Tape::none();
    if (mcfg.use_lesm) {
      Value fused2 =
          encode_dialogue(tape, params, mcfg, streams, train_mode, lesm_rng);
      const ShiftLabelMatrix gold = shift_labels(gold_labels(*conv));
      Value shift_tensor;
      std::vector<int> pair_labels;
      double sample_scale = 1.0;
      std::vector<std::pair<std::size_t, std::size_t>> sampled;
      if (n <= mcfg.shift_pair_cap) {
        shift_tensor = build_shift_tensor(tape, fwd.fused, fused2);
        pair_labels.assign(gold.s.begin(), gold.s.end());
      } else {
        const std::size_t k = mcfg.shift_pair_cap * mcfg.shift_pair_cap;
        sampled.reserve(k);
        for (std::size_t p = 0; p < k; ++p)
          sampled.emplace_back(lesm_rng.next_below(n), lesm_rng.next_below(n));
        shift_tensor =
            build_shift_tensor_sampled(tape, fwd.fused, fused2, sampled);
        for (const auto& [i, j] : sampled)
          pair_labels.push_back(gold.at(i, j));
        sample_scale = static_cast<double>(n) * static_cast<double>(n) /
                       static_cast<double>(k);
      }
      ShiftClassifyResult shift = shift_classify(
          tape, params, shift_tensor, mcfg.dropout_acme, train_mode, rng);
      Value ces = tape.cross_entropy_sum(shift.z, pair_labels, log_clamp);
      ls = tape.scale(ces, sample_scale / static_cast<double>(total_pairs));
      ls_total += tape.val(ces).data[0] * sample_scale /
                  static_cast<double>(total_pairs);
      if (out_shift_preds) {
        std::vector<std::uint8_t> pred(n * n, 0);
        if (sampled.empty()) {
          pred = shift.preds;
        } else {
          for (std::size_t p = 0; p < sampled.size(); ++p)
            pred[sampled[p].first * n + sampled[p].second] = shift.preds[p];
        }
        out_shift_preds->push_back(std::move(pred));
      }
    } else if (out_shift_preds) {
      out_shift_preds->push_back(std::vector<std::uint8_t>(n * n, 0));
    }

    Value obj;
    if (!automatic) {
      obj = ls.valid() ? tape.add(lc, tape.scale(ls, ocfg.lambda)) : lc;
    } else {
      Value sc = tape.sum_all(tape.param(params, "obj.log_var.c"));
      Value ss = tape.sum_all(tape.param(params, "obj.log_var.s"));
      Value weighted = tape.mul(tape.exp(tape.scale(sc, -1.0)), lc);
      if (ls.valid())
        weighted =
            tape.add(weighted, tape.mul(tape.exp(tape.scale(ss, -1.0)), ls));
      // each dialogue carries an equal share of the log-variance regularizer
      obj = tape.add(weighted, tape.scale(tape.add(sc, ss), 0.5 / nb));
    }
    objective_total += tape.val(obj).data[0];
    if (accumulate_grads) tape.backward(obj);
  }
  if (out_loss_c) *out_loss_c = lc_total;
  if (out_loss_s) *out_loss_s = ls_total;
  return objective_total;
}

MetricsReport evaluate(ParamStore& params, const ModelConfig& mcfg,
                       const std::vector<Conversation>& split) {
  std::vector<int> gold, pred;
  RngState rng(0);  // unused in eval mode
  for (const auto& conv : split) {
    Tape tape;
    const ModalStreams streams = modal_inputs(conv, mcfg.modal_setting);
    DialogueForward fwd =
        forward_dialogue(tape, params, mcfg, streams, /*train=*/false, rng);
    for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
      gold.push_back(conv.utterances[i].label);
      pred.push_back(fwd.cls.preds[i]);
    }
  }
  return compute_metrics(gold, pred, mcfg.n_classes);
}

std::vector<PredictionRow> predict(ParamStore& params, const ModelConfig& mcfg,
                                   const std::vector<Conversation>& split,
                                   bool with_embeddings) {
  std::vector<PredictionRow> rows;
  RngState rng(0);
  for (const auto& conv : split) {
    Tape tape;
    const ModalStreams streams = modal_inputs(conv, mcfg.modal_setting);
    DialogueForward fwd =
        forward_dialogue(tape, params, mcfg, streams, /*train=*/false, rng);
    const Tensor& fused = tape.val(fwd.fused);
    for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
      PredictionRow r;
      r.dialogue_id = conv.id;
      r.utterance_index = i;
      r.gold = conv.utterances[i].label;
      r.pred = fwd.cls.preds[i];
      if (with_embeddings) {
        r.fused.assign(fused.data.begin() + i * fused.cols(),
                       fused.data.begin() + (i + 1) * fused.cols());
      }
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

TrainResult train(const Corpus& corpus, const ModelConfig& mcfg,
                  const ObjectiveConfig& ocfg, const TrainConfig& tcfg) {
  ocfg.validate();
  tcfg.validate();
  ParamStore params = init_params(
      mcfg, tcfg.seed, ocfg.mode == ObjectiveConfig::Mode::Automatic);
  AdamW opt(tcfg.learning_rate, ocfg.weight_decay);
  RngState root(tcfg.seed);

  TrainResult result;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    RngState shuffle_rng = root.fork(1000 + epoch);
    RngState drop_rng = root.fork(2000 + epoch);
    RngState lesm_rng = root.fork(3000 + epoch);

    std::vector<std::size_t> order(corpus.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double epoch_lc = 0.0, epoch_ls = 0.0, epoch_obj = 0.0;
    std::size_t epoch_utts = 0, epoch_pairs = 0;
    std::vector<ShiftLabelMatrix> shift_gold;
    std::vector<std::vector<std::uint8_t>> shift_pred;

    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      std::vector<const Conversation*> batch;
      std::size_t batch_utts = 0, batch_pairs = 0;
      for (std::size_t b = start;
           b < std::min(order.size(), start + tcfg.batch_size); ++b) {
        const Conversation& conv = corpus.train[order[b]];
        batch.push_back(&conv);
        batch_utts += conv.utterances.size();
        batch_pairs += conv.utterances.size() * conv.utterances.size();
        shift_gold.push_back(shift_labels(gold_labels(conv)));
      }
      params.zero_grad();
      double lc = 0.0, ls = 0.0;
      const double obj = batch_objective(
          params, mcfg, ocfg, batch, /*train=*/true, drop_rng, lesm_rng,
          /*accumulate=*/true, tcfg.log_clamp, &lc, &ls,
          mcfg.use_lesm ? &shift_pred : nullptr);
      if (!std::isfinite(obj))
        throw TrainingDivergence("non-finite objective at epoch " +
                                 std::to_string(epoch));
      opt.step(params);
      epoch_lc += lc * static_cast<double>(batch_utts);
      epoch_ls += ls * static_cast<double>(batch_pairs);
      epoch_obj += obj;
      epoch_utts += batch_utts;
      epoch_pairs += batch_pairs;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_c = epoch_utts ? epoch_lc / static_cast<double>(epoch_utts) : 0.0;
    rec.loss_s = epoch_pairs ? epoch_ls / static_cast<double>(epoch_pairs) : 0.0;
    rec.objective = epoch_obj;
    if (mcfg.use_lesm && !shift_pred.empty())
      rec.train_shift_f1 = shift_f1(shift_gold, shift_pred);
    const MetricsReport val = evaluate(params, mcfg, corpus.val);
    rec.val_accuracy = val.accuracy;
    rec.val_weighted_f1 = val.weighted_f1;
    result.history.push_back(rec);

    if (!have_best || rec.val_weighted_f1 > result.best_val_weighted_f1) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_val_weighted_f1 = rec.val_weighted_f1;
      result.best_params = params;
    }
  }
  return result;
}

}  // namespace convemo

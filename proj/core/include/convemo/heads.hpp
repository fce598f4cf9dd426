#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convemo/autograd.hpp"

namespace convemo {

/// Emotion classifier over fused features [|U|, F]:
///   l = DP(relu(W_l h)), probs = softmax(W_smax l), preds = argmax.
/// Ties break toward the lowest class index.
struct ClassifyResult {
  Value probs;  // [|U|, |E|]
  std::vector<int> preds;
};
ClassifyResult classify(Tape& t, ParamStore& params, Value fused,
                        double dropout_rate, bool train, RngState& rng);

/// Pairwise concat tensor: row i*|U|+j is CAT(H[i], H'[j]); shape [|U|^2, 2F].
Value build_shift_tensor(Tape& t, Value h, Value h_prime);

/// Sampled variant for long dialogues: rows CAT(H[pair.first], H'[pair.second]).
Value build_shift_tensor_sampled(Tape& t, Value h, Value h_prime,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// Binary shift classifier over a shift tensor; z rows are 2-way
/// distributions, predictions are the argmax per pair.
struct ShiftClassifyResult {
  Value z;  // [n_pairs, 2]
  std::vector<std::uint8_t> preds;
};
ShiftClassifyResult shift_classify(Tape& t, ParamStore& params, Value shift_tensor,
                                   double dropout_rate, bool train, RngState& rng);

void init_classifier_params(ParamStore& params, std::size_t fused_dim,
                            std::size_t hidden, std::size_t n_classes,
                            RngState& rng);
void init_shift_head_params(ParamStore& params, std::size_t fused_dim,
                            std::size_t hidden, RngState& rng);

}  // namespace convemo

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "convemo/params.hpp"
#include "convemo/rng.hpp"
#include "convemo/tensor.hpp"

namespace convemo {

/// Handle to a node on a Tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Values are created eagerly; backward() replays the
/// recorded closures in reverse order and accumulates gradients, then flushes
/// gradients of bound parameters into their ParamStore.
class Tape {
 public:
  Value leaf(Tensor t);
  Value constant(Tensor t) { return leaf(std::move(t)); }

  /// Leaf whose gradient is added to store.grad(name) after backward().
  Value param(ParamStore& store, const std::string& name);

  static Value none() { return Value{-1}; }

  const Tensor& val(Value v) const { return nodes_[v.id].val; }
  Tensor& grad(Value v) { return nodes_[v.id].grad; }

  /// root must be a single-element tensor; seeds its gradient with 1.
  void backward(Value root);

  // --- elementwise ---
  Value add(Value a, Value b);
  Value add3(Value a, Value b, Value c);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double c);
  Value add_const(Value a, const Tensor& c);
  Value mul_const(Value a, const Tensor& c);
  Value exp(Value a);
  Value relu(Value a);
  Value sigmoid(Value a);
  Value tanh(Value a);

  // --- linear algebra ---
  Value matmul(Value a, Value b);
  Value transpose(Value a);
  /// y = x W^T + b over the last axis; b may be none().
  Value linear(Value x, Value w, Value b);

  // --- normalization / regularization ---
  Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5);
  Value softmax_rows(Value x);
  Value dropout(Value x, double rate, bool train, RngState& rng);

  // --- shape ---
  Value concat_cols(const std::vector<Value>& xs);
  Value slice_cols(Value x, std::size_t start, std::size_t len);
  Value concat_rows(const std::vector<Value>& xs);
  Value slice_rows(Value x, std::size_t start, std::size_t len);
  Value repeat_rows(Value x, std::size_t times);  // each row repeated in place
  Value tile_rows(Value x, std::size_t times);    // whole block repeated
  Value gather_rows(Value x, std::vector<std::size_t> indices);

  // --- reductions / losses ---
  Value sum_all(Value x);
  /// Sum over rows of -log(probs[r, labels[r]]), probabilities clamped below.
  Value cross_entropy_sum(Value probs, std::vector<int> labels,
                          double clamp = 1e-12);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void(Tape&)> back;
  };

  Value push(Tensor val, std::function<void(Tape&)> back);

  std::vector<Node> nodes_;
  std::vector<std::pair<int, ParamStore::Entry*>> bindings_;
};

/// softmax(Q K^T / sqrt(d_k)) V with optional per-key validity mask.
/// Masked keys get an additive large-negative logit before the softmax. When
/// every key is masked the output rows are defined to be zero and all_masked
/// is set.
struct AttentionResult {
  Value out;
  bool all_masked = false;
};
AttentionResult scaled_dot_attention(Tape& t, Value q, Value k, Value v,
                                     const std::vector<bool>* mask = nullptr);

/// Eq-style multi-head attention: per-head projections of Q/K/V via column
/// splits of full-width projection matrices, concat of heads, then an output
/// projection. All four matrices are [D, D]; D must be divisible by heads.
Value multi_head_attention(Tape& t, Value q, Value k, Value v,
                           std::size_t heads, Value wq, Value wk, Value wv,
                           Value wo, const std::vector<bool>* mask = nullptr);

/// One GRU direction's parameters; gate order in the stacked dimension is
/// reset, update, candidate.
struct GruDirParams {
  Value w_ih;  // [3H, d_in]
  Value w_hh;  // [3H, H]
  Value b_ih;  // [3H]
  Value b_hh;  // [3H]
};

Value gru_direction(Tape& t, Value x, const GruDirParams& p, bool reverse);

/// Bidirectional GRU: each direction has hidden size H and the per-step
/// outputs are concatenated, so the output width is 2H.
Value bigru(Tape& t, Value x, const GruDirParams& fw, const GruDirParams& bw);

}  // namespace convemo

#include "convemo/heads.hpp"

namespace convemo {

namespace {

std::vector<int> argmax_rows(const Tensor& probs) {
  std::vector<int> out(probs.rows());
  const std::size_t c = probs.cols();
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (probs.data[i * c + j] > probs.data[i * c + best])
        best = static_cast<int>(j);
    out[i] = best;
  }
  return out;
}

}  // namespace

ClassifyResult classify(Tape& t, ParamStore& params, Value fused,
                        double dropout_rate, bool train, RngState& rng) {
  Value l = t.dropout(t.relu(t.linear(fused, t.param(params, "head.cls.w1"),
                                      t.param(params, "head.cls.b1"))),
                      dropout_rate, train, rng);
  Value probs = t.softmax_rows(t.linear(l, t.param(params, "head.cls.w2"),
                                        t.param(params, "head.cls.b2")));
  ClassifyResult res;
  res.probs = probs;
  res.preds = argmax_rows(t.val(probs));
  return res;
}

Value build_shift_tensor(Tape& t, Value h, Value h_prime) {
  check_same_shape(t.val(h), t.val(h_prime), "build_shift_tensor");
  const std::size_t n = t.val(h).rows();
  return t.concat_cols({t.repeat_rows(h, n), t.tile_rows(h_prime, n)});
}

Value build_shift_tensor_sampled(
    Tape& t, Value h, Value h_prime,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  check_same_shape(t.val(h), t.val(h_prime), "build_shift_tensor");
  std::vector<std::size_t> is, js;
  is.reserve(pairs.size());
  js.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    is.push_back(i);
    js.push_back(j);
  }
  return t.concat_cols(
      {t.gather_rows(h, std::move(is)), t.gather_rows(h_prime, std::move(js))});
}

ShiftClassifyResult shift_classify(Tape& t, ParamStore& params,
                                   Value shift_tensor, double dropout_rate,
                                   bool train, RngState& rng) {
  Value l = t.dropout(
      t.relu(t.linear(shift_tensor, t.param(params, "head.shift.w1"),
                      t.param(params, "head.shift.b1"))),
      dropout_rate, train, rng);
  Value z = t.softmax_rows(t.linear(l, t.param(params, "head.shift.w2"),
                                    t.param(params, "head.shift.b2")));
  ShiftClassifyResult res;
  res.z = z;
  const Tensor& zv = t.val(z);
  res.preds.resize(zv.rows());
  for (std::size_t i = 0; i < zv.rows(); ++i)
    res.preds[i] = zv.data[i * 2 + 1] > zv.data[i * 2] ? 1 : 0;
  return res;
}

void init_classifier_params(ParamStore& params, std::size_t fused_dim,
                            std::size_t hidden, std::size_t n_classes,
                            RngState& rng) {
  params.add_gaussian("head.cls.w1", {hidden, fused_dim}, fused_dim, rng);
  params.add("head.cls.b1", Tensor({hidden}, 0.0));
  params.add_gaussian("head.cls.w2", {n_classes, hidden}, hidden, rng);
  params.add("head.cls.b2", Tensor({n_classes}, 0.0));
}

void init_shift_head_params(ParamStore& params, std::size_t fused_dim,
                            std::size_t hidden, RngState& rng) {
  params.add_gaussian("head.shift.w1", {hidden, 2 * fused_dim}, 2 * fused_dim, rng);
  params.add("head.shift.b1", Tensor({hidden}, 0.0));
  params.add_gaussian("head.shift.w2", {2, hidden}, hidden, rng);
  params.add("head.shift.b2", Tensor({2}, 0.0));
}

}  // namespace convemo

#include "convemo/rume.hpp"

#include <stdexcept>

namespace convemo {

Value feedforward(Tape& t, ParamStore& params, const std::string& prefix,
                  Value x, double dropout_rate, bool train, RngState& rng) {
  Value h = t.linear(x, t.param(params, prefix + ".w1"),
                     t.param(params, prefix + ".b1"));
  h = t.dropout(t.relu(h), dropout_rate, train, rng);
  h = t.linear(h, t.param(params, prefix + ".w2"),
               t.param(params, prefix + ".b2"));
  return t.dropout(h, dropout_rate, train, rng);
}

Value rume_layer(Tape& t, ParamStore& params, const std::string& prefix,
                 Value x, double dropout_rate, bool train, RngState& rng) {
  GruDirParams fw{t.param(params, prefix + ".gru.fw.w_ih"),
                  t.param(params, prefix + ".gru.fw.w_hh"),
                  t.param(params, prefix + ".gru.fw.b_ih"),
                  t.param(params, prefix + ".gru.fw.b_hh")};
  GruDirParams bw{t.param(params, prefix + ".gru.bw.w_ih"),
                  t.param(params, prefix + ".gru.bw.w_hh"),
                  t.param(params, prefix + ".gru.bw.b_ih"),
                  t.param(params, prefix + ".gru.bw.b_hh")};
  Value recurrent = bigru(t, x, fw, bw);
  Value rr = t.layer_norm(t.add(x, recurrent),
                          t.param(params, prefix + ".ln1.gamma"),
                          t.param(params, prefix + ".ln1.beta"));
  Value ff = feedforward(t, params, prefix + ".ff", rr, dropout_rate, train, rng);
  return t.layer_norm(t.add3(x, rr, ff), t.param(params, prefix + ".ln2.gamma"),
                      t.param(params, prefix + ".ln2.beta"));
}

std::array<Value, 3> rume_encode(Tape& t, ParamStore& params, std::size_t depth,
                                 const std::array<Value, 3>& streams,
                                 double dropout_rate, bool train,
                                 RngState& rng) {
  if (depth == 0) throw std::invalid_argument("rume_encode: depth must be >= 1");
  std::array<Value, 3> cur = streams;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string prefix = "rume." + std::to_string(l);
    for (int s = 0; s < 3; ++s)
      cur[s] = rume_layer(t, params, prefix, cur[s], dropout_rate, train, rng);
  }
  return cur;
}

void init_feedforward_params(ParamStore& params, const std::string& prefix,
                             std::size_t dim, std::size_t ff_dim, RngState& rng) {
  params.add_gaussian(prefix + ".w1", {ff_dim, dim}, dim, rng);
  params.add(prefix + ".b1", Tensor({ff_dim}, 0.0));
  params.add_gaussian(prefix + ".w2", {dim, ff_dim}, ff_dim, rng);
  params.add(prefix + ".b2", Tensor({dim}, 0.0));
}

void init_rume_layer_params(ParamStore& params, const std::string& prefix,
                            std::size_t dim, std::size_t ff_dim, RngState& rng) {
  if (dim % 2 != 0)
    throw std::invalid_argument("rume: model dim must be even, got " +
                                std::to_string(dim));
  const std::size_t hidden = dim / 2;
  for (const char* dir : {"fw", "bw"}) {
    const std::string g = prefix + ".gru." + dir;
    params.add_gaussian(g + ".w_ih", {3 * hidden, dim}, dim, rng);
    params.add_gaussian(g + ".w_hh", {3 * hidden, hidden}, hidden, rng);
    params.add(g + ".b_ih", Tensor({3 * hidden}, 0.0));
    params.add(g + ".b_hh", Tensor({3 * hidden}, 0.0));
  }
  for (const char* ln : {"ln1", "ln2"}) {
    params.add(prefix + "." + ln + ".gamma", Tensor({dim}, 1.0));
    params.add(prefix + "." + ln + ".beta", Tensor({dim}, 0.0));
  }
  init_feedforward_params(params, prefix + ".ff", dim, ff_dim, rng);
}

}  // namespace convemo

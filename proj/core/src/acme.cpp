#include "convemo/acme.hpp"

#include <stdexcept>

#include "convemo/rume.hpp"

namespace convemo {

namespace {

Value mha_from_store(Tape& t, ParamStore& params, const std::string& prefix,
                     Value q, Value k, Value v, std::size_t heads,
                     const std::vector<bool>* mask) {
  return multi_head_attention(t, q, k, v, heads, t.param(params, prefix + ".wq"),
                              t.param(params, prefix + ".wk"),
                              t.param(params, prefix + ".wv"),
                              t.param(params, prefix + ".wo"), mask);
}

void init_mha_params(ParamStore& params, const std::string& prefix,
                     std::size_t dim, RngState& rng) {
  for (const char* w : {"wq", "wk", "wv", "wo"})
    params.add_gaussian(prefix + "." + w, {dim, dim}, dim, rng);
}

void init_layer_norm_params(ParamStore& params, const std::string& prefix,
                            std::size_t dim) {
  params.add(prefix + ".gamma", Tensor({dim}, 1.0));
  params.add(prefix + ".beta", Tensor({dim}, 0.0));
}

}  // namespace

Value acme_self_stage(Tape& t, ParamStore& params, const std::string& prefix,
                      const std::string& stream, Value x, std::size_t heads,
                      double dropout_rate, bool train, RngState& rng,
                      const std::vector<bool>* mask) {
  Value s = t.dropout(
      mha_from_store(t, params, prefix + ".self." + stream, x, x, x, heads, mask),
      dropout_rate, train, rng);
  return t.layer_norm(t.add(x, s),
                      t.param(params, prefix + ".ln_self." + stream + ".gamma"),
                      t.param(params, prefix + ".ln_self." + stream + ".beta"));
}

Value acme_cross_text(Tape& t, ParamStore& params, const std::string& prefix,
                      Value sr_text, Value sr_visual, Value sr_audio,
                      Value anchor_text, std::size_t heads, double dropout_rate,
                      bool train, RngState& rng, const std::vector<bool>* mask) {
  Value tv = t.dropout(mha_from_store(t, params, prefix + ".cross.TV", sr_text,
                                      sr_visual, sr_visual, heads, mask),
                       dropout_rate, train, rng);
  Value ta = t.dropout(mha_from_store(t, params, prefix + ".cross.TA", sr_text,
                                      sr_audio, sr_audio, heads, mask),
                       dropout_rate, train, rng);
  Value merged = t.relu(t.linear(t.concat_cols({tv, ta}),
                                 t.param(params, prefix + ".catfc.w"),
                                 t.param(params, prefix + ".catfc.b")));
  return t.layer_norm(t.add3(anchor_text, sr_text, merged),
                      t.param(params, prefix + ".ln_cross.T.gamma"),
                      t.param(params, prefix + ".ln_cross.T.beta"));
}

Value acme_cross_nontext(Tape& t, ParamStore& params, const std::string& prefix,
                         const std::string& stream, Value sr_stream,
                         Value sr_text, Value anchor, std::size_t heads,
                         double dropout_rate, bool train, RngState& rng,
                         const std::vector<bool>* mask) {
  Value c = t.dropout(
      mha_from_store(t, params, prefix + ".cross." + stream + "T", sr_stream,
                     sr_text, sr_text, heads, mask),
      dropout_rate, train, rng);
  return t.layer_norm(t.add3(anchor, sr_stream, c),
                      t.param(params, prefix + ".ln_cross." + stream + ".gamma"),
                      t.param(params, prefix + ".ln_cross." + stream + ".beta"));
}

Value acme_ff_stage(Tape& t, ParamStore& params, const std::string& prefix,
                    const std::string& stream, Value anchor, Value cr,
                    double dropout_rate, bool train, RngState& rng) {
  Value f = feedforward(t, params, prefix + ".ff." + stream, cr, dropout_rate,
                        train, rng);
  return t.layer_norm(t.add3(anchor, cr, f),
                      t.param(params, prefix + ".ln_ff." + stream + ".gamma"),
                      t.param(params, prefix + ".ln_ff." + stream + ".beta"));
}

std::array<Value, 3> acme_encode(Tape& t, ParamStore& params, std::size_t depth,
                                 const std::array<Value, 3>& streams,
                                 std::size_t heads, double dropout_rate,
                                 bool train, RngState& rng,
                                 const std::vector<bool>* mask) {
  if (depth == 0) throw std::invalid_argument("acme_encode: depth must be >= 1");
  std::array<Value, 3> cur = streams;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string prefix = "acme." + std::to_string(l);
    // residual anchor for this layer is the layer input
    const std::array<Value, 3> anchor = cur;
    std::array<Value, 3> sr;
    for (int s = 0; s < 3; ++s)
      sr[s] = acme_self_stage(t, params, prefix, AcmeStreamNames::kStream[s],
                              cur[s], heads, dropout_rate, train, rng, mask);
    std::array<Value, 3> cr;
    cr[0] = acme_cross_text(t, params, prefix, sr[0], sr[1], sr[2], anchor[0],
                            heads, dropout_rate, train, rng, mask);
    cr[1] = acme_cross_nontext(t, params, prefix, "V", sr[1], sr[0], anchor[1],
                               heads, dropout_rate, train, rng, mask);
    cr[2] = acme_cross_nontext(t, params, prefix, "A", sr[2], sr[0], anchor[2],
                               heads, dropout_rate, train, rng, mask);
    for (int s = 0; s < 3; ++s)
      cur[s] = acme_ff_stage(t, params, prefix, AcmeStreamNames::kStream[s],
                             anchor[s], cr[s], dropout_rate, train, rng);
  }
  return cur;
}

namespace {

Value tfe_layer(Tape& t, ParamStore& params, const std::string& prefix, Value x,
                std::size_t heads, double dropout_rate, bool train,
                RngState& rng) {
  Value s = t.dropout(
      mha_from_store(t, params, prefix + ".mha", x, x, x, heads, nullptr),
      dropout_rate, train, rng);
  Value sr = t.layer_norm(t.add(x, s), t.param(params, prefix + ".ln1.gamma"),
                          t.param(params, prefix + ".ln1.beta"));
  Value f = feedforward(t, params, prefix + ".ff", sr, dropout_rate, train, rng);
  return t.layer_norm(t.add(sr, f), t.param(params, prefix + ".ln2.gamma"),
                      t.param(params, prefix + ".ln2.beta"));
}

}  // namespace

Value tfe_baseline(Tape& t, ParamStore& params,
                   const std::array<Value, 3>& streams, TfeScheme scheme,
                   std::size_t depth, std::size_t heads, double dropout_rate,
                   bool train, RngState& rng) {
  if (depth == 0) throw std::invalid_argument("tfe_baseline: depth must be >= 1");
  const std::size_t n = t.val(streams[0]).rows();
  Value x = scheme == TfeScheme::Tfe1
                ? t.concat_rows({streams[0], streams[1], streams[2]})
                : t.concat_cols({streams[0], streams[1], streams[2]});
  for (std::size_t l = 0; l < depth; ++l)
    x = tfe_layer(t, params, "tfe." + std::to_string(l), x, heads, dropout_rate,
                  train, rng);
  if (scheme == TfeScheme::Tfe1) {
    // un-stack the three sequence blocks and concat per utterance
    return t.concat_cols({t.slice_rows(x, 0, n), t.slice_rows(x, n, n),
                          t.slice_rows(x, 2 * n, n)});
  }
  return x;
}

void init_acme_layer_params(ParamStore& params, const std::string& prefix,
                            std::size_t dim, std::size_t ff_dim, RngState& rng) {
  for (const char* s : {"T", "V", "A"}) {
    init_mha_params(params, prefix + ".self." + s, dim, rng);
    init_layer_norm_params(params, prefix + ".ln_self." + s, dim);
    init_layer_norm_params(params, prefix + ".ln_cross." + s, dim);
    init_layer_norm_params(params, prefix + ".ln_ff." + s, dim);
    init_feedforward_params(params, prefix + ".ff." + std::string(s), dim,
                            ff_dim, rng);
  }
  for (const char* c : {"TV", "TA", "VT", "AT"})
    init_mha_params(params, prefix + ".cross." + c, dim, rng);
  params.add_gaussian(prefix + ".catfc.w", {dim, 2 * dim}, 2 * dim, rng);
  params.add(prefix + ".catfc.b", Tensor({dim}, 0.0));
}

void init_tfe_params(ParamStore& params, TfeScheme scheme, std::size_t depth,
                     std::size_t dim, std::size_t ff_mult, RngState& rng) {
  const std::size_t width = scheme == TfeScheme::Tfe1 ? dim : 3 * dim;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string prefix = "tfe." + std::to_string(l);
    init_mha_params(params, prefix + ".mha", width, rng);
    init_layer_norm_params(params, prefix + ".ln1", width);
    init_layer_norm_params(params, prefix + ".ln2", width);
    init_feedforward_params(params, prefix + ".ff", width, ff_mult * width, rng);
  }
}

}  // namespace convemo

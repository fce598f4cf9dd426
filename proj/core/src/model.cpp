#include "convemo/model.hpp"

#include <stdexcept>

namespace convemo {

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "acme" || s == "ACME") return EncoderKind::Acme;
  if (s == "tfe1" || s == "TFE1") return EncoderKind::Tfe1;
  if (s == "tfe2" || s == "TFE2") return EncoderKind::Tfe2;
  throw std::invalid_argument("unknown encoder '" + s + "'");
}

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::Acme: return "acme";
    case EncoderKind::Tfe1: return "tfe1";
    case EncoderKind::Tfe2: return "tfe2";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (dim == 0 || dim % 2 != 0)
    throw std::invalid_argument("model dim must be positive and even");
  if (heads == 0 || dim % heads != 0)
    throw std::invalid_argument("model dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
  if (encoder == EncoderKind::Tfe2 && (3 * dim) % heads != 0)
    throw std::invalid_argument("tfe2 width 3*dim not divisible by heads");
  if (n_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (rume_depth == 0 || acme_depth == 0)
    throw std::invalid_argument("encoder depths must be >= 1");
  if (d_text == 0 || d_visual == 0 || d_audio == 0)
    throw std::invalid_argument("feature dims must be set");
  if (dropout_rume < 0.0 || dropout_rume >= 1.0 || dropout_acme < 0.0 ||
      dropout_acme >= 1.0)
    throw std::invalid_argument("dropout rates must lie in [0,1)");
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed,
                       bool automatic_tradeoff) {
  cfg.validate();
  ParamStore params;
  RngState rng(seed);

  params.add_gaussian("proj.T.w", {cfg.dim, cfg.d_text}, cfg.d_text, rng);
  params.add("proj.T.b", Tensor({cfg.dim}, 0.0));
  params.add_gaussian("proj.V.w", {cfg.dim, cfg.d_visual}, cfg.d_visual, rng);
  params.add("proj.V.b", Tensor({cfg.dim}, 0.0));
  params.add_gaussian("proj.A.w", {cfg.dim, cfg.d_audio}, cfg.d_audio, rng);
  params.add("proj.A.b", Tensor({cfg.dim}, 0.0));

  const std::size_t ff_dim = cfg.ff_mult * cfg.dim;
  if (cfg.use_rume)
    for (std::size_t l = 0; l < cfg.rume_depth; ++l)
      init_rume_layer_params(params, "rume." + std::to_string(l), cfg.dim,
                             ff_dim, rng);
  if (cfg.use_acme) {
    switch (cfg.encoder) {
      case EncoderKind::Acme:
        for (std::size_t l = 0; l < cfg.acme_depth; ++l)
          init_acme_layer_params(params, "acme." + std::to_string(l), cfg.dim,
                                 ff_dim, rng);
        break;
      case EncoderKind::Tfe1:
        init_tfe_params(params, TfeScheme::Tfe1, cfg.acme_depth, cfg.dim,
                        cfg.ff_mult, rng);
        break;
      case EncoderKind::Tfe2:
        init_tfe_params(params, TfeScheme::Tfe2, cfg.acme_depth, cfg.dim,
                        cfg.ff_mult, rng);
        break;
    }
  }
  init_classifier_params(params, cfg.fused_dim(), cfg.dim, cfg.n_classes, rng);
  if (cfg.use_lesm)
    init_shift_head_params(params, cfg.fused_dim(), cfg.dim, rng);
  if (automatic_tradeoff) {
    params.add("obj.log_var.c", Tensor({1}, 0.0));
    params.add("obj.log_var.s", Tensor({1}, 0.0));
  }
  return params;
}

namespace {

const char* proj_prefix(Modality m) {
  switch (m) {
    case Modality::Text: return "proj.T";
    case Modality::Visual: return "proj.V";
    default: return "proj.A";
  }
}

}  // namespace

Value encode_dialogue(Tape& t, ParamStore& params, const ModelConfig& cfg,
                      const ModalStreams& streams, bool train, RngState& rng) {
  std::array<Value, 3> x;
  for (int s = 0; s < 3; ++s) {
    const std::string p = proj_prefix(streams.slots[s].modality);
    x[s] = t.linear(t.constant(streams.slots[s].features),
                    t.param(params, p + ".w"), t.param(params, p + ".b"));
  }
  if (cfg.use_rume)
    x = rume_encode(t, params, cfg.rume_depth, x, cfg.dropout_rume, train, rng);

  if (!cfg.use_acme) return t.concat_cols({x[0], x[1], x[2]});

  switch (cfg.encoder) {
    case EncoderKind::Acme: {
      auto h = acme_encode(t, params, cfg.acme_depth, x, cfg.heads,
                           cfg.dropout_acme, train, rng);
      return t.concat_cols({h[0], h[1], h[2]});
    }
    case EncoderKind::Tfe1:
      return tfe_baseline(t, params, x, TfeScheme::Tfe1, cfg.acme_depth,
                          cfg.heads, cfg.dropout_acme, train, rng);
    case EncoderKind::Tfe2:
      return tfe_baseline(t, params, x, TfeScheme::Tfe2, cfg.acme_depth,
                          cfg.heads, cfg.dropout_acme, train, rng);
  }
  throw std::logic_error("unreachable encoder kind");
}

DialogueForward forward_dialogue(Tape& t, ParamStore& params,
                                 const ModelConfig& cfg,
                                 const ModalStreams& streams, bool train,
                                 RngState& rng) {
  DialogueForward out;
  out.fused = encode_dialogue(t, params, cfg, streams, train, rng);
  out.cls = classify(t, params, out.fused, cfg.dropout_acme, train, rng);
  return out;
}

}  // namespace convemo

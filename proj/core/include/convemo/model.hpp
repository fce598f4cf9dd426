#pragma once

#include <optional>
#include <string>
#include <vector>

#include "convemo/acme.hpp"
#include "convemo/autograd.hpp"
#include "convemo/data.hpp"
#include "convemo/heads.hpp"
#include "convemo/rume.hpp"

namespace convemo {

enum class EncoderKind { Acme, Tfe1, Tfe2 };
EncoderKind parse_encoder_kind(const std::string& s);
std::string to_string(EncoderKind k);

struct ModelConfig {
  std::size_t d_text = 0;
  std::size_t d_visual = 0;
  std::size_t d_audio = 0;
  std::size_t dim = 32;          // D; model width after input projection
  std::size_t heads = 8;
  std::size_t rume_depth = 2;
  std::size_t acme_depth = 3;    // also the TFE depth
  std::size_t ff_mult = 4;
  double dropout_rume = 0.1;
  double dropout_acme = 0.3;
  std::size_t n_classes = 0;
  EncoderKind encoder = EncoderKind::Acme;
  ModalSetting modal_setting = ModalSetting::TVA;
  bool use_rume = true;   // false: -w/o RUME ablation
  bool use_acme = true;   // false: -w/o ACME ablation (RUME feeds the heads)
  bool use_lesm = true;   // false: single forward pass, no shift head
  std::size_t shift_pair_cap = 512;  // |U| above which shift pairs are sampled

  std::size_t fused_dim() const { return 3 * dim; }
  void validate() const;
};

/// Creates every learnable tensor the configured architecture uses.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed,
                       bool automatic_tradeoff);

/// Forward pass over one dialogue's modal streams up to the fused feature
/// matrix [|U|, 3D].
Value encode_dialogue(Tape& t, ParamStore& params, const ModelConfig& cfg,
                      const ModalStreams& streams, bool train, RngState& rng);

/// Full per-dialogue forward: fused features plus the emotion classifier.
struct DialogueForward {
  Value fused;
  ClassifyResult cls;
};
DialogueForward forward_dialogue(Tape& t, ParamStore& params,
                                 const ModelConfig& cfg,
                                 const ModalStreams& streams, bool train,
                                 RngState& rng);

}  // namespace convemo

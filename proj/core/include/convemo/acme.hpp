#pragma once

#include <array>
#include <string>

#include "convemo/autograd.hpp"

namespace convemo {

/// Attention-based cross-modality encoder. Each layer runs, per stream, a
/// self-attention stage, then text-centric cross-modal updates, then a
/// feedforward stage; every stage adds residuals anchored to the layer input
/// and layer-normalizes. Unlike the recurrent encoder, parameters are NOT
/// shared across the three streams.
///
/// Per-layer parameter names under `acme.<l>`:
///   self.{T,V,A}.{wq,wk,wv,wo}
///   cross.{TV,TA,VT,AT}.{wq,wk,wv,wo}   (TV = text queries over visual keys)
///   catfc.{w,b}                          (2D -> D after the T-side concat)
///   ff.{T,V,A}.{w1,b1,w2,b2}
///   ln_self.{T,V,A}.{gamma,beta}, ln_cross.{...}, ln_ff.{...}
struct AcmeStreamNames {
  static constexpr const char* kStream[3] = {"T", "V", "A"};
};

Value acme_self_stage(Tape& t, ParamStore& params, const std::string& prefix,
                      const std::string& stream, Value x, std::size_t heads,
                      double dropout_rate, bool train, RngState& rng,
                      const std::vector<bool>* mask = nullptr);

Value acme_cross_text(Tape& t, ParamStore& params, const std::string& prefix,
                      Value sr_text, Value sr_visual, Value sr_audio,
                      Value anchor_text, std::size_t heads, double dropout_rate,
                      bool train, RngState& rng,
                      const std::vector<bool>* mask = nullptr);

/// stream is "V" or "A"; queries come from that stream, keys/values from text.
Value acme_cross_nontext(Tape& t, ParamStore& params, const std::string& prefix,
                         const std::string& stream, Value sr_stream,
                         Value sr_text, Value anchor, std::size_t heads,
                         double dropout_rate, bool train, RngState& rng,
                         const std::vector<bool>* mask = nullptr);

Value acme_ff_stage(Tape& t, ParamStore& params, const std::string& prefix,
                    const std::string& stream, Value anchor, Value cr,
                    double dropout_rate, bool train, RngState& rng);

std::array<Value, 3> acme_encode(Tape& t, ParamStore& params, std::size_t depth,
                                 const std::array<Value, 3>& streams,
                                 std::size_t heads, double dropout_rate,
                                 bool train, RngState& rng,
                                 const std::vector<bool>* mask = nullptr);

enum class TfeScheme { Tfe1, Tfe2 };

/// Transformer-encoder fusion baselines. Tfe1 stacks the three streams at the
/// sequence level (length 3|U|, width D) and feature-concatenates per
/// utterance afterwards; Tfe2 concatenates at the feature level first and
/// encodes at width 3D. Both return |U| x 3D.
Value tfe_baseline(Tape& t, ParamStore& params, const std::array<Value, 3>& streams,
                   TfeScheme scheme, std::size_t depth, std::size_t heads,
                   double dropout_rate, bool train, RngState& rng);

void init_acme_layer_params(ParamStore& params, const std::string& prefix,
                            std::size_t dim, std::size_t ff_dim, RngState& rng);
void init_tfe_params(ParamStore& params, TfeScheme scheme, std::size_t depth,
                     std::size_t dim, std::size_t ff_mult, RngState& rng);

}  // namespace convemo

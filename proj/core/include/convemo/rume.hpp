#pragma once

#include <array>
#include <string>

#include "convemo/autograd.hpp"

namespace convemo {

/// Recurrent uni-modality encoder layer:
///   X_rr = LN(X + BiGRU(X))
///   out  = LN(X + X_rr + FF(X_rr))
/// with FF(x) = DP(FC(DP(relu(FC(x))))). One parameter set per layer,
/// applied to all three modality streams.
///
/// Parameter names under `prefix`:
///   gru.fw.{w_ih,w_hh,b_ih,b_hh}, gru.bw.{...},
///   ln1.{gamma,beta}, ln2.{gamma,beta},
///   ff.{w1,b1,w2,b2}
Value rume_layer(Tape& t, ParamStore& params, const std::string& prefix,
                 Value x, double dropout_rate, bool train, RngState& rng);

/// Stacks `depth` rume_layer applications over each of the three streams,
/// with the same layer parameters for all streams at each depth.
std::array<Value, 3> rume_encode(Tape& t, ParamStore& params,
                                 std::size_t depth,
                                 const std::array<Value, 3>& streams,
                                 double dropout_rate, bool train,
                                 RngState& rng);

/// Shared feedforward block FF(x) = DP(FC(DP(relu(FC(x))))).
Value feedforward(Tape& t, ParamStore& params, const std::string& prefix,
                  Value x, double dropout_rate, bool train, RngState& rng);

void init_rume_layer_params(ParamStore& params, const std::string& prefix,
                            std::size_t dim, std::size_t ff_dim, RngState& rng);

void init_feedforward_params(ParamStore& params, const std::string& prefix,
                             std::size_t dim, std::size_t ff_dim, RngState& rng);

}  // namespace convemo

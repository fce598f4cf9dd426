#include <benchmark/benchmark.h>

#include "convemo/autograd.hpp"
#include "convemo/data.hpp"
#include "convemo/model.hpp"
#include "convemo/train.hpp"

using namespace convemo;

namespace {

ModelConfig bench_model(std::size_t dim, EncoderKind enc) {
  ModelConfig cfg;
  cfg.d_text = 64;
  cfg.d_visual = 32;
  cfg.d_audio = 16;
  cfg.dim = dim;
  cfg.heads = 4;
  cfg.rume_depth = 2;
  cfg.acme_depth = 2;
  cfg.n_classes = 4;
  cfg.encoder = enc;
  return cfg;
}

Conversation bench_dialogue(std::size_t n, const ModelConfig& cfg) {
  RngState rng(42);
  Conversation conv;
  conv.id = "bench";
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.speaker = (i % 2) ? "B" : "A";
    u.label = static_cast<int>(i % cfg.n_classes);
    for (std::size_t d = 0; d < cfg.d_text; ++d)
      u.feat_text.push_back(static_cast<float>(rng.next_normal()));
    for (std::size_t d = 0; d < cfg.d_visual; ++d)
      u.feat_visual.push_back(static_cast<float>(rng.next_normal()));
    for (std::size_t d = 0; d < cfg.d_audio; ++d)
      u.feat_audio.push_back(static_cast<float>(rng.next_normal()));
    conv.utterances.push_back(std::move(u));
  }
  return conv;
}

void BM_MultiHeadAttention(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64, heads = 4;
  ParamStore params;
  RngState rng(7);
  params.add_gaussian("wq", {dim, dim}, dim, rng);
  params.add_gaussian("wk", {dim, dim}, dim, rng);
  params.add_gaussian("wv", {dim, dim}, dim, rng);
  params.add_gaussian("wo", {dim, dim}, dim, rng);
  Tensor x(std::vector<std::size_t>{n, dim});
  for (auto& v : x.data) v = rng.next_normal();
  for (auto _ : state) {
    Tape t;
    Value q = t.leaf(x);
    Value out = multi_head_attention(t, q, q, q, heads, t.param(params, "wq"),
                                     t.param(params, "wk"), t.param(params, "wv"),
                                     t.param(params, "wo"));
    benchmark::DoNotOptimize(t.val(out).data.data());
  }
}
BENCHMARK(BM_MultiHeadAttention)->Arg(8)->Arg(32)->Arg(128);

void BM_DialogueForward(benchmark::State& state) {
  ModelConfig cfg = bench_model(32, EncoderKind::Acme);
  Conversation conv = bench_dialogue(static_cast<std::size_t>(state.range(0)), cfg);
  ParamStore params = init_params(cfg, 1, false);
  ModalStreams streams = modal_inputs(conv, cfg.modal_setting);
  for (auto _ : state) {
    RngState rng(3);
    Tape t;
    auto fwd = forward_dialogue(t, params, cfg, streams, false, rng);
    benchmark::DoNotOptimize(t.val(fwd.cls.probs).data.data());
  }
}
BENCHMARK(BM_DialogueForward)->Arg(8)->Arg(24);

void BM_TrainBatchStep(benchmark::State& state) {
  ModelConfig cfg = bench_model(32, EncoderKind::Acme);
  ObjectiveConfig ocfg;
  ParamStore params = init_params(cfg, 1, false);
  std::vector<Conversation> convs;
  for (int i = 0; i < 4; ++i) convs.push_back(bench_dialogue(10, cfg));
  std::vector<const Conversation*> batch;
  for (const auto& c : convs) batch.push_back(&c);
  AdamW opt(1e-3, 1e-4);
  for (auto _ : state) {
    RngState rng(5), lesm_rng(6);
    params.zero_grad();
    double obj = batch_objective(params, cfg, ocfg, batch, true, rng, lesm_rng, true);
    opt.step(params);
    benchmark::DoNotOptimize(obj);
  }
}
BENCHMARK(BM_TrainBatchStep);

}  // namespace

BENCHMARK_MAIN();

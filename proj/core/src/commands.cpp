#include "convemo/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "convemo/checkpoint.hpp"

namespace convemo::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

SynthSpec synth_from_json(const json& j) {
  SynthSpec s;
  s.classes = j.value("classes", s.classes);
  s.train_dialogues = j.value("train_dialogues", s.train_dialogues);
  s.val_dialogues = j.value("val_dialogues", s.val_dialogues);
  s.test_dialogues = j.value("test_dialogues", s.test_dialogues);
  s.utterances_per_dialogue =
      j.value("utterances_per_dialogue", s.utterances_per_dialogue);
  s.d_text = j.value("d_text", s.d_text);
  s.d_visual = j.value("d_visual", s.d_visual);
  s.d_audio = j.value("d_audio", s.d_audio);
  s.separation = j.value("separation", s.separation);
  s.shift_rate = j.value("shift_rate", s.shift_rate);
  s.seed = j.value("seed", s.seed);
  return s;
}

json synth_to_json(const SynthSpec& s) {
  return json{{"classes", s.classes},
              {"train_dialogues", s.train_dialogues},
              {"val_dialogues", s.val_dialogues},
              {"test_dialogues", s.test_dialogues},
              {"utterances_per_dialogue", s.utterances_per_dialogue},
              {"d_text", s.d_text},
              {"d_visual", s.d_visual},
              {"d_audio", s.d_audio},
              {"separation", s.separation},
              {"shift_rate", s.shift_rate},
              {"seed", s.seed}};
}

Corpus load_for_experiment(const ExperimentConfig& cfg) {
  Corpus corpus =
      cfg.synth ? synth_corpus(*cfg.synth) : load_corpus(cfg.manifest);
  if (cfg.sentiment)
    corpus = map_to_sentiment(corpus, SentimentScheme::iemocap_default());
  return corpus;
}

void bind_corpus_dims(ModelConfig& m, const Corpus& corpus) {
  m.d_text = corpus.d_text;
  m.d_visual = corpus.d_visual;
  m.d_audio = corpus.d_audio;
  m.n_classes = corpus.emotions.size();
}

void write_metrics_json(const MetricsReport& r, const fs::path& path) {
  json j;
  j["accuracy"] = r.accuracy;
  j["weighted_f1"] = r.weighted_f1;
  j["per_class_f1"] = r.per_class_f1;
  j["confusion"] = r.confusion;
  if (r.shift_f1 >= 0.0) j["shift_f1"] = r.shift_f1;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_confusion_csv(const MetricsReport& r,
                         const std::vector<std::string>& emotions,
                         const fs::path& path) {
  std::ofstream out(path);
  out << "gold\\pred";
  for (const auto& e : emotions) out << "," << e;
  out << "\n";
  for (std::size_t g = 0; g < r.confusion.size(); ++g) {
    out << emotions[g];
    for (std::size_t p = 0; p < r.confusion[g].size(); ++p)
      out << "," << r.confusion[g][p];
    out << "\n";
  }
}

void write_history_jsonl(const std::vector<EpochRecord>& history,
                         const fs::path& path) {
  std::ofstream out(path);
  for (const auto& rec : history) {
    json j{{"epoch", rec.epoch},
           {"loss_c", rec.loss_c},
           {"loss_s", rec.loss_s},
           {"objective", rec.objective},
           {"val_accuracy", rec.val_accuracy},
           {"val_weighted_f1", rec.val_weighted_f1}};
    if (rec.train_shift_f1 >= 0.0) j["train_shift_f1"] = rec.train_shift_f1;
    out << j.dump() << "\n";
  }
}

}  // namespace

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  if (!j.contains("corpus")) throw ConfigError("config: missing field 'corpus'");
  const json& c = j["corpus"];
  const bool has_manifest = c.contains("manifest");
  const bool has_synth = c.contains("synthetic");
  if (has_manifest == has_synth)
    throw ConfigError(
        "config: 'corpus' must have exactly one of 'manifest' or 'synthetic'");
  if (has_manifest) cfg.manifest = c["manifest"].get<std::string>();
  else cfg.synth = synth_from_json(c["synthetic"]);
  cfg.sentiment = j.value("sentiment", false);

  const json m = j.value("model", json::object());
  cfg.model.dim = m.value("dim", cfg.model.dim);
  cfg.model.heads = m.value("heads", cfg.model.heads);
  cfg.model.rume_depth = m.value("rume_depth", cfg.model.rume_depth);
  cfg.model.acme_depth = m.value("acme_depth", cfg.model.acme_depth);
  cfg.model.ff_mult = m.value("ff_mult", cfg.model.ff_mult);
  cfg.model.dropout_rume = m.value("dropout_rume", cfg.model.dropout_rume);
  cfg.model.dropout_acme = m.value("dropout_acme", cfg.model.dropout_acme);
  cfg.model.shift_pair_cap = m.value("shift_pair_cap", cfg.model.shift_pair_cap);
  cfg.model.use_rume = m.value("use_rume", true);
  cfg.model.use_acme = m.value("use_acme", true);
  cfg.model.use_lesm = m.value("use_lesm", true);
  try {
    cfg.model.encoder = parse_encoder_kind(m.value("encoder", "acme"));
    cfg.model.modal_setting =
        parse_modal_setting(m.value("modal_setting", "TVA"));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: model: ") + e.what());
  }

  const json o = j.value("objective", json::object());
  const std::string mode = o.value("mode", "manual");
  if (mode == "manual") cfg.objective.mode = ObjectiveConfig::Mode::Manual;
  else if (mode == "automatic")
    cfg.objective.mode = ObjectiveConfig::Mode::Automatic;
  else throw ConfigError("config: objective.mode must be manual|automatic");
  cfg.objective.lambda = o.value("lambda", cfg.objective.lambda);
  cfg.objective.weight_decay =
      o.value("weight_decay", cfg.objective.weight_decay);

  const json t = j.value("train", json::object());
  cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
  cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
  cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
  cfg.train.seed = t.value("seed", cfg.train.seed);

  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  try {
    cfg.objective.validate();
    cfg.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return experiment_config_from_json_text(buf.str());
}

std::string experiment_config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  if (cfg.synth) j["corpus"] = {{"synthetic", synth_to_json(*cfg.synth)}};
  else j["corpus"] = {{"manifest", cfg.manifest}};
  j["sentiment"] = cfg.sentiment;
  j["model"] = json::parse(model_config_to_json(cfg.model));
  j["objective"] = {
      {"mode",
       cfg.objective.mode == ObjectiveConfig::Mode::Manual ? "manual" : "automatic"},
      {"lambda", cfg.objective.lambda},
      {"weight_decay", cfg.objective.weight_decay}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"max_epochs", cfg.train.max_epochs},
                {"seed", cfg.train.seed}};
  j["out_dir"] = cfg.out_dir;
  return j.dump(2);
}

int cmd_train(const ExperimentConfig& cfg_in, std::ostream& log) {
  ExperimentConfig cfg = cfg_in;
  Corpus corpus;
  try {
    corpus = load_for_experiment(cfg);
    bind_corpus_dims(cfg.model, corpus);
    cfg.model.validate();
  } catch (const std::exception& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  TrainResult result;
  try {
    result = train(corpus, cfg.model, cfg.objective, cfg.train);
  } catch (const TrainingDivergence& e) {
    log << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  }
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  {
    std::ofstream c(out / "config.json");
    c << experiment_config_to_json_text(cfg) << "\n";
  }
  write_history_jsonl(result.history, out / "history.jsonl");
  Checkpoint ckpt{cfg.model, cfg.objective, std::move(result.best_params),
                  corpus.emotions};
  save_checkpoint(ckpt, (out / "checkpoint.bin").string());

  MetricsReport test = evaluate(ckpt.params, cfg.model, corpus.test);
  write_metrics_json(test, out / "metrics.json");
  write_confusion_csv(test, corpus.emotions, out / "confusion.csv");
  log << "best epoch " << result.best_epoch << " val W-F1 " << std::fixed
      << std::setprecision(4) << result.best_val_weighted_f1 << " | test acc "
      << test.accuracy << " test W-F1 " << test.weighted_f1 << "\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt, std::ostream& log) {
  Checkpoint ckpt;
  Corpus corpus;
  try {
    ckpt = load_checkpoint(opt.checkpoint);
    corpus = load_corpus(opt.manifest);
    if (opt.sentiment)
      corpus = map_to_sentiment(corpus, SentimentScheme::iemocap_default());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (corpus.d_text != ckpt.model.d_text ||
      corpus.d_visual != ckpt.model.d_visual ||
      corpus.d_audio != ckpt.model.d_audio ||
      corpus.emotions.size() != ckpt.model.n_classes) {
    log << "error: corpus dims (" << corpus.d_text << "," << corpus.d_visual
        << "," << corpus.d_audio << ") x " << corpus.emotions.size()
        << " classes do not match checkpoint (" << ckpt.model.d_text << ","
        << ckpt.model.d_visual << "," << ckpt.model.d_audio << ") x "
        << ckpt.model.n_classes << "\n";
    return kExitConfig;
  }
  const std::vector<Conversation>* split = nullptr;
  if (opt.split == "train") split = &corpus.train;
  else if (opt.split == "val") split = &corpus.val;
  else if (opt.split == "test") split = &corpus.test;
  else {
    log << "error: unknown split '" << opt.split << "'\n";
    return kExitConfig;
  }

  const MetricsReport r = evaluate(ckpt.params, ckpt.model, *split);
  log << "split " << opt.split << ": accuracy " << std::fixed
      << std::setprecision(4) << r.accuracy << " weighted F1 " << r.weighted_f1
      << "\n";
  for (std::size_t c = 0; c < r.per_class_f1.size(); ++c)
    log << "  " << corpus.emotions[c] << " F1 " << r.per_class_f1[c] << "\n";

  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    write_metrics_json(r, out / "metrics.json");
    write_confusion_csv(r, corpus.emotions, out / "confusion.csv");
    if (opt.export_predictions || opt.export_embeddings) {
      auto rows = predict(ckpt.params, ckpt.model, *split, opt.export_embeddings);
      if (opt.export_predictions) {
        std::ofstream csv(out / "predictions.csv");
        csv << "dialogue,utterance,gold,pred\n";
        for (const auto& row : rows)
          csv << row.dialogue_id << "," << row.utterance_index << ","
              << corpus.emotions[row.gold] << "," << corpus.emotions[row.pred]
              << "\n";
      }
      if (opt.export_embeddings) {
        std::ofstream csv(out / "embeddings.csv");
        csv << "dialogue,utterance,gold,pred";
        const std::size_t f = rows.empty() ? 0 : rows.front().fused.size();
        for (std::size_t i = 0; i < f; ++i) csv << ",f" << i;
        csv << "\n";
        for (const auto& row : rows) {
          csv << row.dialogue_id << "," << row.utterance_index << ","
              << corpus.emotions[row.gold] << "," << corpus.emotions[row.pred];
          for (double v : row.fused) csv << "," << v;
          csv << "\n";
        }
      }
    }
  }
  return kExitOk;
}

int cmd_ablate(const AblateOptions& opt, std::ostream& log) {
  const auto settings =
      opt.modal_settings.empty()
          ? std::vector<std::string>{to_string(opt.base.model.modal_setting)}
          : opt.modal_settings;
  const auto lambdas = opt.lambdas.empty()
                           ? std::vector<std::string>{"base"}
                           : opt.lambdas;
  const auto encoders = opt.encoders.empty()
                            ? std::vector<std::string>{to_string(opt.base.model.encoder)}
                            : opt.encoders;
  const auto switches = opt.switches.empty()
                            ? std::vector<std::string>{"full"}
                            : opt.switches;

  fs::create_directories(opt.base.out_dir);
  std::ofstream table(fs::path(opt.base.out_dir) / "ablation.csv");
  table << "setting,encoder,switch,lambda,status,weighted_f1,accuracy\n";
  log << "setting\tencoder\tswitch\tlambda\tW-F1\tAcc\n";

  std::size_t cell = 0;
  for (const auto& setting : settings)
    for (const auto& enc : encoders)
      for (const auto& sw : switches)
        for (const auto& lam : lambdas) {
          ExperimentConfig cfg = opt.base;
          cfg.out_dir = (fs::path(opt.base.out_dir) /
                         ("cell" + std::to_string(cell)))
                            .string();
          cfg.train.seed = opt.base.train.seed + cell;
          std::string status = "ok";
          double wf1 = 0.0, acc = 0.0;
          try {
            cfg.model.modal_setting = parse_modal_setting(setting);
            cfg.model.encoder = parse_encoder_kind(enc);
            if (sw == "no_rume") cfg.model.use_rume = false;
            else if (sw == "no_acme") cfg.model.use_acme = false;
            else if (sw == "no_lesm") cfg.model.use_lesm = false;
            else if (sw != "full")
              throw ConfigError("unknown ablation switch '" + sw + "'");
            if (lam == "automatic")
              cfg.objective.mode = ObjectiveConfig::Mode::Automatic;
            else if (lam != "base")
              cfg.objective.lambda = std::stod(lam);
            const int rc = cmd_train(cfg, log);
            if (rc != kExitOk) {
              status = "exit" + std::to_string(rc);
            } else {
              std::ifstream mf(fs::path(cfg.out_dir) / "metrics.json");
              json mj = json::parse(mf);
              wf1 = mj.at("weighted_f1").get<double>();
              acc = mj.at("accuracy").get<double>();
            }
          } catch (const std::exception& e) {
            status = std::string("failed: ") + e.what();
          }
          table << setting << "," << enc << "," << sw << "," << lam << ","
                << status << "," << wf1 << "," << acc << "\n";
          log << setting << "\t" << enc << "\t" << sw << "\t" << lam << "\t"
              << std::fixed << std::setprecision(4) << wf1 << "\t" << acc
              << (status == "ok" ? "" : "\t(" + status + ")") << "\n";
          ++cell;
        }
  return kExitOk;
}

GradCheckReport gradcheck_tiny_model(EncoderKind encoder, bool automatic,
                                     double eps, std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = 3;
  spec.train_dialogues = 2;
  spec.val_dialogues = 1;
  spec.test_dialogues = 1;
  spec.utterances_per_dialogue = 4;
  spec.d_text = 5;
  spec.d_visual = 4;
  spec.d_audio = 3;
  spec.separation = 1.0;
  spec.shift_rate = 0.5;
  spec.seed = seed;
  const Corpus corpus = synth_corpus(spec);

  ModelConfig mcfg;
  mcfg.d_text = corpus.d_text;
  mcfg.d_visual = corpus.d_visual;
  mcfg.d_audio = corpus.d_audio;
  mcfg.dim = 8;
  mcfg.heads = 2;
  mcfg.rume_depth = 1;
  mcfg.acme_depth = 1;
  mcfg.ff_mult = 2;
  mcfg.dropout_rume = 0.0;
  mcfg.dropout_acme = 0.0;
  mcfg.n_classes = 3;
  mcfg.encoder = encoder;

  ObjectiveConfig ocfg;
  ocfg.mode = automatic ? ObjectiveConfig::Mode::Automatic
                        : ObjectiveConfig::Mode::Manual;
  ocfg.lambda = 0.9;

  ParamStore params = init_params(mcfg, seed, automatic);
  std::vector<const Conversation*> batch;
  for (const auto& conv : corpus.train) batch.push_back(&conv);

  const auto loss_fn = [&](ParamStore& p, bool accumulate) {
    RngState rng(0), lesm_rng(1);  // dropout disabled; streams unused
    return batch_objective(p, mcfg, ocfg, batch, /*train=*/false, rng, lesm_rng,
                           accumulate);
  };
  return grad_check(loss_fn, params, eps);
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& log) {
  std::vector<std::pair<EncoderKind, bool>> grid;
  if (opt.all_configs) {
    for (EncoderKind e :
         {EncoderKind::Acme, EncoderKind::Tfe1, EncoderKind::Tfe2})
      for (bool automatic : {false, true}) grid.emplace_back(e, automatic);
  } else {
    EncoderKind e;
    try {
      e = parse_encoder_kind(opt.encoder);
    } catch (const std::exception& ex) {
      log << "config error: " << ex.what() << "\n";
      return kExitConfig;
    }
    if (opt.lambda_mode != "manual" && opt.lambda_mode != "automatic") {
      log << "config error: lambda mode must be manual|automatic\n";
      return kExitConfig;
    }
    grid.emplace_back(e, opt.lambda_mode == "automatic");
  }

  bool all_ok = true;
  for (const auto& [encoder, automatic] : grid) {
    const GradCheckReport report =
        gradcheck_tiny_model(encoder, automatic, opt.eps, opt.seed);
    const bool ok = report.within(opt.tolerance);
    all_ok = all_ok && ok;
    log << to_string(encoder) << " / " << (automatic ? "automatic" : "manual")
        << ": max rel err " << std::scientific << std::setprecision(3)
        << report.max_rel_err << (ok ? " OK" : " FAIL") << "\n";
    if (!ok)
      for (const auto& name : report.offenders(opt.tolerance))
        log << "  exceeds tolerance: " << name << "\n";
  }
  return all_ok ? kExitOk : kExitGradcheck;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir,
              std::ostream& log) {
  try {
    const Corpus corpus = synth_corpus(spec);
    write_corpus(corpus, out_dir);
    log << "wrote " << corpus.train.size() << "/" << corpus.val.size() << "/"
        << corpus.test.size() << " dialogues to " << out_dir << "\n";
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace convemo::cli

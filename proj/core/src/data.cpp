#include "convemo/data.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace convemo {

using nlohmann::json;
namespace fs = std::filesystem;

ModalSetting parse_modal_setting(const std::string& s) {
  static const std::map<std::string, ModalSetting> table = {
      {"TVA", ModalSetting::TVA}, {"TV", ModalSetting::TV},
      {"TA", ModalSetting::TA},   {"VA", ModalSetting::VA},
      {"T", ModalSetting::T},     {"V", ModalSetting::V},
      {"A", ModalSetting::A}};
  auto it = table.find(s);
  if (it == table.end())
    throw CorpusError("unknown modal setting '" + s + "'");
  return it->second;
}

std::string to_string(ModalSetting s) {
  switch (s) {
    case ModalSetting::TVA: return "TVA";
    case ModalSetting::TV: return "TV";
    case ModalSetting::TA: return "TA";
    case ModalSetting::VA: return "VA";
    case ModalSetting::T: return "T";
    case ModalSetting::V: return "V";
    case ModalSetting::A: return "A";
  }
  return "?";
}

namespace {

const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_index(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

Tensor features_matrix(const Conversation& conv, Modality m) {
  const auto pick = [m](const Utterance& u) -> const std::vector<float>& {
    switch (m) {
      case Modality::Text: return u.feat_text;
      case Modality::Visual: return u.feat_visual;
      default: return u.feat_audio;
    }
  };
  const std::size_t n = conv.utterances.size();
  const std::size_t d = pick(conv.utterances.front()).size();
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = pick(conv.utterances[i]);
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] = f[j];
  }
  return out;
}

}  // namespace

std::string encode_floats_base64(const std::vector<float>& v) {
  std::vector<unsigned char> bytes(v.size() * 4);
  std::memcpy(bytes.data(), v.data(), bytes.size());
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const unsigned b0 = bytes[i];
    const unsigned b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const unsigned b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    out += kB64[b0 >> 2];
    out += kB64[((b0 & 0x3) << 4) | (b1 >> 4)];
    out += i + 1 < bytes.size() ? kB64[((b1 & 0xf) << 2) | (b2 >> 6)] : '=';
    out += i + 2 < bytes.size() ? kB64[b2 & 0x3f] : '=';
  }
  return out;
}

std::vector<float> decode_floats_base64(const std::string& s) {
  std::vector<unsigned char> bytes;
  bytes.reserve(s.size() / 4 * 3);
  int acc = 0, bits = 0;
  for (char c : s) {
    if (c == '=') break;
    const int v = b64_index(c);
    if (v < 0) throw CorpusError("invalid base64 character in feature vector");
    acc = (acc << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      bytes.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
    }
  }
  if (bytes.size() % 4 != 0)
    throw CorpusError("feature byte stream is not a whole number of f32s");
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

ModalStreams modal_inputs(const Conversation& conv, ModalSetting setting) {
  Modality slots[3];
  switch (setting) {
    case ModalSetting::TVA:
      slots[0] = Modality::Text; slots[1] = Modality::Visual; slots[2] = Modality::Audio;
      break;
    case ModalSetting::TV:
      slots[0] = Modality::Text; slots[1] = Modality::Visual; slots[2] = Modality::Visual;
      break;
    case ModalSetting::TA:
      slots[0] = Modality::Text; slots[1] = Modality::Audio; slots[2] = Modality::Audio;
      break;
    case ModalSetting::VA:
      slots[0] = Modality::Visual; slots[1] = Modality::Audio; slots[2] = Modality::Audio;
      break;
    case ModalSetting::T:
      slots[0] = slots[1] = slots[2] = Modality::Text;
      break;
    case ModalSetting::V:
      slots[0] = slots[1] = slots[2] = Modality::Visual;
      break;
    case ModalSetting::A:
      slots[0] = slots[1] = slots[2] = Modality::Audio;
      break;
  }
  ModalStreams out;
  for (int i = 0; i < 3; ++i) {
    out.slots[i].modality = slots[i];
    out.slots[i].features = features_matrix(conv, slots[i]);
    out.slots[i].valid.assign(conv.utterances.size(), true);
  }
  return out;
}

ShiftLabelMatrix shift_labels(const std::vector<int>& labels) {
  ShiftLabelMatrix m;
  m.n = labels.size();
  m.s.assign(m.n * m.n, 0);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j)
      m.s[i * m.n + j] = labels[i] == labels[j] ? 0 : 1;
  return m;
}

namespace {

std::vector<Conversation> load_split(const fs::path& path, const std::string& split,
                                     const Corpus& corpus, std::size_t max_utts) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open split file " + path.string());
  std::vector<Conversation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw CorpusError("split '" + split + "' line " + std::to_string(lineno) +
                        ": " + e.what());
    }
    Conversation conv;
    conv.id = j.value("id", split + ":" + std::to_string(lineno));
    const auto where = [&](std::size_t u) {
      return "dialogue '" + conv.id + "' utterance " + std::to_string(u);
    };
    if (!j.contains("utterances") || j["utterances"].empty())
      throw CorpusError("dialogue '" + conv.id + "' has no utterances");
    if (j["utterances"].size() > max_utts)
      throw CorpusError("dialogue '" + conv.id + "' exceeds the utterance cap of " +
                        std::to_string(max_utts));
    std::size_t ui = 0;
    for (const auto& ju : j["utterances"]) {
      Utterance u;
      u.speaker = ju.value("speaker", "");
      if (!ju.contains("label")) throw CorpusError(where(ui) + ": missing label");
      const std::string label = ju["label"].get<std::string>();
      const auto it =
          std::find(corpus.emotions.begin(), corpus.emotions.end(), label);
      if (it == corpus.emotions.end())
        throw CorpusError(where(ui) + ": unknown label '" + label + "'");
      u.label = static_cast<int>(it - corpus.emotions.begin());
      const auto read_feat = [&](const char* key, std::size_t dim) {
        if (!ju.contains(key))
          throw CorpusError(where(ui) + ": missing modality vector '" +
                            std::string(key) + "'");
        auto v = decode_floats_base64(ju[key].get<std::string>());
        if (v.size() != dim)
          throw CorpusError(where(ui) + ": modality '" + std::string(key) +
                            "' has dim " + std::to_string(v.size()) +
                            ", expected " + std::to_string(dim));
        return v;
      };
      u.feat_text = read_feat("text", corpus.d_text);
      u.feat_visual = read_feat("visual", corpus.d_visual);
      u.feat_audio = read_feat("audio", corpus.d_audio);
      conv.utterances.push_back(std::move(u));
      ++ui;
    }
    out.push_back(std::move(conv));
  }
  if (out.empty())
    throw CorpusError("split '" + split + "' contains zero conversations");
  return out;
}

}  // namespace

Corpus load_corpus(const std::string& manifest_path, std::size_t max_utterances) {
  std::ifstream in(manifest_path);
  if (!in) throw CorpusError("cannot open manifest " + manifest_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CorpusError(std::string("manifest parse error: ") + e.what());
  }
  Corpus corpus;
  corpus.name = j.value("name", "corpus");
  if (!j.contains("emotions") || j["emotions"].empty())
    throw CorpusError("manifest: missing emotion vocabulary");
  for (const auto& e : j["emotions"]) corpus.emotions.push_back(e.get<std::string>());
  if (!j.contains("dims"))
    throw CorpusError("manifest: missing dims");
  corpus.d_text = j["dims"].at("text").get<std::size_t>();
  corpus.d_visual = j["dims"].at("visual").get<std::size_t>();
  corpus.d_audio = j["dims"].at("audio").get<std::size_t>();
  if (!j.contains("splits"))
    throw CorpusError("manifest: missing splits");
  const fs::path base = fs::path(manifest_path).parent_path();
  corpus.train = load_split(base / j["splits"].at("train").get<std::string>(),
                            "train", corpus, max_utterances);
  corpus.val = load_split(base / j["splits"].at("val").get<std::string>(), "val",
                          corpus, max_utterances);
  corpus.test = load_split(base / j["splits"].at("test").get<std::string>(),
                           "test", corpus, max_utterances);
  return corpus;
}

namespace {

void write_split(const fs::path& path, const std::vector<Conversation>& split,
                 const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write split file " + path.string());
  for (const auto& conv : split) {
    json j;
    j["id"] = conv.id;
    json utts = json::array();
    for (const auto& u : conv.utterances) {
      json ju;
      ju["speaker"] = u.speaker;
      ju["label"] = corpus.emotions.at(u.label);
      ju["text"] = encode_floats_base64(u.feat_text);
      ju["visual"] = encode_floats_base64(u.feat_visual);
      ju["audio"] = encode_floats_base64(u.feat_audio);
      utts.push_back(std::move(ju));
    }
    j["utterances"] = std::move(utts);
    out << j.dump() << "\n";
  }
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path base(out_dir);
  json manifest;
  manifest["name"] = corpus.name;
  manifest["emotions"] = corpus.emotions;
  manifest["dims"] = {{"text", corpus.d_text},
                      {"visual", corpus.d_visual},
                      {"audio", corpus.d_audio}};
  manifest["splits"] = {
      {"train", "train.jsonl"}, {"val", "val.jsonl"}, {"test", "test.jsonl"}};
  std::ofstream mf(base / "manifest.json");
  if (!mf) throw CorpusError("cannot write manifest in " + out_dir);
  mf << manifest.dump(2) << "\n";
  write_split(base / "train.jsonl", corpus.train, corpus);
  write_split(base / "val.jsonl", corpus.val, corpus);
  write_split(base / "test.jsonl", corpus.test, corpus);
}

SentimentScheme SentimentScheme::iemocap_default() {
  SentimentScheme s;
  s.mapping = {{"sad", "negative"},     {"angry", "negative"},
               {"frustrated", "negative"}, {"happy", "positive"},
               {"excited", "positive"}, {"neutral", "neutral"}};
  return s;
}

Corpus map_to_sentiment(const Corpus& corpus, const SentimentScheme& scheme) {
  std::map<std::string, std::string> table(scheme.mapping.begin(),
                                           scheme.mapping.end());
  std::vector<std::string> targets;
  std::vector<int> remap(corpus.emotions.size());
  for (std::size_t i = 0; i < corpus.emotions.size(); ++i) {
    const auto it = table.find(corpus.emotions[i]);
    if (it == table.end())
      throw CorpusError("sentiment scheme does not map label '" +
                        corpus.emotions[i] + "'");
    auto pos = std::find(targets.begin(), targets.end(), it->second);
    if (pos == targets.end()) {
      targets.push_back(it->second);
      pos = targets.end() - 1;
    }
    remap[i] = static_cast<int>(pos - targets.begin());
  }
  Corpus out = corpus;
  out.emotions = targets;
  for (auto* split : {&out.train, &out.val, &out.test})
    for (auto& conv : *split)
      for (auto& u : conv.utterances) u.label = remap[u.label];
  return out;
}

namespace {

std::vector<Conversation> synth_split(const SynthSpec& spec, std::size_t count,
                                      const std::vector<std::vector<float>> centers[3],
                                      const std::string& prefix, RngState& rng) {
  std::vector<Conversation> out;
  for (std::size_t d = 0; d < count; ++d) {
    Conversation conv;
    conv.id = prefix + std::to_string(d);
    int label = static_cast<int>(rng.next_below(spec.classes));
    for (std::size_t u = 0; u < spec.utterances_per_dialogue; ++u) {
      if (u > 0) {
        const bool shift = rng.next_uniform() < spec.shift_rate;
        if (shift && spec.classes > 1) {
          const int step =
              1 + static_cast<int>(rng.next_below(spec.classes - 1));
          label = (label + step) % static_cast<int>(spec.classes);
        }
      }
      Utterance utt;
      utt.speaker = u % 2 == 0 ? "A" : "B";
      utt.label = label;
      const auto sample = [&](int m, std::size_t dim) {
        std::vector<float> f(dim);
        for (std::size_t j = 0; j < dim; ++j)
          f[j] = static_cast<float>(centers[m][label][j] + rng.next_normal());
        return f;
      };
      utt.feat_text = sample(0, spec.d_text);
      utt.feat_visual = sample(1, spec.d_visual);
      utt.feat_audio = sample(2, spec.d_audio);
      conv.utterances.push_back(std::move(utt));
    }
    out.push_back(std::move(conv));
  }
  return out;
}

}  // namespace

Corpus synth_corpus(const SynthSpec& spec) {
  if (spec.classes == 0 || spec.utterances_per_dialogue == 0)
    throw CorpusError("synth_corpus: spec values must be positive");
  if (spec.shift_rate < 0.0 || spec.shift_rate > 1.0)
    throw CorpusError("synth_corpus: shift_rate must lie in [0,1]");
  Corpus corpus;
  corpus.name = "synthetic";
  for (std::size_t c = 0; c < spec.classes; ++c)
    corpus.emotions.push_back("class" + std::to_string(c));
  corpus.d_text = spec.d_text;
  corpus.d_visual = spec.d_visual;
  corpus.d_audio = spec.d_audio;

  RngState rng(spec.seed);
  RngState center_rng = rng.fork(0);
  std::vector<std::vector<float>> centers[3];
  const std::size_t dims[3] = {spec.d_text, spec.d_visual, spec.d_audio};
  for (int m = 0; m < 3; ++m) {
    centers[m].resize(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      centers[m][c].resize(dims[m]);
      for (std::size_t j = 0; j < dims[m]; ++j)
        centers[m][c][j] =
            static_cast<float>(center_rng.next_normal() * spec.separation);
    }
  }
  RngState train_rng = rng.fork(1);
  RngState val_rng = rng.fork(2);
  RngState test_rng = rng.fork(3);
  corpus.train = synth_split(spec, spec.train_dialogues, centers, "train", train_rng);
  corpus.val = synth_split(spec, spec.val_dialogues, centers, "val", val_rng);
  corpus.test = synth_split(spec, spec.test_dialogues, centers, "test", test_rng);
  return corpus;
}

}  // namespace convemo

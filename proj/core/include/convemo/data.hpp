#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convemo/rng.hpp"
#include "convemo/tensor.hpp"

namespace convemo {

enum class Modality { Text, Visual, Audio };

struct Utterance {
  std::string speaker;
  int label = 0;  // index into Corpus::emotions
  std::vector<float> feat_text;
  std::vector<float> feat_visual;
  std::vector<float> feat_audio;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
};

struct Corpus {
  std::string name;
  std::vector<std::string> emotions;
  std::size_t d_text = 0;
  std::size_t d_visual = 0;
  std::size_t d_audio = 0;
  std::vector<Conversation> train;
  std::vector<Conversation> val;
  std::vector<Conversation> test;
};

enum class ModalSetting { TVA, TV, TA, VA, T, V, A };

ModalSetting parse_modal_setting(const std::string& s);
std::string to_string(ModalSetting s);

/// One modality stream of a dialogue: |U| x d feature matrix plus a per-row
/// validity mask.
struct ModalTensor {
  Tensor features;
  std::vector<bool> valid;
  Modality modality = Modality::Text;
};

/// The three encoder input streams for a dialogue under a modal setting.
/// Slot 0 plays the textual role downstream.
struct ModalStreams {
  ModalTensor slots[3];
};

ModalStreams modal_inputs(const Conversation& conv, ModalSetting setting);

/// Pairwise emotion-shift states: s(i,j)=1 iff labels differ. Symmetric with
/// zero diagonal by construction.
struct ShiftLabelMatrix {
  std::size_t n = 0;
  std::vector<std::uint8_t> s;  // row-major n x n

  std::uint8_t at(std::size_t i, std::size_t j) const { return s[i * n + j]; }
};

ShiftLabelMatrix shift_labels(const std::vector<int>& labels);

/// Thrown for malformed corpora; the message carries dialogue/utterance
/// coordinates.
struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Corpus load_corpus(const std::string& manifest_path, std::size_t max_utterances = 512);
void write_corpus(const Corpus& corpus, const std::string& out_dir);

/// Sentiment coarsening. The scheme maps every source emotion name onto a
/// target name; the default scheme merges sad/angry/frustrated into negative,
/// happy/excited into positive and keeps neutral.
struct SentimentScheme {
  std::vector<std::pair<std::string, std::string>> mapping;
  static SentimentScheme iemocap_default();
};

Corpus map_to_sentiment(const Corpus& corpus, const SentimentScheme& scheme);

struct SynthSpec {
  std::size_t classes = 4;
  std::size_t train_dialogues = 60;
  std::size_t val_dialogues = 10;
  std::size_t test_dialogues = 10;
  std::size_t utterances_per_dialogue = 10;
  std::size_t d_text = 16;
  std::size_t d_visual = 12;
  std::size_t d_audio = 8;
  double separation = 3.0;  // cluster center scale; noise sigma is 1
  double shift_rate = 0.4;
  std::uint64_t seed = 1;
};

/// Gaussian cluster corpus, a pure function of (spec, seed).
Corpus synth_corpus(const SynthSpec& spec);

// base64 helpers for the little-endian f32 feature encoding
std::string encode_floats_base64(const std::vector<float>& v);
std::vector<float> decode_floats_base64(const std::string& s);

}  // namespace convemo

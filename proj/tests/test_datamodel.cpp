#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "convemo/data.hpp"

using namespace convemo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("convemo_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Corpus tiny_corpus() {
  SynthSpec spec;
  spec.classes = 3;
  spec.train_dialogues = 3;
  spec.val_dialogues = 2;
  spec.test_dialogues = 2;
  spec.utterances_per_dialogue = 4;
  spec.d_text = 5;
  spec.d_visual = 4;
  spec.d_audio = 3;
  spec.seed = 12;
  return synth_corpus(spec);
}

bool corpus_equal(const Corpus& a, const Corpus& b) {
  auto conv_eq = [](const Conversation& x, const Conversation& y) {
    if (x.id != y.id || x.utterances.size() != y.utterances.size()) return false;
    for (std::size_t i = 0; i < x.utterances.size(); ++i) {
      const auto& u = x.utterances[i];
      const auto& v = y.utterances[i];
      if (u.speaker != v.speaker || u.label != v.label) return false;
      if (u.feat_text != v.feat_text || u.feat_visual != v.feat_visual ||
          u.feat_audio != v.feat_audio)
        return false;
    }
    return true;
  };
  auto split_eq = [&](const std::vector<Conversation>& x,
                      const std::vector<Conversation>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!conv_eq(x[i], y[i])) return false;
    return true;
  };
  return a.emotions == b.emotions && a.d_text == b.d_text &&
         a.d_visual == b.d_visual && a.d_audio == b.d_audio &&
         split_eq(a.train, b.train) && split_eq(a.val, b.val) &&
         split_eq(a.test, b.test);
}

}  // namespace

TEST_CASE("base64 feature round trip is bit exact") {
  std::vector<float> v{1.5f, -2.25f, 0.0f, 3.14159f, -1e-20f, 7e12f};
  CHECK(decode_floats_base64(encode_floats_base64(v)) == v);
  CHECK(decode_floats_base64(encode_floats_base64({})).empty());
  CHECK_THROWS_AS(decode_floats_base64("@@@@"), CorpusError);
}

TEST_CASE("corpus writer and loader round trip") {
  Corpus c = tiny_corpus();
  TempDir dir;
  write_corpus(c, dir.path.string());
  Corpus back = load_corpus((dir.path / "manifest.json").string());
  CHECK(corpus_equal(c, back));
}

TEST_CASE("large split counts are preserved") {
  // split sizes shaped like a real benchmark corpus: 1039/114/280 dialogues
  SynthSpec spec;
  spec.classes = 3;
  spec.train_dialogues = 1039;
  spec.val_dialogues = 114;
  spec.test_dialogues = 280;
  spec.utterances_per_dialogue = 1;
  spec.d_text = 2;
  spec.d_visual = 2;
  spec.d_audio = 2;
  Corpus c = synth_corpus(spec);
  CHECK(c.train.size() == 1039);
  CHECK(c.val.size() == 114);
  CHECK(c.test.size() == 280);
  TempDir dir;
  write_corpus(c, dir.path.string());
  Corpus back = load_corpus((dir.path / "manifest.json").string());
  CHECK(back.train.size() == 1039);
  CHECK(back.val.size() == 114);
  CHECK(back.test.size() == 280);
}

TEST_CASE("loader validation errors carry coordinates") {
  Corpus c = tiny_corpus();
  TempDir dir;
  write_corpus(c, dir.path.string());
  const std::string manifest = (dir.path / "manifest.json").string();

  SUBCASE("empty split file") {
    std::ofstream(dir.path / "val.jsonl", std::ios::trunc);
    CHECK_THROWS_WITH_AS(load_corpus(manifest),
                         doctest::Contains("contains zero conversations"),
                         CorpusError);
  }
  SUBCASE("unknown label names dialogue and utterance") {
    std::ofstream out(dir.path / "val.jsonl", std::ios::trunc);
    out << R"({"id":"bad","utterances":[{"speaker":"A","label":"bogus",)"
        << R"("text":")" << encode_floats_base64(std::vector<float>(5, 0.f))
        << R"(","visual":")" << encode_floats_base64(std::vector<float>(4, 0.f))
        << R"(","audio":")" << encode_floats_base64(std::vector<float>(3, 0.f))
        << R"("}]})" << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(manifest),
                         doctest::Contains("dialogue 'bad' utterance 0"),
                         CorpusError);
  }
  SUBCASE("missing modality vector") {
    std::ofstream out(dir.path / "val.jsonl", std::ios::trunc);
    out << R"({"id":"m","utterances":[{"speaker":"A","label":"class0",)"
        << R"("text":")" << encode_floats_base64(std::vector<float>(5, 0.f))
        << R"(","visual":")" << encode_floats_base64(std::vector<float>(4, 0.f))
        << R"("}]})" << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(manifest),
                         doctest::Contains("missing modality vector 'audio'"),
                         CorpusError);
  }
  SUBCASE("ragged feature dims") {
    std::ofstream out(dir.path / "val.jsonl", std::ios::trunc);
    out << R"({"id":"r","utterances":[{"speaker":"A","label":"class0",)"
        << R"("text":")" << encode_floats_base64(std::vector<float>(2, 0.f))
        << R"(","visual":")" << encode_floats_base64(std::vector<float>(4, 0.f))
        << R"(","audio":")" << encode_floats_base64(std::vector<float>(3, 0.f))
        << R"("}]})" << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(manifest),
                         doctest::Contains("has dim 2, expected 5"), CorpusError);
  }
  SUBCASE("utterance cap") {
    CHECK_THROWS_WITH_AS(load_corpus(manifest, 2),
                         doctest::Contains("utterance cap"), CorpusError);
  }
}

TEST_CASE("modal setting parsing") {
  CHECK(parse_modal_setting("TVA") == ModalSetting::TVA);
  CHECK(parse_modal_setting("V") == ModalSetting::V);
  CHECK(to_string(ModalSetting::TA) == "TA");
  CHECK_THROWS_AS(parse_modal_setting("XYZ"), CorpusError);
}

TEST_CASE("modal input arrangements") {
  Corpus c = tiny_corpus();
  const Conversation& conv = c.train[0];
  auto text_of = [&](const ModalTensor& m) { return m.modality == Modality::Text; };

  SUBCASE("TVA gives three distinct streams") {
    ModalStreams s = modal_inputs(conv, ModalSetting::TVA);
    CHECK(s.slots[0].modality == Modality::Text);
    CHECK(s.slots[1].modality == Modality::Visual);
    CHECK(s.slots[2].modality == Modality::Audio);
    CHECK(s.slots[0].features.cols() == c.d_text);
    CHECK(s.slots[1].features.cols() == c.d_visual);
    CHECK(s.slots[2].features.cols() == c.d_audio);
    CHECK(s.slots[0].features.data != s.slots[1].features.data);
  }
  SUBCASE("TA duplicates audio into the last two slots") {
    ModalStreams s = modal_inputs(conv, ModalSetting::TA);
    CHECK(text_of(s.slots[0]));
    CHECK(s.slots[1].modality == Modality::Audio);
    CHECK(s.slots[2].modality == Modality::Audio);
    CHECK(s.slots[1].features.data == s.slots[2].features.data);
  }
  SUBCASE("TV duplicates visual") {
    ModalStreams s = modal_inputs(conv, ModalSetting::TV);
    CHECK(s.slots[1].modality == Modality::Visual);
    CHECK(s.slots[2].modality == Modality::Visual);
  }
  SUBCASE("VA puts visual in the textual-role slot") {
    ModalStreams s = modal_inputs(conv, ModalSetting::VA);
    CHECK(s.slots[0].modality == Modality::Visual);
    CHECK(s.slots[1].modality == Modality::Audio);
    CHECK(s.slots[2].modality == Modality::Audio);
  }
  SUBCASE("unimodal settings replicate one stream") {
    for (ModalSetting m : {ModalSetting::T, ModalSetting::V, ModalSetting::A}) {
      ModalStreams s = modal_inputs(conv, m);
      CHECK(s.slots[0].features.data == s.slots[1].features.data);
      CHECK(s.slots[1].features.data == s.slots[2].features.data);
    }
  }
  SUBCASE("row count matches the dialogue length") {
    ModalStreams s = modal_inputs(conv, ModalSetting::TVA);
    for (const auto& slot : s.slots) {
      CHECK(slot.features.rows() == conv.utterances.size());
      CHECK(slot.valid == std::vector<bool>(conv.utterances.size(), true));
    }
  }
}

TEST_CASE("shift labels") {
  SUBCASE("worked example") {
    ShiftLabelMatrix m = shift_labels({0, 0, 1});
    CHECK(m.s == std::vector<std::uint8_t>{0, 0, 1, 0, 0, 1, 1, 1, 0});
  }
  SUBCASE("uniform labels give the zero matrix") {
    ShiftLabelMatrix m = shift_labels({2, 2, 2, 2});
    CHECK(m.s == std::vector<std::uint8_t>(16, 0));
  }
  SUBCASE("distinct labels give all-ones off the diagonal") {
    ShiftLabelMatrix m = shift_labels({0, 1, 2});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        CHECK(m.at(i, j) == (i == j ? 0 : 1));
  }
  SUBCASE("always symmetric with zero diagonal") {
    RngState rng(77);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.next_below(12);
      std::vector<int> labels(n);
      for (auto& l : labels) l = static_cast<int>(rng.next_below(4));
      ShiftLabelMatrix m = shift_labels(labels);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(m.at(i, i) == 0);
        for (std::size_t j = 0; j < n; ++j) CHECK(m.at(i, j) == m.at(j, i));
      }
    }
  }
}

TEST_CASE("sentiment coarsening") {
  Corpus c;
  c.emotions = {"happy", "sad", "neutral", "angry", "excited", "frustrated"};
  c.d_text = c.d_visual = c.d_audio = 1;
  Conversation conv;
  conv.id = "d";
  for (int l : {0, 5, 2, 1, 4, 3}) {
    Utterance u;
    u.label = l;
    u.feat_text = u.feat_visual = u.feat_audio = {0.f};
    conv.utterances.push_back(u);
  }
  c.train = {conv};
  c.val = {conv};
  c.test = {conv};

  SUBCASE("default scheme merges to three classes") {
    Corpus s = map_to_sentiment(c, SentimentScheme::iemocap_default());
    REQUIRE(s.emotions.size() == 3);
    auto idx = [&](const std::string& name) {
      for (std::size_t i = 0; i < s.emotions.size(); ++i)
        if (s.emotions[i] == name) return static_cast<int>(i);
      return -1;
    };
    const int neg = idx("negative"), pos = idx("positive"), neu = idx("neutral");
    REQUIRE(neg >= 0);
    REQUIRE(pos >= 0);
    REQUIRE(neu >= 0);
    // source order: happy, frustrated, neutral, sad, excited, angry
    std::vector<int> expect{pos, neg, neu, neg, pos, neg};
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(s.train[0].utterances[i].label == expect[i]);
  }
  SUBCASE("identity scheme leaves labels unchanged") {
    SentimentScheme id;
    for (const auto& e : c.emotions) id.mapping.emplace_back(e, e);
    Corpus s = map_to_sentiment(c, id);
    CHECK(s.emotions == c.emotions);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(s.train[0].utterances[i].label == c.train[0].utterances[i].label);
  }
  SUBCASE("unmapped label is an error") {
    SentimentScheme partial;
    partial.mapping.emplace_back("happy", "positive");
    CHECK_THROWS_AS(map_to_sentiment(c, partial), CorpusError);
  }
}

TEST_CASE("synthetic corpus properties") {
  SUBCASE("pure function of the spec") {
    SynthSpec spec;
    spec.train_dialogues = 4;
    spec.val_dialogues = 2;
    spec.test_dialogues = 2;
    Corpus a = synth_corpus(spec);
    Corpus b = synth_corpus(spec);
    CHECK(corpus_equal(a, b));
    spec.seed = 2;
    Corpus other = synth_corpus(spec);
    CHECK_FALSE(corpus_equal(a, other));
  }
  SUBCASE("shift rate zero keeps labels constant within a dialogue") {
    SynthSpec spec;
    spec.shift_rate = 0.0;
    spec.train_dialogues = 5;
    spec.val_dialogues = 1;
    spec.test_dialogues = 1;
    Corpus c = synth_corpus(spec);
    for (const auto& conv : c.train) {
      for (const auto& u : conv.utterances)
        CHECK(u.label == conv.utterances[0].label);
      std::vector<int> labels;
      for (const auto& u : conv.utterances) labels.push_back(u.label);
      ShiftLabelMatrix m = shift_labels(labels);
      for (auto s : m.s) CHECK(s == 0);
    }
  }
  SUBCASE("shift rate one with two classes alternates strictly") {
    SynthSpec spec;
    spec.classes = 2;
    spec.shift_rate = 1.0;
    spec.train_dialogues = 5;
    spec.val_dialogues = 1;
    spec.test_dialogues = 1;
    Corpus c = synth_corpus(spec);
    for (const auto& conv : c.train)
      for (std::size_t i = 1; i < conv.utterances.size(); ++i)
        CHECK(conv.utterances[i].label != conv.utterances[i - 1].label);
  }
  SUBCASE("wide separation: nearest-centroid on text features wins") {
    SynthSpec spec;
    spec.separation = 10.0;
    Corpus c = synth_corpus(spec);
    // estimate per-class text centroids from train, classify test
    std::vector<std::vector<double>> centroid(spec.classes,
                                              std::vector<double>(spec.d_text, 0.0));
    std::vector<double> count(spec.classes, 0.0);
    for (const auto& conv : c.train)
      for (const auto& u : conv.utterances) {
        for (std::size_t d = 0; d < spec.d_text; ++d)
          centroid[u.label][d] += u.feat_text[d];
        count[u.label] += 1.0;
      }
    for (std::size_t k = 0; k < spec.classes; ++k) {
      REQUIRE(count[k] > 0);
      for (auto& v : centroid[k]) v /= count[k];
    }
    std::size_t hits = 0, total = 0;
    for (const auto& conv : c.test)
      for (const auto& u : conv.utterances) {
        double best = 1e300;
        int arg = -1;
        for (std::size_t k = 0; k < spec.classes; ++k) {
          double dist = 0.0;
          for (std::size_t d = 0; d < spec.d_text; ++d) {
            const double diff = u.feat_text[d] - centroid[k][d];
            dist += diff * diff;
          }
          if (dist < best) {
            best = dist;
            arg = static_cast<int>(k);
          }
        }
        hits += (arg == u.label);
        ++total;
      }
    CHECK(static_cast<double>(hits) / total > 0.99);
  }
  SUBCASE("speakers alternate") {
    Corpus c = tiny_corpus();
    for (const auto& conv : c.train)
      for (std::size_t i = 0; i < conv.utterances.size(); ++i)
        CHECK(conv.utterances[i].speaker == ((i % 2) ? "B" : "A"));
  }
}

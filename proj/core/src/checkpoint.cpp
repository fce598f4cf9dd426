#include "convemo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace convemo {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'C', 'V', 'M', 'O'};
constexpr std::uint32_t kVersion = 1;

json model_to_json(const ModelConfig& c) {
  return json{{"d_text", c.d_text},
              {"d_visual", c.d_visual},
              {"d_audio", c.d_audio},
              {"dim", c.dim},
              {"heads", c.heads},
              {"rume_depth", c.rume_depth},
              {"acme_depth", c.acme_depth},
              {"ff_mult", c.ff_mult},
              {"dropout_rume", c.dropout_rume},
              {"dropout_acme", c.dropout_acme},
              {"n_classes", c.n_classes},
              {"encoder", to_string(c.encoder)},
              {"modal_setting", to_string(c.modal_setting)},
              {"use_rume", c.use_rume},
              {"use_acme", c.use_acme},
              {"use_lesm", c.use_lesm},
              {"shift_pair_cap", c.shift_pair_cap}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.d_text = j.at("d_text").get<std::size_t>();
  c.d_visual = j.at("d_visual").get<std::size_t>();
  c.d_audio = j.at("d_audio").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.rume_depth = j.at("rume_depth").get<std::size_t>();
  c.acme_depth = j.at("acme_depth").get<std::size_t>();
  c.ff_mult = j.value("ff_mult", std::size_t{4});
  c.dropout_rume = j.at("dropout_rume").get<double>();
  c.dropout_acme = j.at("dropout_acme").get<double>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
  c.modal_setting = parse_modal_setting(j.at("modal_setting").get<std::string>());
  c.use_rume = j.value("use_rume", true);
  c.use_acme = j.value("use_acme", true);
  c.use_lesm = j.value("use_lesm", true);
  c.shift_pair_cap = j.value("shift_pair_cap", std::size_t{512});
  return c;
}

json objective_to_json(const ObjectiveConfig& o) {
  return json{{"mode", o.mode == ObjectiveConfig::Mode::Manual ? "manual" : "automatic"},
              {"lambda", o.lambda},
              {"weight_decay", o.weight_decay}};
}

ObjectiveConfig objective_from_json(const json& j) {
  ObjectiveConfig o;
  const std::string mode = j.value("mode", "manual");
  if (mode == "manual") o.mode = ObjectiveConfig::Mode::Manual;
  else if (mode == "automatic") o.mode = ObjectiveConfig::Mode::Automatic;
  else throw std::invalid_argument("unknown objective mode '" + mode + "'");
  o.lambda = j.value("lambda", 0.9);
  o.weight_decay = j.value("weight_decay", 1e-4);
  return o;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  return model_to_json(cfg).dump(2);
}

ModelConfig model_config_from_json(const std::string& json_text) {
  return model_from_json(json::parse(json_text));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["model"] = model_to_json(ckpt.model);
  header["objective"] = objective_to_json(ckpt.objective);
  header["emotions"] = ckpt.emotions;
  json dir = json::array();
  for (const auto& [name, e] : ckpt.params)
    dir.push_back(json{{"name", name}, {"shape", e.value.shape}});
  header["tensors"] = std::move(dir);
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& [name, e] : ckpt.params)
    out.write(reinterpret_cast<const char*>(e.value.data.data()),
              static_cast<std::streamsize>(e.value.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  json header = json::parse(htext);

  Checkpoint ckpt;
  ckpt.model = model_from_json(header.at("model"));
  ckpt.objective = objective_from_json(header.at("objective"));
  for (const auto& e : header.value("emotions", json::array()))
    ckpt.emotions.push_back(e.get<std::string>());
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    std::vector<std::size_t> shape =
        entry.at("shape").get<std::vector<std::size_t>>();
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in)
      throw std::runtime_error("truncated checkpoint payload at tensor '" +
                               name + "'");
    ckpt.params.add(name, std::move(t));
  }
  return ckpt;
}

}  // namespace convemo

#include "protocolnet/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "protocolnet/digest.hpp"
#include "protocolnet/version.hpp"

namespace protocolnet {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'R', 'T', 'M'};

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return value;
  }

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw Error(Errc::TruncatedFile, "model container ends early");
    std::string_view view(bytes_.data() + pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string joined;
  for (const auto& t : tokens) {
    joined += t;
    joined.push_back('\n');
  }
  return joined;
}

struct TensorRef {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  float* data;
};

std::vector<TensorRef> tensor_table(Mlp<float>& net) {
  std::vector<TensorRef> table;
  auto spans = net.params.tensors();
  const auto names = MlpParameters<float>::tensor_names();
  const auto w = net.shape.widths();
  std::size_t t = 0;
  for (int l = 0; l < kDenseLayers; ++l) {
    table.push_back({names[t], w[l], w[l + 1], spans[t].data()});
    ++t;
    table.push_back({names[t], 1, w[l + 1], spans[t].data()});
    ++t;
    if (l < kNormLayers) {
      table.push_back({names[t], 1, w[l + 1], spans[t].data()});
      ++t;
      table.push_back({names[t], 1, w[l + 1], spans[t].data()});
      ++t;
    }
  }
  for (int l = 0; l < kNormLayers; ++l) {
    table.push_back({"bn" + std::to_string(l) + ".running_mean", 1, w[l + 1], net.stats.mean[l].data()});
    table.push_back({"bn" + std::to_string(l) + ".running_var", 1, w[l + 1], net.stats.var[l].data()});
  }
  return table;
}

json config_to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},     {"n_classes", c.n_classes},   {"dropout_rate", c.dropout_rate},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},     {"batch_size", c.batch_size},
          {"seed", c.seed},               {"bn_momentum", c.bn_momentum}, {"bn_epsilon", c.bn_epsilon},
          {"hidden_widths", c.hidden_widths()}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  return c;
}

}  // namespace

std::string serialize_model(const MlpModel& model) {
  auto net = model.net;
  net.check_shapes();
  if (model.labels.size() != static_cast<std::size_t>(net.shape.n_classes)) {
    throw Error(Errc::ShapeMismatch, "label list length differs from n_classes");
  }
  const auto table = tensor_table(net);

  json tensors = json::array();
  std::string payload;
  for (const auto& t : table) {
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
    payload.append(reinterpret_cast<const char*>(t.data), static_cast<std::size_t>(t.rows * t.cols) * sizeof(float));
  }

  const json meta = {
      {"config", config_to_json(model.config)},
      {"level", level_name(model.level)},
      {"labels", model.labels},
      {"vocabulary", {{"indication", model.vocabulary.indication_tokens},
                      {"diagnosis", model.vocabulary.diagnosis_tokens}}},
      {"vocabulary_digests", {{"indication", sha256_hex(join_tokens(model.vocabulary.indication_tokens))},
                              {"diagnosis", sha256_hex(join_tokens(model.vocabulary.diagnosis_tokens))}}},
      {"creation", {{"tool", kToolName}, {"version", kToolVersion}, {"seed", model.config.seed}}},
      {"tensors", tensors},
  };
  const std::string meta_text = meta.dump();

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  put<std::uint64_t>(out, payload.size());
  out += payload;
  put<std::uint32_t>(out, crc32(payload));
  return out;
}

MlpModel deserialize_model(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kMagic, 4)) {
    throw Error(Errc::FormatVersionMismatch, "not a PRTM model container");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kContainerVersion) {
    throw Error(Errc::FormatVersionMismatch, "container version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kContainerVersion));
  }
  const auto meta_size = in.get<std::uint64_t>();
  const auto meta_text = in.take(meta_size);
  const auto payload_size = in.get<std::uint64_t>();
  const auto payload = in.take(payload_size);
  const auto stored_crc = in.get<std::uint32_t>();
  if (crc32(payload) != stored_crc) throw Error(Errc::ChecksumMismatch, "parameter payload CRC mismatch");

  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw Error(Errc::ChecksumMismatch, std::string("metadata is not valid JSON: ") + e.what());
  }

  MlpModel model;
  try {
    model.config = config_from_json(meta.at("config"));
    model.level = parse_level(meta.at("level").get<std::string>());
    model.labels = meta.at("labels").get<std::vector<std::string>>();
    model.vocabulary.indication_tokens = meta.at("vocabulary").at("indication").get<std::vector<std::string>>();
    model.vocabulary.diagnosis_tokens = meta.at("vocabulary").at("diagnosis").get<std::vector<std::string>>();
    const auto& digests = meta.at("vocabulary_digests");
    if (digests.at("indication").get<std::string>() != sha256_hex(join_tokens(model.vocabulary.indication_tokens)) ||
        digests.at("diagnosis").get<std::string>() != sha256_hex(join_tokens(model.vocabulary.diagnosis_tokens))) {
      throw Error(Errc::ChecksumMismatch, "vocabulary digest mismatch");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ChecksumMismatch, std::string("metadata incomplete: ") + e.what());
  }
  model.config.validate();
  if (model.vocabulary.dimension() != model.config.input_dim) {
    throw Error(Errc::ShapeMismatch, "vocabulary size differs from input_dim");
  }
  if (model.labels.size() != model.config.n_classes) throw Error(Errc::ShapeMismatch, "label count differs from n_classes");

  model.net = init_network<float>(model.config.shape(), 0, model.config.bn_momentum, model.config.bn_epsilon);
  auto table = tensor_table(model.net);
  const auto& declared = meta.at("tensors");
  if (declared.size() != table.size()) throw Error(Errc::ShapeMismatch, "tensor table length");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& t = table[i];
    if (declared[i].at("name").get<std::string>() != t.name ||
        declared[i].at("shape") != json::array({t.rows, t.cols})) {
      throw Error(Errc::ShapeMismatch, "tensor " + t.name + " does not match the configured shape chain");
    }
    const auto n_bytes = static_cast<std::size_t>(t.rows * t.cols) * sizeof(float);
    if (offset + n_bytes > payload.size()) throw Error(Errc::TruncatedFile, "payload shorter than tensor table");
    std::memcpy(t.data, payload.data() + offset, n_bytes);
    offset += n_bytes;
  }
  if (offset != payload.size()) throw Error(Errc::ShapeMismatch, "payload longer than tensor table");
  model.net.check_shapes();
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace protocolnet

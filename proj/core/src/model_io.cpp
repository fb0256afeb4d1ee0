#include "ogl/model_io.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace ogl::model_io {

namespace {

constexpr char kMagic[4] = {'O', 'G', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct ByteReader {
  const std::string& data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw std::runtime_error("model_io: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos++])) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos++])) << (8 * i);
    }
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  unsigned char byte() {
    need(1);
    return static_cast<unsigned char>(data[pos++]);
  }
};

std::string to_binary(const tuner::MtuneModel& model) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.net.layers.size()));
  for (const auto& layer : model.net.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.input_dim));
    put_u32(out, static_cast<std::uint32_t>(layer.output_dim));
    out.push_back(static_cast<char>(layer.activation));
  }
  put_u64(out, model.net.params.size());
  for (double p : model.net.params) put_f64(out, p);
  put_u64(out, model.scaler.mean.size());
  for (double m : model.scaler.mean) put_f64(out, m);
  for (double s : model.scaler.std_dev) put_f64(out, s);
  return out;
}

tuner::MtuneModel from_binary(const std::string& data) {
  if (data.size() < 8 || data.compare(0, 4, kMagic, 4) != 0) {
    throw std::runtime_error("model_io: not an OGLM file");
  }
  ByteReader r{data, 4};
  std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("model_io: unsupported format version " + std::to_string(version));
  }
  tuner::MtuneModel model;
  std::uint32_t layer_count = r.u32();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    nn::LayerSpec layer;
    layer.input_dim = static_cast<int>(r.u32());
    layer.output_dim = static_cast<int>(r.u32());
    unsigned char act = r.byte();
    if (act > 2) throw std::runtime_error("model_io: bad activation code");
    layer.activation = static_cast<nn::Activation>(act);
    model.net.layers.push_back(layer);
  }
  nn::validate_layers(model.net.layers);
  std::uint64_t param_count = r.u64();
  if (param_count != static_cast<std::uint64_t>(nn::param_count(model.net.layers))) {
    throw std::runtime_error("model_io: parameter count does not match layer spec");
  }
  model.net.params.resize(param_count);
  for (auto& p : model.net.params) p = r.f64();
  std::uint64_t dim = r.u64();
  model.scaler.mean.resize(dim);
  model.scaler.std_dev.resize(dim);
  for (auto& m : model.scaler.mean) m = r.f64();
  for (auto& s : model.scaler.std_dev) s = r.f64();
  if (r.pos != data.size()) throw std::runtime_error("model_io: trailing bytes");
  return model;
}

std::string to_json(const tuner::MtuneModel& model) {
  nlohmann::json j;
  j["format"] = "ogl-mtune";
  j["version"] = kVersion;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& layer : model.net.layers) {
    layers.push_back({{"in", layer.input_dim},
                      {"out", layer.output_dim},
                      {"activation", nn::to_string(layer.activation)}});
  }
  j["params"] = model.net.params;
  j["scaler"] = {{"mean", model.scaler.mean}, {"std", model.scaler.std_dev}};
  return j.dump(2) + "\n";
}

tuner::MtuneModel from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model_io: corrupt JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "ogl-mtune") {
      throw std::runtime_error("model_io: not an ogl-mtune document");
    }
    if (j.at("version").get<std::uint32_t>() != kVersion) {
      throw std::runtime_error("model_io: unsupported format version " +
                               j.at("version").dump());
    }
    tuner::MtuneModel model;
    for (const auto& layer : j.at("layers")) {
      nn::LayerSpec spec;
      spec.input_dim = layer.at("in").get<int>();
      spec.output_dim = layer.at("out").get<int>();
      spec.activation = nn::activation_from_string(layer.at("activation").get<std::string>());
      model.net.layers.push_back(spec);
    }
    nn::validate_layers(model.net.layers);
    model.net.params = j.at("params").get<std::vector<double>>();
    if (model.net.params.size() !=
        static_cast<std::size_t>(nn::param_count(model.net.layers))) {
      throw std::runtime_error("model_io: parameter count does not match layer spec");
    }
    model.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    model.scaler.std_dev = j.at("scaler").at("std").get<std::vector<double>>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model_io: malformed ogl-mtune document: ") +
                             e.what());
  }
}

bool is_json_path(const std::string& path) {
  return path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

}  // namespace

long long save_mtune(const tuner::MtuneModel& model, const std::string& path) {
  if (model.scaler.mean.size() != model.scaler.std_dev.size()) {
    throw std::invalid_argument("model_io: scaler mean/std length mismatch");
  }
  std::string payload = is_json_path(path) ? to_json(model) : to_binary(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("model_io: cannot open " + path + " for writing");
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  f.flush();
  if (!f) throw std::runtime_error("model_io: write failed for " + path);
  return static_cast<long long>(payload.size());
}

tuner::MtuneModel load_mtune(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("model_io: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  tuner::MtuneModel model =
      data.compare(0, 4, kMagic, 4) == 0 ? from_binary(data) : from_json(data);
  if (model.scaler.mean.size() != model.scaler.std_dev.size()) {
    throw std::runtime_error("model_io: scaler mean/std length mismatch");
  }
  model.serialized_bytes = static_cast<long long>(data.size());
  return model;
}

}  // namespace ogl::model_io

#pragma once

// Versioned binary checkpoint:
//   bytes 0..7   magic "PGNNCKV1"
//   bytes 8..11  uint32 little-endian header length H
//   bytes 12..   H bytes of JSON: {"config": {...}, "tensors": [{name, rows, cols}, ...]}
//   then         raw little-endian doubles, tensors in canonical order
// Loading re-derives the expected tensor list from the config and refuses
// any mismatch, truncation, or trailing bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathgnn/model.hpp"

namespace pathgnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'P', 'G', 'N', 'N', 'C', 'K', 'V', '1'};

inline nlohmann::json model_config_json(const ModelConfig& cfg) {
  return nlohmann::json{{"n_layers", cfg.n_layers},
                        {"widths", cfg.widths},
                        {"head_hidden", cfg.head_hidden},
                        {"dropout_rate", cfg.dropout_rate},
                        {"leaky_slope", cfg.leaky_slope}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.widths = j.at("widths").get<std::vector<int>>();
    cfg.head_hidden = j.at("head_hidden").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                            const std::filesystem::path& path) {
  check_params_match(params, cfg);
  const auto names = param_names(cfg);
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    tensors.push_back({{"name", names[i]},
                       {"rows", params.tensors[i].rows},
                       {"cols", params.tensors[i].cols}});
  const std::string header =
      nlohmann::json{{"config", model_config_json(cfg)}, {"tensors", std::move(tensors)}}.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Tensor& t : params.tensors)
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

struct Checkpoint {
  ModelParams params;
  ModelConfig cfg;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path.string() + ": " + msg);
  };
  if (bytes.size() < sizeof(kCheckpointMagic) + sizeof(std::uint32_t))
    fail("truncated checkpoint (shorter than its fixed header)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    fail("not a checkpoint or unsupported version (bad magic)");
  std::uint32_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kCheckpointMagic), sizeof(hlen));
  const std::size_t header_off = sizeof(kCheckpointMagic) + sizeof(hlen);
  if (bytes.size() < header_off + hlen) fail("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_off),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(header_off + hlen));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("corrupt header JSON: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.cfg = model_config_from_json(header.at("config"));
  } catch (const std::exception& e) {
    fail(std::string("bad config: ") + e.what());
  }

  const auto expect_names = param_names(ck.cfg);
  const auto expect_shapes = param_shapes(ck.cfg);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != expect_names.size())
    fail("header lists " + std::to_string(tensors.size()) + " tensors, config requires " +
         std::to_string(expect_names.size()));
  std::size_t off = header_off + hlen;
  for (std::size_t i = 0; i < expect_names.size(); ++i) {
    const auto& t = tensors[i];
    const std::string name = t.at("name").get<std::string>();
    const int rows = t.at("rows").get<int>();
    const int cols = t.at("cols").get<int>();
    if (name != expect_names[i])
      fail("tensor " + std::to_string(i) + " is '" + name + "', expected '" + expect_names[i] + "'");
    if (rows != expect_shapes[i].first || cols != expect_shapes[i].second)
      fail(name + " has shape (" + std::to_string(rows) + "x" + std::to_string(cols) +
           "), config requires (" + std::to_string(expect_shapes[i].first) + "x" +
           std::to_string(expect_shapes[i].second) + ")");
    Tensor tensor(rows, cols);
    const std::size_t nbytes = tensor.size() * sizeof(double);
    if (bytes.size() < off + nbytes) fail("truncated tensor data for " + name);
    std::memcpy(tensor.v.data(), bytes.data() + off, nbytes);
    off += nbytes;
    ck.params.tensors.push_back(std::move(tensor));
  }
  if (off != bytes.size())
    fail("unexpected " + std::to_string(bytes.size() - off) + " trailing bytes");
  for (const Tensor& t : ck.params.tensors)
    for (double x : t.v)
      if (!std::isfinite(x)) fail("checkpoint holds non-finite parameter values");
  return ck;
}

}  // namespace pathgnn

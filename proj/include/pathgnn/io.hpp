#pragma once

// Graph record serialization ("v1") and dataset file layout.
//
// One graph per record:
//   {"destination": 4, "edges": [[0,1,1.5], ...], "format": "v1",
//    "labels": {"edges": [0,1,...], "nodes": [1,0,...]}, "n": 6, "source": 2}
// "labels" is optional. Datasets are line-delimited records (one per line)
// in train.jsonl / val.jsonl / test.jsonl next to a manifest.json. Key order
// and double formatting come from the JSON library's canonical dump, so
// identical data produces identical bytes.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathgnn/graph.hpp"
#include "pathgnn/oracle.hpp"

namespace pathgnn {

inline constexpr const char* kGraphFormatVersion = "v1";

struct GraphRecord {
  Graph graph;
  std::optional<PathLabels> labels;
};

inline nlohmann::json graph_record_json(const Graph& g, const PathLabels* labels = nullptr) {
  nlohmann::json rec;
  rec["format"] = kGraphFormatVersion;
  rec["n"] = g.n_nodes;
  rec["source"] = g.source;
  rec["destination"] = g.destination;
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back(nlohmann::json::array({e.u, e.v, e.w}));
  rec["edges"] = std::move(edges);
  if (labels) {
    rec["labels"] = nlohmann::json{{"nodes", labels->nodes}, {"edges", labels->edges}};
  }
  return rec;
}

/// Parses and fully validates one record (build_graph re-checks all graph
/// invariants; label lengths must match). Throws std::runtime_error with a
/// diagnostic on any malformed input.
inline GraphRecord parse_graph_record(const nlohmann::json& rec) {
  auto fail = [](const std::string& msg) { throw std::runtime_error("graph record: " + msg); };
  try {
    if (!rec.is_object()) fail("not a JSON object");
    if (rec.contains("format") && rec.at("format").get<std::string>() != kGraphFormatVersion)
      fail("unsupported format '" + rec.at("format").get<std::string>() + "'");
    const int n = rec.at("n").get<int>();
    const int source = rec.at("source").get<int>();
    const int destination = rec.at("destination").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : rec.at("edges")) {
      if (!e.is_array() || e.size() != 3) fail("edge entries must be [u, v, w]");
      edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
    }
    GraphRecord out;
    out.graph = build_graph(n, edges, source, destination);
    if (rec.contains("labels")) {
      PathLabels lab;
      lab.nodes = rec.at("labels").at("nodes").get<std::vector<int>>();
      lab.edges = rec.at("labels").at("edges").get<std::vector<int>>();
      if (lab.nodes.size() != static_cast<std::size_t>(n)) fail("node label length mismatch");
      if (lab.edges.size() != edges.size()) fail("edge label length mismatch");
      for (int x : lab.nodes)
        if (x != 0 && x != 1) fail("node labels must be 0/1");
      for (int x : lab.edges)
        if (x != 0 && x != 1) fail("edge labels must be 0/1");
      out.labels = std::move(lab);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("graph record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("graph record: ") + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Single-record file: one JSON object, pretty-printed.
inline void write_graph_file(const std::filesystem::path& path, const Graph& g,
                             const PathLabels* labels = nullptr) {
  write_text_file(path, graph_record_json(g, labels).dump(2) + "\n");
}

inline GraphRecord read_graph_file(const std::filesystem::path& path) {
  try {
    return parse_graph_record(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

/// Line-delimited records, one compact JSON object per line.
inline void write_jsonl(const std::filesystem::path& path, const std::vector<GraphRecord>& records) {
  std::string buf;
  for (const GraphRecord& r : records) {
    buf += graph_record_json(r.graph, r.labels ? &*r.labels : nullptr).dump();
    buf += '\n';
  }
  write_text_file(path, buf);
}

inline std::vector<GraphRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<GraphRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_graph_record(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest) {
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace pathgnn

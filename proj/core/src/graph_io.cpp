// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "macprune/netgraph.hpp"

namespace macprune {

namespace {

using Edge = std::pair<std::string, std::string>;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

int parse_int(std::string_view tok, int line_no, std::string_view what) {
  int value = 0;
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": expected integer for " +
                     std::string(what) + ", got '" + std::string(tok) + "'");
  }
  return value;
}

// "a->b, c->d->e"
void parse_edge_list(std::string_view text, int line_no, std::vector<Edge>& edges) {
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    const auto chain = trim(text.substr(start, comma - start));
    start = comma + 1;
    if (chain.empty()) {
      if (comma >= text.size()) break;
      continue;
    }
    std::vector<std::string> ids;
    std::size_t pos = 0;
    while (true) {
      const auto arrow = chain.find("->", pos);
      const auto piece = trim(chain.substr(pos, arrow == std::string_view::npos ? std::string_view::npos : arrow - pos));
      if (piece.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed edge '" + std::string(chain) + "'");
      }
      ids.emplace_back(piece);
      if (arrow == std::string_view::npos) break;
      pos = arrow + 2;
    }
    if (ids.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) + ": edge '" + std::string(chain) + "' has no '->'");
    }
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) edges.emplace_back(ids[i], ids[i + 1]);
    if (comma >= text.size()) break;
  }
}

LayerNode parse_node_line(std::string_view line, int line_no) {
  const auto toks = split_ws(line);
  if (toks.size() < 9) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": node needs 'id kind in out kh kw stride out_h out_w', got " +
                     std::to_string(toks.size()) + " fields");
  }
  LayerNode n;
  n.id = std::string(toks[0]);
  const auto kind = parse_layer_kind(toks[1]);
  if (!kind) {
    throw ParseError("line " + std::to_string(line_no) + ": unknown layer kind '" + std::string(toks[1]) + "'");
  }
  n.kind = *kind;
  n.in_channels = parse_int(toks[2], line_no, "in");
  n.out_channels = parse_int(toks[3], line_no, "out");
  n.kernel_h = parse_int(toks[4], line_no, "kh");
  n.kernel_w = parse_int(toks[5], line_no, "kw");
  n.stride = parse_int(toks[6], line_no, "stride");
  n.out_h = parse_int(toks[7], line_no, "out_h");
  n.out_w = parse_int(toks[8], line_no, "out_w");
  for (std::size_t i = 9; i < toks.size(); ++i) {
    const auto tok = toks[i];
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": unexpected token '" + std::string(tok) + "'");
    }
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "heads") {
      n.num_heads = parse_int(val, line_no, "heads");
    } else if (key == "groups") {
      n.groups = parse_int(val, line_no, "groups");
    } else if (key == "prunable") {
      n.prunable = parse_int(val, line_no, "prunable") != 0;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown attribute '" + std::string(key) + "'");
    }
  }
  return n;
}

DatasetProfile parse_profile_or_throw(std::string_view text, int line_no) {
  const auto p = parse_dataset_profile(trim(text));
  if (!p) {
    throw ParseError("line " + std::to_string(line_no) + ": unknown dataset profile '" +
                     std::string(trim(text)) + "'");
  }
  return *p;
}

bool starts_with_key(std::string_view line, std::string_view key) {
  return line.size() > key.size() && line.substr(0, key.size()) == key && line[key.size()] == ':';
}

}  // namespace

ModelGraph load_graph(std::string_view spec_text) {
  std::vector<LayerNode> nodes;
  std::vector<Edge> edges;
  DatasetProfile profile = DatasetProfile::kSynthetic;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= spec_text.size()) {
    auto nl = spec_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = spec_text.size();
    std::string_view line = spec_text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      if (starts_with_key(line, "dataset")) {
        profile = parse_profile_or_throw(line.substr(8), line_no);
      } else if (starts_with_key(line, "edges")) {
        parse_edge_list(line.substr(6), line_no, edges);
      } else {
        std::string_view node_part = line;
        if (const auto semi = line.find(';'); semi != std::string_view::npos) {
          node_part = trim(line.substr(0, semi));
          const auto tail = trim(line.substr(semi + 1));
          if (!starts_with_key(tail, "edges")) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 'edges:' after ';'");
          }
          parse_edge_list(tail.substr(6), line_no, edges);
        }
        if (!node_part.empty()) nodes.push_back(parse_node_line(node_part, line_no));
      }
    }
    if (nl >= spec_text.size()) break;
  }
  if (nodes.empty()) throw ParseError("model spec defines no nodes");
  return ModelGraph(std::move(nodes), std::move(edges), profile);
}

ModelGraph load_graph_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON model spec: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw ParseError("JSON model spec needs a 'nodes' array");
  }
  DatasetProfile profile = DatasetProfile::kSynthetic;
  for (const char* key : {"dataset_profile", "dataset"}) {
    if (doc.contains(key)) profile = parse_profile_or_throw(doc[key].get<std::string>(), 0);
  }

  std::vector<LayerNode> nodes;
  try {
    for (const auto& j : doc["nodes"]) {
      LayerNode n;
      n.id = j.at("id").get<std::string>();
      const auto kind_text = j.at("kind").get<std::string>();
      const auto kind = parse_layer_kind(kind_text);
      if (!kind) throw ParseError("node '" + n.id + "': unknown layer kind '" + kind_text + "'");
      n.kind = *kind;
      n.in_channels = j.at("in_channels").get<int>();
      n.out_channels = j.at("out_channels").get<int>();
      n.kernel_h = j.value("kernel_h", 1);
      n.kernel_w = j.value("kernel_w", 1);
      n.stride = j.value("stride", 1);
      n.out_h = j.value("out_h", 1);
      n.out_w = j.value("out_w", 1);
      n.num_heads = j.value("num_heads", 0);
      n.groups = j.value("groups", 1);
      n.prunable = j.value("prunable", true);
      nodes.push_back(std::move(n));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("JSON model spec: ") + e.what());
  }

  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    for (const auto& e : doc["edges"]) {
      if (e.is_string()) {
        parse_edge_list(e.get<std::string>(), 0, edges);
      } else if (e.is_array() && e.size() == 2) {
        edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      } else {
        throw ParseError("JSON model spec: edge entries must be \"a->b\" or [a, b]");
      }
    }
  }
  return ModelGraph(std::move(nodes), std::move(edges), profile);
}

ModelGraph load_graph_any(std::string_view text) {
  const auto t = trim(text);
  if (!t.empty() && t.front() == '{') return load_graph_json(t);
  return load_graph(text);
}

ModelGraph load_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model spec '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_graph_any(ss.str());
}

std::string to_text(const ModelGraph& graph) {
  std::ostringstream out;
  out << "dataset: " << to_string(graph.dataset_profile()) << "\n";
  for (const auto& n : graph.nodes()) {
    out << n.id << ' ' << to_string(n.kind) << ' ' << n.in_channels << ' ' << n.out_channels << ' '
        << n.kernel_h << ' ' << n.kernel_w << ' ' << n.stride << ' ' << n.out_h << ' ' << n.out_w;
    if (n.num_heads > 0) out << " heads=" << n.num_heads;
    if (n.groups > 1) out << " groups=" << n.groups;
    if (!n.prunable) out << " prunable=0";
    out << "\n";
  }
  for (const auto& [a, b] : graph.edges()) out << "edges: " << a << "->" << b << "\n";
  return out.str();
}

std::string to_json_text(const ModelGraph& graph) {
  nlohmann::ordered_json doc;
  doc["dataset_profile"] = std::string(to_string(graph.dataset_profile()));
  auto& nodes = doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes()) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["kind"] = std::string(to_string(n.kind));
    j["in_channels"] = n.in_channels;
    j["out_channels"] = n.out_channels;
    j["kernel_h"] = n.kernel_h;
    j["kernel_w"] = n.kernel_w;
    j["stride"] = n.stride;
    j["out_h"] = n.out_h;
    j["out_w"] = n.out_w;
    j["num_heads"] = n.num_heads;
    j["groups"] = n.groups;
    j["prunable"] = n.prunable;
    nodes.push_back(std::move(j));
  }
  auto& edges = doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : graph.edges()) edges.push_back(a + "->" + b);
  return doc.dump(2) + "\n";
}

}  // namespace macprune

// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "placesched/graph.hpp"

namespace placesched {

namespace detail {

inline void require_keys(const nlohmann::json& obj, std::string_view where,
                         std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) throw FormatError(std::string(where) + ": expected an object");
  for (auto key : keys) {
    if (!obj.contains(std::string(key))) {
      throw FormatError(std::string(where) + ": missing key \"" + std::string(key) + "\"");
    }
  }
  for (const auto& [name, value] : obj.items()) {
    bool known = false;
    for (auto key : keys) known = known || name == key;
    if (!known) throw FormatError(std::string(where) + ": unknown key \"" + name + "\"");
  }
}

inline std::string get_string(const nlohmann::json& obj, const char* key, std::string_view where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw FormatError(std::string(where) + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::int64_t get_int(const nlohmann::json& obj, const char* key, std::string_view where) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw FormatError(std::string(where) + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

inline double get_number(const nlohmann::json& obj, const char* key, std::string_view where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw FormatError(std::string(where) + "." + key + ": expected a number");
  return v.get<double>();
}

inline const nlohmann::json& get_array(const nlohmann::json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_array()) throw FormatError(std::string("graph.") + key + ": expected an array");
  return v;
}

}  // namespace detail

/// Parses the graph interchange format and validates the result.
/// Throws FormatError on schema problems and InvariantError on invariant
/// violations.
inline ComputationGraph graph_from_json(const nlohmann::json& doc) {
  detail::require_keys(doc, "graph", {"ops", "tensors", "consumers"});
  ComputationGraph g;
  const auto& ops = detail::get_array(doc, "ops");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string where = "ops[" + std::to_string(i) + "]";
    detail::require_keys(ops[i], where, {"id", "duration", "internal_memory"});
    g.ops.push_back({detail::get_string(ops[i], "id", where),
                     detail::get_number(ops[i], "duration", where),
                     detail::get_int(ops[i], "internal_memory", where)});
  }
  const auto& tensors = detail::get_array(doc, "tensors");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string where = "tensors[" + std::to_string(i) + "]";
    detail::require_keys(tensors[i], where, {"id", "producer", "size"});
    g.tensors.push_back({detail::get_string(tensors[i], "id", where),
                         detail::get_string(tensors[i], "producer", where),
                         detail::get_int(tensors[i], "size", where)});
  }
  const auto& consumers = detail::get_array(doc, "consumers");
  for (std::size_t i = 0; i < consumers.size(); ++i) {
    const std::string where = "consumers[" + std::to_string(i) + "]";
    detail::require_keys(consumers[i], where, {"tensor", "op", "control"});
    const auto& control = consumers[i].at("control");
    if (!control.is_boolean()) throw FormatError(where + ".control: expected a boolean");
    g.consumers.push_back({detail::get_string(consumers[i], "tensor", where),
                           detail::get_string(consumers[i], "op", where), control.get<bool>()});
  }
  if (auto violations = validate(g); !violations.empty()) {
    throw InvariantError("invalid graph: " + describe(violations));
  }
  return g;
}

inline nlohmann::json graph_to_json(const ComputationGraph& g) {
  nlohmann::json ops = nlohmann::json::array();
  for (const Op& op : g.ops) {
    ops.push_back({{"id", op.id}, {"duration", op.duration}, {"internal_memory", op.internal_memory}});
  }
  nlohmann::json tensors = nlohmann::json::array();
  for (const Tensor& t : g.tensors) {
    tensors.push_back({{"id", t.id}, {"producer", t.producer}, {"size", t.size}});
  }
  nlohmann::json consumers = nlohmann::json::array();
  for (const ConsumerEdge& e : g.consumers) {
    consumers.push_back({{"tensor", e.tensor}, {"op", e.op}, {"control", e.control}});
  }
  return {{"ops", std::move(ops)}, {"tensors", std::move(tensors)}, {"consumers", std::move(consumers)}};
}

inline ComputationGraph parse_graph_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
  return graph_from_json(doc);
}

/// Thrown when a file cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline ComputationGraph read_graph_json(const std::filesystem::path& path) {
  return parse_graph_json(read_text_file(path));
}

inline void write_graph_json(const std::filesystem::path& path, const ComputationGraph& g) {
  write_text_file(path, graph_to_json(g).dump(1) + "\n");
}

}  // namespace placesched

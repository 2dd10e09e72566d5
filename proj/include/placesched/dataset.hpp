// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset directories: graph JSON files plus manifest.json, which lists every
// file with its split and the base graph it was derived from.

#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "placesched/datagen.hpp"
#include "placesched/graph_io.hpp"
#include "placesched/parallel.hpp"

namespace placesched {

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {"train", "valid", "test"};
  return names;
}

struct ManifestEntry {
  std::string file;  // relative to the dataset directory
  std::string split;
  std::string base_id;
  int copy = 0;  // 0 is the unperturbed base graph
  double filter_improvement = 0.0;
};

struct Manifest {
  std::vector<ManifestEntry> graphs;
  nlohmann::json info = nlohmann::json::object();  // generator settings and statistics

  std::vector<const ManifestEntry*> split(const std::string& name) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : graphs)
      if (e.split == name) out.push_back(&e);
    return out;
  }
};

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json graphs = nlohmann::json::array();
  for (const auto& e : m.graphs) {
    graphs.push_back({{"file", e.file},
                      {"split", e.split},
                      {"base_id", e.base_id},
                      {"copy", e.copy},
                      {"filter_improvement", e.filter_improvement}});
  }
  return {{"format", "placesched-dataset"}, {"version", 1}, {"info", m.info}, {"graphs", graphs}};
}

/// Parses and checks a manifest: known splits, unique files, and no base
/// graph shared between splits.
inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    if (j.at("format").get<std::string>() != "placesched-dataset") throw FormatError("not a dataset manifest");
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported manifest version");
    if (j.contains("info")) m.info = j.at("info");
    for (const auto& g : j.at("graphs")) {
      ManifestEntry e;
      e.file = g.at("file").get<std::string>();
      e.split = g.at("split").get<std::string>();
      e.base_id = g.value("base_id", e.file);
      e.copy = g.value("copy", 0);
      e.filter_improvement = g.value("filter_improvement", 0.0);
      m.graphs.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  std::set<std::string> files;
  std::map<std::string, std::string> split_of_base;
  const auto& splits = split_names();
  for (const auto& e : m.graphs) {
    if (std::find(splits.begin(), splits.end(), e.split) == splits.end()) {
      throw FormatError("manifest: unknown split '" + e.split + "' for " + e.file);
    }
    if (!files.insert(e.file).second) throw InvariantError("manifest lists " + e.file + " twice");
    auto [it, fresh] = split_of_base.emplace(e.base_id, e.split);
    if (!fresh && it->second != e.split) {
      throw InvariantError("base graph " + e.base_id + " appears in splits " + it->second + " and " + e.split);
    }
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& dir) {
  const std::string text = read_text_file(dir / "manifest.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest: malformed JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

struct DatasetCounts {
  int train = 200;
  int valid = 50;
  int test = 50;

  int total() const { return train + valid + test; }
};

struct BuildReport {
  Manifest manifest;
  int attempts = 0;
  int accepted = 0;
  double mean_kept_improvement = 0.0;  // over accepted base graphs
  double acceptance_rate() const { return attempts ? static_cast<double>(accepted) / attempts : 0.0; }
};

/// Generates base graphs until `counts.total()` pass the filter, assigns the
/// first accepted ones to train, then valid, then test, and writes each base
/// graph with `copies` augmented variants. Attempt i draws its graph from
/// substream (seed, 0, i), filters with (seed, 1, i) and augments with
/// (seed, 2, i), so the output is independent of the thread count.
inline BuildReport build_dataset(const GenSpec& spec, const DatasetCounts& counts, int copies,
                                 const std::filesystem::path& dir, std::uint64_t seed, int threads = 1,
                                 int max_attempts = -1) {
  spec.check();
  if (counts.train < 0 || counts.valid < 0 || counts.test < 0 || copies < 0) {
    throw InvariantError("dataset counts and copies must be non-negative");
  }
  const int wanted = counts.total();
  if (max_attempts < 0) max_attempts = 100 * wanted + 100;

  struct Attempt {
    ComputationGraph graph;
    FilterResult filter;
  };
  std::vector<std::pair<int, Attempt>> kept;
  BuildReport report;
  const int chunk = std::max(1, threads) * 4;
  while (static_cast<int>(kept.size()) < wanted) {
    if (report.attempts >= max_attempts) {
      throw InvariantError("only " + std::to_string(kept.size()) + " of " + std::to_string(wanted) +
                           " graphs passed the filter in " + std::to_string(max_attempts) + " attempts");
    }
    const int begin = report.attempts;
    const int n = std::min(chunk, max_attempts - begin);
    std::vector<Attempt> batch(n);
    parallel_for(n, threads, [&](int, int k) {
      Rng rng = substream(seed, 0, begin + k);
      batch[k].graph = generate_instance(spec, rng).graph;
      if (spec.filter) {
        batch[k].filter = filter_interesting(IndexedGraph(batch[k].graph), spec, derive_seed(seed, 1, begin + k));
      } else {
        batch[k].filter.keep = true;
      }
    });
    for (int k = 0; k < n && static_cast<int>(kept.size()) < wanted; ++k) {
      ++report.attempts;
      if (batch[k].filter.keep) kept.emplace_back(begin + k, std::move(batch[k]));
    }
  }
  report.accepted = static_cast<int>(kept.size());

  std::filesystem::create_directories(dir);
  for (const auto& s : split_names()) std::filesystem::create_directories(dir / s);
  double improvement_sum = 0.0;
  for (int i = 0; i < static_cast<int>(kept.size()); ++i) {
    const auto& [attempt, a] = kept[i];
    const std::string split = i < counts.train ? "train" : i < counts.train + counts.valid ? "valid" : "test";
    char base[24];
    std::snprintf(base, sizeof base, "g%06d", attempt);
    Rng rng = substream(seed, 2, attempt);
    std::vector<ComputationGraph> variants = {a.graph};
    for (auto& c : augment(a.graph, copies, rng)) variants.push_back(std::move(c));
    for (int c = 0; c < static_cast<int>(variants.size()); ++c) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_c%03d.json", base, c);
      const std::string file = split + "/" + name;
      write_graph_json(dir / file, variants[c]);
      report.manifest.graphs.push_back({file, split, base, c, a.filter.improvement});
    }
    improvement_sum += a.filter.improvement;
  }
  report.mean_kept_improvement = kept.empty() ? 0.0 : improvement_sum / static_cast<double>(kept.size());
  report.manifest.info = {{"seed", seed},
                          {"copies", copies},
                          {"counts", {{"train", counts.train}, {"valid", counts.valid}, {"test", counts.test}}},
                          {"generator", to_json(spec)},
                          {"attempts", report.attempts},
                          {"accepted", report.accepted},
                          {"mean_filter_improvement", report.mean_kept_improvement}};
  write_text_file(dir / "manifest.json", to_json(report.manifest).dump(1) + "\n");
  return report;
}

struct LoadedGraph {
  ManifestEntry entry;
  std::shared_ptr<const IndexedGraph> graph;
};

/// Reads and validates the graphs of one split ("" for all splits).
inline std::vector<LoadedGraph> load_split(const std::filesystem::path& dir, const Manifest& m,
                                           const std::string& split) {
  std::vector<LoadedGraph> out;
  for (const auto& e : m.graphs) {
    if (!split.empty() && e.split != split) continue;
    out.push_back({e, std::make_shared<const IndexedGraph>(read_graph_json(dir / e.file))});
  }
  return out;
}

}  // namespace placesched

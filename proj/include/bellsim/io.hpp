#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bellsim/core.hpp"

// File formats. Records CSV has the fixed header
//   m,setting1,setting2,outcome1,outcome2,t_emit,t_set1,t_set2,lambda_family
// with settings as direction names, outcomes as +1/-1, and doubles written
// shortest-round-trip. Counterfactual traces do not fit that schema and go
// to a sidecar CSV keyed by trial index.

namespace bellsim {

std::string format_double(double v);  // shortest exact round-trip
double parse_double(const std::string& s);

void write_records_csv(const std::string& path, std::span<const PairRecord> records,
                       const DirectionSet& dirs);

struct LoadedRecords {
  std::vector<PairRecord> records;
  std::vector<std::string> names;  // sorted; settings are indices into this
};
LoadedRecords read_records_csv(const std::string& path);

// Sidecar: m,family,lambda,cf_<name>... with lambda components ';'-joined.
void write_traces_csv(const std::string& path, std::span<const PairRecord> records,
                      const DirectionSet& dirs);

// Attaches traces by trial index. The trace header's direction list must
// cover the loaded names; records are re-indexed to the trace ordering and
// `names` is updated to match.
void attach_traces_csv(const std::string& path, std::vector<PairRecord>& records,
                       std::vector<std::string>& names);

nlohmann::ordered_json summary_json(const CountTable& table,
                                    const std::vector<std::string>& names);
void write_summary_json(const std::string& path, const CountTable& table,
                        const std::vector<std::string>& names);

// key = value configs; '#' starts a comment. Relative file references
// resolve against the config file's directory.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir);

DensitySpec density_from_json(const nlohmann::json& j);
DensitySpec load_density_file(const std::string& path);

// {"pairs": [{"pair": "A-B", "cells": [uu, ud, du, dd]}, ...]}
std::map<std::pair<int, int>, std::array<double, 4>> targets_from_json(
    const nlohmann::json& j, const DirectionSet& dirs);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace bellsim

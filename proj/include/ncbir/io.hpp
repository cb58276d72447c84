// Copyright 2026 The ncbir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ncbir/dataset.hpp"
#include "ncbir/evaluation.hpp"
#include "ncbir/head.hpp"
#include "ncbir/tsne.hpp"
#include "ncbir/ward.hpp"

namespace ncbir {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "ncbir 0.1.0";

struct Manifest {
    int version = kFormatVersion;
    std::map<std::string, std::uint64_t> seeds;
    std::string provenance = "real";
    std::string tool = kToolVersion;
};

// Shortest decimal that parses back to the same double.
std::string format_real(double value);

// Annotations: JSON lines, a header object first, then one nodule per line:
//   {"nodule_id": ..., "scan_id": ..., "ratings": [[5 raw scores], ...]}
void write_annotations(const std::filesystem::path& path, const Dataset& dataset, const Manifest& manifest);

// Features: JSON lines, a header carrying feature_dim, then
//   {"nodule_id": ..., "values": [D_f reals]}
void write_features(const std::filesystem::path& path, const Dataset& dataset, const Manifest& manifest);

struct LoadedDataset {
    FilterResult filtered;
    Manifest manifest;
};

/// Joins the two files on nodule_id (annotation order is kept) and drops
/// nodules with fewer than three annotations.
LoadedDataset read_dataset(const std::filesystem::path& annotations, const std::filesystem::path& features);

/// Annotations only (feature_dim 0), for commands that need consensus
/// ratings but no backbone features.
LoadedDataset read_annotations(const std::filesystem::path& annotations);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

void write_embeddings(const std::filesystem::path& path, const std::vector<Embedding>& embeddings,
                      const Manifest& manifest);
std::vector<Embedding> read_embeddings(const std::filesystem::path& path);

// Model: versioned text, dims and config first, then each layer's weight
// (row-major) and bias on their own lines.
void write_model(const std::filesystem::path& path, const HeadModel& model, const Manifest& manifest);
HeadModel read_model(const std::filesystem::path& path);

void write_train_report(const std::filesystem::path& path, const TrainReport& report);

// Evaluation outputs: report.json, table.txt, dissent_<method>.csv,
// lognormal_fits.csv, lognormal_curves.csv and folds.csv under dir.
void write_evaluation(const std::filesystem::path& dir, const EvaluationReport& report, const Manifest& manifest);
std::string render_table(const EvaluationReport& report);

void write_dendrogram(const std::filesystem::path& path, const Dendrogram& dendrogram,
                      const std::vector<std::string>& leaf_ids);
void write_splits(const std::filesystem::path& path, const SplitSummary& summary, const Manifest& manifest);
void write_projection(const std::filesystem::path& path, const std::vector<ProjectedPoint>& points);
void write_kl_trace(const std::filesystem::path& path, const TsneResult& result);

} // namespace ncbir

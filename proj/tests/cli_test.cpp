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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ncbir/io.hpp"
#include "ncbir/retrieval.hpp"
#include "test_util.hpp"

using namespace ncbir;
using namespace ncbir::testing;

namespace {

// One small pipeline shared by the tests below.
class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = scratch_dir("cli_pipeline");
        const auto d = dir_.string();
        ASSERT_EQ(cli({"synth", "--n", "90", "--dim", "12", "--seed", "5", "--out", d + "/data"}).code, 0);
        ASSERT_EQ(cli({"train", "--annotations", d + "/data/annotations.jsonl", "--features",
                       d + "/data/features.jsonl", "--epochs", "20", "--out", d + "/model"})
                      .code,
                  0);
        ASSERT_EQ(cli({"embed", "--model", d + "/model/model.txt", "--annotations", d + "/data/annotations.jsonl",
                       "--features", d + "/data/features.jsonl", "--out", d + "/emb"})
                      .code,
                  0);
    }

    static std::string path(const std::string& rel) { return (dir_ / rel).string(); }

    static std::filesystem::path dir_;
};

std::filesystem::path CliPipeline::dir_;

} // namespace

TEST(CliSynth, DefaultsAndDeterminism) {
    const auto dir = scratch_dir("cli_synth");
    const auto a = (dir / "a").string(), b = (dir / "b").string();
    const CliRun r = cli({"synth", "--out", a});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(cli({"synth", "--out", b}).code, 0);
    EXPECT_EQ(line_count(dir / "a/annotations.jsonl"), 1201u);
    EXPECT_EQ(line_count(dir / "a/features.jsonl"), 1201u);
    EXPECT_TRUE(std::filesystem::exists(dir / "a/manifest.json"));
    EXPECT_EQ(slurp(dir / "a/annotations.jsonl"), slurp(dir / "b/annotations.jsonl"));
    EXPECT_EQ(slurp(dir / "a/features.jsonl"), slurp(dir / "b/features.jsonl"));

    const LoadedDataset loaded = read_dataset(dir / "a/annotations.jsonl", dir / "a/features.jsonl");
    EXPECT_EQ(loaded.filtered.dataset.size(), 1200u);
    EXPECT_EQ(loaded.filtered.dataset.feature_dim(), 128u);
}

TEST(CliSynth, ZeroNoiseGivesIdenticalAnnotations) {
    const auto dir = scratch_dir("cli_synth_zero");
    ASSERT_EQ(cli({"synth", "--n", "40", "--dim", "6", "--sigma", "0", "--out", dir.string()}).code, 0);
    const LoadedDataset loaded = read_dataset(dir / "annotations.jsonl", dir / "features.jsonl");
    for (const auto& rec : loaded.filtered.dataset.records()) {
        for (const auto& a : rec.annotations) EXPECT_EQ(a, rec.annotations.front());
    }
}

TEST_F(CliPipeline, TrainWritesLoadableModel) {
    const HeadModel m = read_model(path("model/model.txt"));
    EXPECT_EQ(m.config.input_dim, 12u);
    EXPECT_EQ(line_count(path("model/train_loss.csv")), 21u);
}

TEST_F(CliPipeline, TrainWithZeroEpochsKeepsInitialization) {
    const auto out = path("model0");
    const CliRun r = cli({"train", "--annotations", path("data/annotations.jsonl"), "--features",
                          path("data/features.jsonl"), "--epochs", "0", "--seed", "3", "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    HeadConfig c;
    c.input_dim = 12;
    c.epochs = 0;
    c.seed = 3;
    EXPECT_EQ(read_model(out + "/model.txt").params, HeadModel::initialize(c).params);
}

TEST_F(CliPipeline, EmbedMatchesInProcessForward) {
    const auto embeddings = read_embeddings(path("emb/embeddings.jsonl"));
    const LoadedDataset loaded = read_dataset(path("data/annotations.jsonl"), path("data/features.jsonl"));
    const HeadModel m = read_model(path("model/model.txt"));
    ASSERT_EQ(embeddings.size(), loaded.filtered.dataset.size());
    const auto expected = embed_all(m, loaded.filtered.dataset);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        EXPECT_EQ(embeddings[i].nodule_id, expected[i].nodule_id);
        EXPECT_EQ(embeddings[i].values, expected[i].values);
    }
}

TEST_F(CliPipeline, QueryListsFourNeighborsWithoutSelf) {
    const CliRun r = cli({"query", "--embeddings", path("emb/embeddings.jsonl"), "--annotations",
                          path("data/annotations.jsonl"), "--query-id", "N00007"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    std::getline(lines, line);
    std::vector<std::pair<std::string, double>> listed;
    while (std::getline(lines, line)) {
        std::istringstream ls(line);
        int rank;
        std::string id;
        double dist;
        ls >> rank >> id >> dist;
        listed.emplace_back(id, dist);
    }
    ASSERT_EQ(listed.size(), 4u);
    for (std::size_t i = 0; i < listed.size(); ++i) {
        EXPECT_NE(listed[i].first, "N00007");
        if (i > 0) {
            EXPECT_LE(listed[i - 1].second, listed[i].second);
        }
    }
}

TEST_F(CliPipeline, QueryUnknownIdIsLookupError) {
    const CliRun r = cli({"query", "--embeddings", path("emb/embeddings.jsonl"), "--annotations",
                          path("data/annotations.jsonl"), "--query-id", "nope"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: lookup", 0), 0u) << r.err;
}

TEST_F(CliPipeline, EvaluateWritesReportAndPerSampleDissent) {
    const auto out = path("eval");
    const CliRun r = cli({"evaluate", "--annotations", path("data/annotations.jsonl"), "--features",
                          path("data/features.jsonl"), "--epochs", "5", "--folds", "3", "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* row : {"random", "doctors", "cbir-k1", "cbir-k2", "cbir-k4", "cbir-k8"}) {
        EXPECT_NE(r.out.find(row), std::string::npos) << row;
        const auto csv = std::filesystem::path(out) / (std::string("dissent_") + row + ".csv");
        ASSERT_TRUE(std::filesystem::exists(csv)) << csv;
        const std::size_t expected = std::string(row) == "doctors" ? 90u * 4u : 90u;
        EXPECT_EQ(line_count(csv), expected + 1) << row;
    }
    for (const char* f : {"report.json", "table.txt", "lognormal_fits.csv", "lognormal_curves.csv", "folds.csv",
                          "manifest.json"}) {
        EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / f)) << f;
    }
}

TEST_F(CliPipeline, EvaluateRejectsMismatchedModel) {
    const auto d = scratch_dir("cli_other");
    ASSERT_EQ(cli({"synth", "--n", "30", "--dim", "5", "--out", d.string()}).code, 0);
    const CliRun r = cli({"evaluate", "--annotations", (d / "annotations.jsonl").string(), "--features",
                          (d / "features.jsonl").string(), "--model", path("model/model.txt"), "--out",
                          (d / "eval").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: config", 0), 0u) << r.err;
}

TEST_F(CliPipeline, ClusterAndTsneWriteOneRowPerItem) {
    const CliRun c = cli({"cluster", "--embeddings", path("emb/embeddings.jsonl"), "--annotations",
                          path("data/annotations.jsonl"), "--sample", "50", "--out", path("clu")});
    ASSERT_EQ(c.code, 0) << c.err;
    // leaves line + header + n-1 merges
    EXPECT_EQ(line_count(path("clu/dendrogram.csv")), 1u + 1u + 49u);
    EXPECT_TRUE(std::filesystem::exists(path("clu/splits.json")));

    const CliRun t = cli({"tsne", "--embeddings", path("emb/embeddings.jsonl"), "--annotations",
                          path("data/annotations.jsonl"), "--perplexity", "10", "--iterations", "300", "--out",
                          path("tsne")});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_EQ(line_count(path("tsne/projection.csv")), 91u);
}

TEST(CliUsage, UnknownCommandIsUsageError) {
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({}).code, 2);
}

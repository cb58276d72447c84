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

#include "ncbir/error.hpp"
#include "ncbir/head.hpp"
#include "ncbir/rng.hpp"
#include "oracles.hpp"

using namespace ncbir;

namespace {

HeadConfig small_config(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
    HeadConfig c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden;
    c.seed = seed;
    return c;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

std::vector<double> flat(const HeadParams& p) {
    std::vector<double> out;
    p.for_each([&](double v) { out.push_back(v); });
    return out;
}

} // namespace

TEST(Forward, ZeroModelGivesZeros) {
    HeadModel m{small_config(12, 16, 1), HeadParams::zeros(12, 16)};
    const std::vector<double> x(12, 0.7);
    const ForwardResult r = forward(m, x);
    for (double e : r.embedding) EXPECT_EQ(e, 0.0);
    for (double y : r.raw_prediction) EXPECT_EQ(y, 0.0);
}

TEST(Forward, IdentitySlicesReproduceInput) {
    const std::size_t dim = 12;
    HeadModel m{small_config(dim, dim, 1), HeadParams::zeros(dim, dim)};
    for (std::size_t i = 0; i < dim; ++i) m.params.hidden.w(i, i) = 1.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) m.params.embed.w(i, i) = 1.0;
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i) x[i] = 0.25 * static_cast<double>(i);
    const ForwardResult r = forward(m, x);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) EXPECT_EQ(r.embedding[i], x[i]);
}

TEST(Forward, MatchesNestedLoopOracle) {
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        const HeadModel m = HeadModel::initialize(small_config(20, 32, 100 + t));
        const auto x = random_vector(rng, 20, -2.0, 2.0);
        const ForwardResult r = forward(m, x);
        const auto o = oracle::forward(m.params, x);
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) EXPECT_NEAR(r.embedding[i], o.embedding[i], 1e-12);
        for (std::size_t i = 0; i < kOutputDim; ++i) {
            EXPECT_NEAR(r.raw_prediction[i], o.output[i], 1e-12);
            EXPECT_GE(r.prediction[i], 0.0);
            EXPECT_LE(r.prediction[i], 1.0);
            EXPECT_EQ(r.prediction[i], std::clamp(r.raw_prediction[i], 0.0, 1.0));
        }
    }
}

TEST(Forward, PreActivationTap) {
    HeadConfig c = small_config(4, 4, 1);
    HeadModel m{c, HeadParams::zeros(4, 4)};
    m.params.embed.bias[0] = -0.5;
    m.config.tap = EmbeddingTap::PreActivation;
    EXPECT_EQ(forward(m, std::vector<double>(4, 1.0)).embedding[0], -0.5);
    m.config.tap = EmbeddingTap::PostActivation;
    EXPECT_EQ(forward(m, std::vector<double>(4, 1.0)).embedding[0], 0.0);
}

TEST(Forward, ShapeError) {
    const HeadModel m = HeadModel::initialize(small_config(8, 4, 1));
    try {
        forward(m, std::vector<double>(7, 0.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Shape);
    }
}

TEST(MseLoss, Examples) {
    const std::vector<double> t = {0.1, 0.5, 0.5, 0.9, 0.7};
    EXPECT_EQ(mse_loss(t, t), 0.0);
    const std::vector<double> shifted = {1.1, 1.5, 1.5, 1.9, 1.7};
    EXPECT_NEAR(mse_loss(shifted, t), 1.0, 1e-15);
    // diffs 0.1, -0.1, 0.1, -0.1, 0.3 -> (4 * 0.01 + 0.09) / 5 = 0.026
    const std::vector<double> p = {0.2, 0.4, 0.6, 0.8, 1.0};
    EXPECT_NEAR(mse_loss(p, t), 0.026, 1e-15);
}

TEST(Gradients, ZeroErrorBatchIsZero) {
    const HeadModel m = HeadModel::initialize(small_config(6, 8, 3));
    const std::vector<double> x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    Sample s{x, {}};
    const auto f = forward(m, x);
    s.target = f.raw_prediction;
    const HeadParams g = gradients(m, std::vector<Sample>{s});
    g.for_each([](double v) { EXPECT_EQ(v, 0.0); });
}

TEST(Gradients, SingleActivePathHandChainRule) {
    // One path x -> hidden[0] -> embed[0] -> out[0]; weights a, b, c.
    // h = a x = 3, e = b h = 9, y = c e = 4.5, r = 2 (y - t) / 5 = 1.76
    // dc = r e = 15.84, db = r c h = 2.64, da = r c b x = 3.96
    HeadModel m{small_config(1, 1, 1), HeadParams::zeros(1, 1)};
    m.params.hidden.w(0, 0) = 2.0;
    m.params.embed.w(0, 0) = 3.0;
    m.params.output.w(0, 0) = 0.5;
    const std::vector<double> x = {1.5};
    const std::vector<Sample> batch = {{x, {0.1, 0.0, 0.0, 0.0, 0.0}}};
    const HeadParams g = gradients(m, batch);
    EXPECT_NEAR(g.output.w(0, 0), 15.84, 1e-12);
    EXPECT_NEAR(g.embed.w(0, 0), 2.64, 1e-12);
    EXPECT_NEAR(g.hidden.w(0, 0), 3.96, 1e-12);
    EXPECT_NEAR(g.output.bias[0], 1.76, 1e-12);
    EXPECT_EQ(g.output.w(1, 0), 0.0);
}

TEST(Gradients, MatchFiniteDifferences) {
    Rng rng(2024);
    for (int t = 0; t < 5; ++t) {
        const HeadModel m = HeadModel::initialize(small_config(6, 8, 500 + t));
        std::vector<std::vector<double>> xs;
        std::vector<std::array<double, 5>> targets;
        for (int i = 0; i < 4; ++i) {
            xs.push_back(random_vector(rng, 6, -2.0, 2.0));
            std::array<double, 5> tg;
            for (auto& v : tg) v = rng.uniform();
            targets.push_back(tg);
        }
        std::vector<Sample> batch;
        for (std::size_t i = 0; i < xs.size(); ++i) batch.push_back({xs[i], targets[i]});
        const auto analytic = flat(gradients(m, batch));
        const auto numeric = oracle::finite_difference_gradient(m.params, xs, targets, 1e-6);
        ASSERT_EQ(analytic.size(), numeric.size());
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
            EXPECT_LT(std::abs(analytic[i] - numeric[i]) / denom, 1e-5) << "param " << i;
        }
    }
}

TEST(Gradients, EmptyBatchIsAnError) {
    const HeadModel m = HeadModel::initialize(small_config(6, 8, 3));
    EXPECT_THROW(gradients(m, std::vector<Sample>{}), Error);
}

TEST(Initialize, FanInBounds) {
    const HeadModel m = HeadModel::initialize(small_config(16, 25, 8));
    for (double w : m.params.hidden.weight) EXPECT_LE(std::abs(w), 0.25);
    for (double w : m.params.embed.weight) EXPECT_LE(std::abs(w), 0.2);
    for (double w : m.params.output.weight) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(10.0));
}

TEST(Train, OverfitsEightNodules) {
    const Dataset ds = generate_synthetic({8, 16, 4, 0.5, 21});
    HeadConfig c = small_config(16, 64, 42);
    c.epochs = 500;
    const TrainResult r = train(ds, c);
    EXPECT_EQ(r.report.epoch_loss.size(), 500u);
    EXPECT_LT(r.report.final_loss, 1e-4);
    EXPECT_LT(batch_loss(r.model, make_samples(ds)), 1e-4);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
    const Dataset ds = generate_synthetic({40, 8, 3, 0.5, 2});
    HeadConfig c = small_config(8, 16, 6);
    c.epochs = 5;
    c.learning_rate = 0.0;
    const TrainResult r = train(ds, c);
    EXPECT_EQ(r.model.params, HeadModel::initialize(c).params);
    for (double l : r.report.epoch_loss) EXPECT_NEAR(l, r.report.epoch_loss.front(), 1e-12);
}

TEST(Train, BitReproducible) {
    const Dataset ds = generate_synthetic({64, 8, 3, 0.5, 2});
    HeadConfig c = small_config(8, 16, 6);
    c.epochs = 20;
    const TrainResult a = train(ds, c);
    const TrainResult b = train(ds, c);
    EXPECT_EQ(a.model.params, b.model.params);
    EXPECT_EQ(a.report.epoch_loss, b.report.epoch_loss);
}

TEST(Train, LossDropsOnNoiselessData) {
    const Dataset ds = generate_synthetic({600, 32, 4, 0.0, 42});
    HeadConfig c = small_config(32, 64, 42);
    c.epochs = 50;
    const TrainResult r = train(ds, c);
    ASSERT_EQ(r.report.epoch_loss.size(), 50u);
    for (double l : r.report.epoch_loss) {
        EXPECT_TRUE(std::isfinite(l));
        EXPECT_GE(l, 0.0);
    }
    EXPECT_LT(r.report.epoch_loss[49], 0.1 * r.report.epoch_loss[0]);
}

TEST(Train, DivergenceNamesEpoch) {
    Dataset ds = generate_synthetic({16, 8, 3, 0.5, 2});
    std::vector<NoduleRecord> records = ds.records();
    for (auto& r : records)
        for (auto& v : r.feature) v *= 1e300;
    const Dataset huge(records, 8, Provenance::Synthetic);
    HeadConfig c = small_config(8, 16, 1);
    c.epochs = 3;
    try {
        train(huge, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Divergence);
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    }
}

TEST(Train, ConfigMismatch) {
    const Dataset ds = generate_synthetic({16, 8, 3, 0.5, 2});
    EXPECT_THROW(train(ds, small_config(9, 4, 1)), Error);
}

TEST(EmbedAll, AlignedAndDefinitional) {
    const Dataset ds = generate_synthetic({30, 8, 3, 0.5, 2});
    const HeadModel m = HeadModel::initialize(small_config(8, 16, 3));
    const auto e = embed_all(m, ds);
    ASSERT_EQ(e.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(e[i].nodule_id, ds[i].nodule_id);
        EXPECT_EQ(e[i].values, forward(m, ds[i].feature).embedding);
        for (double v : e[i].values) EXPECT_GE(v, 0.0);
    }
    EXPECT_EQ(embed_all(m, ds)[0].values, e[0].values);

    std::vector<NoduleRecord> twins = {ds[0], ds[0]};
    twins[1].nodule_id = "twin";
    const auto et = embed_all(m, Dataset(twins, 8, Provenance::Synthetic));
    EXPECT_EQ(et[0].values, et[1].values);
}

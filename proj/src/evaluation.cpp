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

#include "ncbir/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <utility>

#include "ncbir/error.hpp"

namespace ncbir {

namespace {

void sort_samples(std::vector<DissentSample>& samples) {
    std::sort(samples.begin(), samples.end(), [](const DissentSample& a, const DissentSample& b) {
        return std::tie(a.nodule_id, a.subject) < std::tie(b.nodule_id, b.subject);
    });
}

std::pair<double, double> mean_and_std(std::span<const DissentSample> samples) {
    if (samples.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (const auto& s : samples) sum += s.score;
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : samples) ss += (s.score - mean) * (s.score - mean);
    return {mean, std::sqrt(ss / n)};
}

void fill_dissent_stats(MethodStats& m) {
    sort_samples(m.samples);
    std::tie(m.dissent_mean, m.dissent_std) = mean_and_std(m.samples);
    std::vector<double> positive;
    for (const auto& s : m.samples) {
        if (s.score > 0.0) positive.push_back(s.score);
    }
    m.fit_excluded = m.samples.size() - positive.size();
    if (positive.size() >= 2) m.fit = lognormal_mle_fit(positive);
}

std::vector<double> to_vector(const std::array<double, kEmbeddingDim>& a) {
    return {a.begin(), a.end()};
}

} // namespace

double rating_rmse(const RatingVector& a, const RatingVector& b) {
    if (a.scale() != b.scale()) {
        fail(ErrorCategory::Argument, "dissent between ratings of different scales");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
        const double d = a[c] - b[c];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(kNumCharacteristics));
}

DissentSample doctor_dissent(const NoduleRecord& record, std::size_t doctor_index) {
    if (record.annotations.size() < 2) {
        fail(ErrorCategory::Argument, "doctor dissent of " + record.nodule_id + " needs >= 2 annotations");
    }
    if (doctor_index >= record.annotations.size()) {
        fail(ErrorCategory::Argument, "doctor index " + std::to_string(doctor_index) + " out of range for " +
                                          record.nodule_id);
    }
    std::vector<RatingVector> others;
    for (std::size_t i = 0; i < record.annotations.size(); ++i) {
        if (i != doctor_index) others.push_back(normalize_rating(record.annotations[i]));
    }
    const double score = rating_rmse(normalize_rating(record.annotations[doctor_index]), consensus(others));
    return {"doctor-" + std::to_string(doctor_index), record.nodule_id, score};
}

DissentSample algorithm_dissent(const RatingVector& prediction, const NoduleRecord& record,
                                std::string subject) {
    if (prediction.scale() != RatingScale::Normalized) {
        fail(ErrorCategory::Argument, "algorithm dissent expects a normalized prediction");
    }
    std::vector<RatingVector> normalized;
    normalized.reserve(record.annotations.size());
    for (const auto& a : record.annotations) normalized.push_back(normalize_rating(a));
    return {std::move(subject), record.nodule_id, rating_rmse(prediction, consensus(normalized))};
}

RatingVector random_baseline_prediction(const Dataset& dataset, Rng& rng) {
    std::size_t total = 0;
    for (const auto& r : dataset.records()) total += r.annotations.size();
    std::size_t pick = rng.index(total);
    for (const auto& r : dataset.records()) {
        if (pick < r.annotations.size()) return r.annotations[pick];
        pick -= r.annotations.size();
    }
    fail(ErrorCategory::Argument, "annotation pool exhausted");
}

ComponentStats rating_rmse_std_per_component(std::span<const RatingVector> predictions,
                                             std::span<const RatingVector> targets) {
    if (predictions.empty()) {
        fail(ErrorCategory::Argument, "no predictions to score");
    }
    if (predictions.size() != targets.size()) {
        fail(ErrorCategory::Shape, "predictions and targets differ in length");
    }
    ComponentStats stats;
    const double n = static_cast<double>(predictions.size());
    for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (predictions[i].scale() != RatingScale::Raw || targets[i].scale() != RatingScale::Raw) {
                fail(ErrorCategory::Argument, "per-component statistics use the raw [1,5] scale");
            }
            const double e = predictions[i][c] - targets[i][c];
            sum += e;
            sum_sq += e * e;
        }
        const double mean = sum / n;
        double spread = 0.0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            const double e = predictions[i][c] - targets[i][c] - mean;
            spread += e * e;
        }
        stats.rmse[c] = std::sqrt(sum_sq / n);
        stats.std[c] = std::sqrt(spread / n);
    }
    return stats;
}

ComponentStats rating_rmse_std_per_component(std::span<const RatingVector> predictions,
                                             std::span<const NoduleRecord> records) {
    std::vector<RatingVector> targets;
    targets.reserve(records.size());
    for (const auto& r : records) targets.push_back(consensus(r.annotations));
    return rating_rmse_std_per_component(predictions, targets);
}

PrecisionResult retrieval_precision(const RetrievalIndex& index, std::span<const PrecisionQuery> queries,
                                    std::size_t k) {
    PrecisionResult out;
    for (const auto& q : queries) {
        const RetrievalResult r = index.query(q.embedding, k, q.options);
        out.truncated = out.truncated || r.truncated;
        for (const auto& n : r.neighbors) {
            ++out.retrieved;
            if (index.entry(n.nodule_id).malignancy == q.malignancy) ++out.hits;
        }
    }
    if (out.retrieved == 0) {
        fail(ErrorCategory::Argument, "retrieval precision with zero retrieved items");
    }
    out.precision = static_cast<double>(out.hits) / static_cast<double>(out.retrieved);
    return out;
}

PrecisionResult mean_precision_over_ks(const RetrievalIndex& index, std::span<const PrecisionQuery> queries,
                                       std::span<const std::size_t> ks) {
    if (ks.empty()) {
        fail(ErrorCategory::Argument, "mean precision over an empty k list");
    }
    PrecisionResult out;
    double sum = 0.0;
    for (std::size_t k : ks) {
        const PrecisionResult r = retrieval_precision(index, queries, k);
        sum += r.precision;
        out.hits += r.hits;
        out.retrieved += r.retrieved;
        out.truncated = out.truncated || r.truncated;
    }
    out.precision = sum / static_cast<double>(ks.size());
    return out;
}

CvResult cross_validated_cbir_dissent(const Dataset& dataset, const CvConfig& config,
                                      const FoldAssignment& folds) {
    if (config.k_list.empty()) {
        fail(ErrorCategory::Argument, "k_list is empty");
    }
    std::set<std::size_t> all_ks(config.k_list.begin(), config.k_list.end());
    all_ks.insert(config.precision_ks.begin(), config.precision_ks.end());
    if (all_ks.contains(0)) {
        fail(ErrorCategory::Argument, "k values must be >= 1");
    }

    CvResult result;
    std::map<std::size_t, PrecisionResult> precision_acc;
    for (std::size_t fold = 0; fold < folds.n_folds(); ++fold) {
        const auto test_idx = folds.test_indices(dataset, fold);
        const auto train_idx = folds.train_indices(dataset, fold);
        if (test_idx.empty()) {
            fail(ErrorCategory::Protocol, "fold " + std::to_string(fold) + " has no test nodules");
        }
        if (train_idx.empty()) {
            fail(ErrorCategory::Protocol, "fold " + std::to_string(fold) + " leaves no training nodules");
        }
        const Dataset train_set = dataset.subset(train_idx);
        const Dataset test_set = dataset.subset(test_idx);

        HeadModel model;
        if (config.pretrained) {
            model = *config.pretrained;
            if (model.config.input_dim != dataset.feature_dim()) {
                fail(ErrorCategory::Config, "pretrained model input_dim does not match the features");
            }
        } else {
            HeadConfig head = config.head;
            head.input_dim = dataset.feature_dim();
            head.seed = derive_seed(config.head.seed, fold);
            TrainResult trained = train(train_set, head);
            result.fold_final_loss.push_back(trained.report.final_loss);
            model = std::move(trained.model);
        }

        const RetrievalIndex index = build_index(embed_all(model, train_set), train_set, config.metric);
        const std::vector<Embedding> test_embeddings = embed_all(model, test_set);

        std::vector<PrecisionQuery> queries;
        queries.reserve(test_set.size());
        for (std::size_t i = 0; i < test_set.size(); ++i) {
            const NoduleRecord& record = test_set[i];
            const std::vector<double> query = to_vector(test_embeddings[i].values);
            for (std::size_t k : config.k_list) {
                const RatingVector raw = predict_ratings_topk(index, query, k);
                result.dissent[k].push_back(algorithm_dissent(normalize_rating(raw), record, cbir_method_name(k)));
                result.predictions[k].push_back({record.nodule_id, raw});
            }
            queries.push_back({query, malignancy_class(record.annotations), {}});
        }
        for (std::size_t k : all_ks) {
            const PrecisionResult p = retrieval_precision(index, queries, k);
            PrecisionResult& acc = precision_acc[k];
            acc.hits += p.hits;
            acc.retrieved += p.retrieved;
            acc.truncated = acc.truncated || p.truncated;
        }
    }

    for (auto& [k, samples] : result.dissent) sort_samples(samples);
    for (auto& [k, preds] : result.predictions) {
        std::sort(preds.begin(), preds.end(),
                  [](const CvPrediction& a, const CvPrediction& b) { return a.nodule_id < b.nodule_id; });
    }
    for (auto& [k, acc] : precision_acc) {
        acc.precision = static_cast<double>(acc.hits) / static_cast<double>(acc.retrieved);
    }
    result.precision = std::move(precision_acc);
    return result;
}

std::string cbir_method_name(std::size_t k) { return "cbir-k" + std::to_string(k); }

const MethodStats& EvaluationReport::method(std::string_view name) const {
    for (const auto& m : methods) {
        if (m.name == name) return m;
    }
    fail(ErrorCategory::Lookup, "report has no method " + std::string(name));
}

EvaluationReport build_report(const Dataset& dataset, const EvaluationConfig& config) {
    const FoldAssignment folds = assign_folds(dataset, config.n_folds, config.seeds.folds);
    CvConfig cv = config.cv;
    cv.head.seed = config.seeds.head;

    std::vector<RatingVector> consensus_raw;
    consensus_raw.reserve(dataset.size());
    for (const auto& r : dataset.records()) consensus_raw.push_back(consensus(r.annotations));

    // Random baseline: one draw per nodule, in dataset order.
    MethodStats random;
    random.name = "random";
    {
        Rng rng(config.seeds.random_baseline);
        std::vector<RatingVector> picks;
        picks.reserve(dataset.size());
        for (const auto& r : dataset.records()) {
            const RatingVector pick = random_baseline_prediction(dataset, rng);
            random.samples.push_back(algorithm_dissent(normalize_rating(pick), r, "random"));
            picks.push_back(pick);
        }
        random.components = rating_rmse_std_per_component(picks, consensus_raw);
        fill_dissent_stats(random);
    }

    // Doctors: every annotation against the consensus of the others.
    MethodStats doctors;
    doctors.name = "doctors";
    {
        std::vector<RatingVector> ratings;
        std::vector<RatingVector> others_consensus;
        for (const auto& r : dataset.records()) {
            for (std::size_t d = 0; d < r.annotations.size(); ++d) {
                doctors.samples.push_back(doctor_dissent(r, d));
                std::vector<RatingVector> others;
                for (std::size_t o = 0; o < r.annotations.size(); ++o) {
                    if (o != d) others.push_back(r.annotations[o]);
                }
                ratings.push_back(r.annotations[d]);
                others_consensus.push_back(consensus(others));
            }
        }
        doctors.components = rating_rmse_std_per_component(ratings, others_consensus);
        fill_dissent_stats(doctors);
    }

    const CvResult cv_result = cross_validated_cbir_dissent(dataset, cv, folds);

    EvaluationReport report{.methods = {},
                             .precision = cv_result.precision,
                             .mean_precision = {},
                             .k_list = cv.k_list,
                             .precision_ks = cv.precision_ks,
                             .fold_final_loss = cv_result.fold_final_loss,
                             .folds = folds,
                             .seeds = config.seeds,
                             .metric = cv.metric,
                             .n_nodules = dataset.size()};
    report.methods.push_back(std::move(random));
    report.methods.push_back(std::move(doctors));

    for (std::size_t k : cv.k_list) {
        MethodStats m;
        m.name = cbir_method_name(k);
        m.samples = cv_result.dissent.at(k);
        std::vector<RatingVector> preds;
        std::vector<RatingVector> targets;
        for (const auto& p : cv_result.predictions.at(k)) {
            preds.push_back(p.prediction);
            targets.push_back(consensus_raw[dataset.index_of(p.nodule_id)]);
        }
        m.components = rating_rmse_std_per_component(preds, targets);
        m.precision = cv_result.precision.at(k).precision;
        fill_dissent_stats(m);
        report.methods.push_back(std::move(m));
    }

    double sum = 0.0;
    for (std::size_t k : cv.precision_ks) {
        const PrecisionResult& p = cv_result.precision.at(k);
        sum += p.precision;
        report.mean_precision.hits += p.hits;
        report.mean_precision.retrieved += p.retrieved;
        report.mean_precision.truncated = report.mean_precision.truncated || p.truncated;
    }
    if (!cv.precision_ks.empty()) {
        report.mean_precision.precision = sum / static_cast<double>(cv.precision_ks.size());
    }
    return report;
}

} // namespace ncbir

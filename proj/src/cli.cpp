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

#include "ncbir/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ncbir/dataset.hpp"
#include "ncbir/error.hpp"
#include "ncbir/evaluation.hpp"
#include "ncbir/head.hpp"
#include "ncbir/io.hpp"
#include "ncbir/retrieval.hpp"
#include "ncbir/rng.hpp"
#include "ncbir/tsne.hpp"
#include "ncbir/ward.hpp"

namespace ncbir {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;

struct HeadFlags {
    std::size_t hidden = 64;
    double lr = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch = 32;
    std::string tap = "post";

    void add_to(CLI::App& app) {
        app.add_option("--hidden", hidden, "hidden layer width")->capture_default_str();
        app.add_option("--lr", lr, "learning rate")->capture_default_str();
        app.add_option("--epochs", epochs, "training epochs")->capture_default_str();
        app.add_option("--batch", batch, "mini-batch size")->capture_default_str();
        app.add_option("--embedding-tap", tap, "embedding taken post or pre activation")
            ->check(CLI::IsMember({"post", "pre"}))
            ->capture_default_str();
    }

    HeadConfig config(std::size_t input_dim, std::uint64_t seed) const {
        HeadConfig c;
        c.input_dim = input_dim;
        c.hidden_dim = hidden;
        c.learning_rate = lr;
        c.epochs = epochs;
        c.batch_size = batch;
        c.seed = seed;
        c.tap = tap == "post" ? EmbeddingTap::PostActivation : EmbeddingTap::PreActivation;
        c.validate();
        return c;
    }
};

struct Options {
    std::string annotations;
    std::string features;
    std::string model;
    std::string embeddings;
    std::string out;
    std::uint64_t seed = kDefaultSeed;
    std::string metric = "euclidean";

    // synth
    std::size_t n = 1200;
    std::size_t dim = 128;
    double sigma = 0.5;
    std::size_t doctors = 4;

    // query
    std::string query_id;
    std::size_t k = 4;
    bool exclude_same_scan = false;

    // evaluate
    std::vector<std::size_t> k_list = {1, 2, 4, 8};
    std::size_t folds = 5;
    std::optional<std::uint64_t> fold_seed;
    std::optional<std::uint64_t> random_seed;
    std::optional<std::uint64_t> head_seed;

    // analysis
    std::size_t sample = 0;
    double perplexity = 30.0;
    std::size_t iterations = 1000;

    HeadFlags head;
};

Manifest manifest_with(std::string provenance, std::map<std::string, std::uint64_t> seeds) {
    Manifest m;
    m.provenance = std::move(provenance);
    m.seeds = std::move(seeds);
    return m;
}

void report_filter(const FilterResult& f, std::ostream& err) {
    if (f.dropped > 0) {
        err << "note: kept " << f.kept << " nodules, dropped " << f.dropped << " with fewer than 3 annotations\n";
    }
}

int cmd_synth(const Options& o, std::ostream& out) {
    SyntheticSpec spec{o.n, o.dim, o.doctors, o.sigma, o.seed};
    const Dataset dataset = generate_synthetic(spec);
    const fs::path dir(o.out);
    const Manifest m = manifest_with("synthetic", {{"seed", o.seed}});
    write_annotations(dir / "annotations.jsonl", dataset, m);
    write_features(dir / "features.jsonl", dataset, m);
    write_manifest(dir / "manifest.json", m);
    out << "wrote " << dataset.size() << " nodules to " << dir.string() << '\n';
    return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const LoadedDataset loaded = read_dataset(o.annotations, o.features);
    report_filter(loaded.filtered, err);
    const Dataset& dataset = loaded.filtered.dataset;
    const HeadConfig config = o.head.config(dataset.feature_dim(), o.seed);
    const TrainResult result = train(dataset, config);
    const fs::path dir(o.out);
    const Manifest m = manifest_with(loaded.manifest.provenance, {{"seed", o.seed}});
    write_model(dir / "model.txt", result.model, m);
    write_train_report(dir / "train_loss.csv", result.report);
    write_manifest(dir / "manifest.json", m);
    out << "final loss " << format_real(result.report.final_loss) << " after " << result.report.epochs_run
        << " epochs\n";
    return 0;
}

int cmd_embed(const Options& o, std::ostream& out, std::ostream& err) {
    const HeadModel model = read_model(o.model);
    const LoadedDataset loaded = read_dataset(o.annotations, o.features);
    report_filter(loaded.filtered, err);
    const Dataset& dataset = loaded.filtered.dataset;
    if (dataset.feature_dim() != model.config.input_dim) {
        fail(ErrorCategory::Config, "model expects " + std::to_string(model.config.input_dim) +
                                        "-D features, dataset has " + std::to_string(dataset.feature_dim()));
    }
    const auto embeddings = embed_all(model, dataset);
    const fs::path dir(o.out);
    const Manifest m = manifest_with(loaded.manifest.provenance, {{"model_seed", model.config.seed}});
    write_embeddings(dir / "embeddings.jsonl", embeddings, m);
    write_manifest(dir / "manifest.json", m);
    out << "wrote " << embeddings.size() << " embeddings\n";
    return 0;
}

// Embeddings joined to annotation records, in embeddings-file order.
struct Joined {
    Dataset dataset;
    std::vector<Embedding> embeddings;
    std::string provenance;
};

Joined join_embeddings(const Options& o, std::ostream& err) {
    LoadedDataset loaded = read_annotations(o.annotations);
    report_filter(loaded.filtered, err);
    const Dataset& all = loaded.filtered.dataset;
    std::vector<Embedding> embeddings = read_embeddings(o.embeddings);
    if (embeddings.empty()) fail(ErrorCategory::EmptyDataset, o.embeddings + " has no embeddings");
    std::vector<std::size_t> idx;
    idx.reserve(embeddings.size());
    for (const auto& e : embeddings) {
        try {
            idx.push_back(all.index_of(e.nodule_id));
        } catch (const Error&) {
            fail(ErrorCategory::Join, "embedding " + e.nodule_id + " has no annotation record");
        }
    }
    return {all.subset(idx), std::move(embeddings), loaded.manifest.provenance};
}

int cmd_query(const Options& o, std::ostream& out, std::ostream& err) {
    const Joined joined = join_embeddings(o, err);
    const RetrievalIndex index = build_index(joined.embeddings, joined.dataset, parse_metric(o.metric));
    const IndexEntry& query = index.entry(o.query_id);
    QueryOptions opts;
    opts.exclude_ids.insert(query.nodule_id);
    if (o.exclude_same_scan) opts.exclude_scan = query.scan_id;
    const RetrievalResult result = index.query(query.embedding, o.k, opts, query.nodule_id);

    const auto ratings = [](const RatingVector& r) {
        std::string s;
        char buf[32];
        for (std::size_t c = 0; c < kNumCharacteristics; ++c) {
            std::snprintf(buf, sizeof buf, "%s%.2f", c ? " " : "", r[c]);
            s += buf;
        }
        return s;
    };
    out << "query " << query.nodule_id << " scan " << query.scan_id << " consensus [" << ratings(query.consensus)
        << "] " << class_name(query.malignancy) << '\n';
    out << "rank nodule_id distance consensus(sub sph mar lob mal) class\n";
    for (std::size_t i = 0; i < result.neighbors.size(); ++i) {
        const Neighbor& n = result.neighbors[i];
        const IndexEntry& e = index.entry(n.nodule_id);
        out << (i + 1) << ' ' << n.nodule_id << ' ' << format_real(n.distance) << " [" << ratings(e.consensus) << "] "
            << class_name(e.malignancy) << '\n';
    }
    if (result.truncated) {
        out << "note: only " << result.neighbors.size() << " eligible entries for k=" << o.k << '\n';
    }
    return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
    const LoadedDataset loaded = read_dataset(o.annotations, o.features);
    report_filter(loaded.filtered, err);
    const Dataset& dataset = loaded.filtered.dataset;

    EvaluationConfig config;
    config.n_folds = o.folds;
    config.seeds.folds = o.fold_seed.value_or(o.seed);
    config.seeds.random_baseline = o.random_seed.value_or(o.seed);
    config.seeds.head = o.head_seed.value_or(o.seed);
    config.cv.head = o.head.config(dataset.feature_dim(), config.seeds.head);
    config.cv.k_list = o.k_list;
    config.cv.metric = parse_metric(o.metric);
    if (!o.model.empty()) {
        config.cv.pretrained = read_model(o.model);
        if (config.cv.pretrained->config.input_dim != dataset.feature_dim()) {
            fail(ErrorCategory::Config, "model input_dim does not match the features file");
        }
    }

    const EvaluationReport report = build_report(dataset, config);
    const Manifest m = manifest_with(loaded.manifest.provenance, {{"folds", config.seeds.folds},
                                                                  {"random_baseline", config.seeds.random_baseline},
                                                                  {"head", config.seeds.head}});
    const fs::path dir(o.out);
    write_evaluation(dir, report, m);
    write_manifest(dir / "manifest.json", m);
    out << render_table(report);
    return 0;
}

// Seeded subset of the joined data, kept in original order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (sample == 0 || sample >= n) return idx;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(sample);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct AnalysisInput {
    Dataset dataset;
    std::vector<std::vector<double>> points;
    std::vector<std::string> ids;
    std::string provenance;
};

AnalysisInput analysis_input(const Options& o, std::ostream& err) {
    Joined joined = join_embeddings(o, err);
    const auto idx = sample_indices(joined.embeddings.size(), o.sample, o.seed);
    AnalysisInput in{joined.dataset.subset(idx), {}, {}, joined.provenance};
    for (std::size_t i : idx) {
        const auto& e = joined.embeddings[i];
        in.points.emplace_back(e.values.begin(), e.values.end());
        in.ids.push_back(e.nodule_id);
    }
    return in;
}

int cmd_cluster(const Options& o, std::ostream& out, std::ostream& err) {
    const AnalysisInput in = analysis_input(o, err);
    const Dendrogram dendrogram = ward_cluster(in.points);
    const SplitSummary summary = top_splits_summary(dendrogram, in.dataset.records());
    const fs::path dir(o.out);
    const Manifest m = manifest_with(in.provenance, {{"sample", o.seed}});
    write_dendrogram(dir / "dendrogram.csv", dendrogram, in.ids);
    write_splits(dir / "splits.json", summary, m);
    write_manifest(dir / "manifest.json", m);
    out << "clustered " << in.ids.size() << " nodules\n";
    for (std::size_t s = 0; s < summary.splits.size(); ++s) {
        const Split& sp = summary.splits[s];
        char buf[160];
        std::snprintf(buf, sizeof buf, "split %zu height %.4f: %zu vs %zu nodules, mean malignancy %.2f vs %.2f\n",
                      s + 1, sp.height, sp.left.nodule_ids.size(), sp.right.nodule_ids.size(),
                      sp.left.mean_rating[kMalignancyIndex], sp.right.mean_rating[kMalignancyIndex]);
        out << buf;
    }
    return 0;
}

int cmd_tsne(const Options& o, std::ostream& out, std::ostream& err) {
    const AnalysisInput in = analysis_input(o, err);
    TsneConfig config;
    config.perplexity = o.perplexity;
    config.iterations = o.iterations;
    config.seed = o.seed;
    config.kl_checkpoints.clear();
    for (std::size_t it = 50; it <= o.iterations; it += 50) config.kl_checkpoints.push_back(it);
    if (config.kl_checkpoints.empty() || config.kl_checkpoints.back() != o.iterations) {
        config.kl_checkpoints.push_back(o.iterations);
    }
    const TsneResult result = tsne(in.points, config);
    const auto points = color_by_malignancy(in.ids, result.layout, in.dataset);
    const fs::path dir(o.out);
    const Manifest m = manifest_with(in.provenance, {{"seed", o.seed}});
    write_projection(dir / "projection.csv", points);
    write_kl_trace(dir / "kl_trace.csv", result);
    write_manifest(dir / "manifest.json", m);
    out << "projected " << points.size() << " nodules, final KL " << format_real(result.kl_trace.back().second)
        << '\n';
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Similar-nodule search over learned rating embeddings", "ncbir"};
    app.require_subcommand(1);
    Options o;

    const auto common_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
    };
    const auto out_dir = [&](CLI::App* cmd) {
        cmd->add_option("--out", o.out, "output directory")->required();
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--n", o.n, "number of nodules")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--dim", o.dim, "feature dimension")->capture_default_str();
    synth->add_option("--sigma", o.sigma, "rater noise (raw scale)")->capture_default_str();
    synth->add_option("--doctors", o.doctors, "annotations per nodule (3 or 4)")->capture_default_str();
    common_seed(synth);
    out_dir(synth);

    auto* trn = app.add_subcommand("train", "train the regression head");
    trn->add_option("--annotations", o.annotations)->required();
    trn->add_option("--features", o.features)->required();
    o.head.add_to(*trn);
    common_seed(trn);
    out_dir(trn);

    auto* emb = app.add_subcommand("embed", "export embeddings");
    emb->add_option("--model", o.model)->required();
    emb->add_option("--annotations", o.annotations)->required();
    emb->add_option("--features", o.features)->required();
    out_dir(emb);

    auto* qry = app.add_subcommand("query", "top-k similar nodules");
    qry->add_option("--embeddings", o.embeddings)->required();
    qry->add_option("--annotations", o.annotations)->required();
    qry->add_option("--query-id", o.query_id)->required();
    qry->add_option("--k", o.k, "results to show")->capture_default_str()->check(CLI::PositiveNumber);
    qry->add_flag("--exclude-same-scan", o.exclude_same_scan, "also exclude nodules from the query's scan");
    qry->add_option("--metric", o.metric)->check(CLI::IsMember({"euclidean", "cosine"}))->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "cross-validated evaluation report");
    eval->add_option("--annotations", o.annotations)->required();
    eval->add_option("--features", o.features)->required();
    eval->add_option("--model", o.model, "pretrained model used for every fold");
    eval->add_option("--k-list", o.k_list, "neighbor counts")->delimiter(',')->capture_default_str()->check(
        CLI::PositiveNumber);
    eval->add_option("--folds", o.folds)->capture_default_str();
    eval->add_option("--metric", o.metric)->check(CLI::IsMember({"euclidean", "cosine"}))->capture_default_str();
    eval->add_option("--fold-seed", o.fold_seed, "defaults to --seed");
    eval->add_option("--random-seed", o.random_seed, "defaults to --seed");
    eval->add_option("--head-seed", o.head_seed, "defaults to --seed");
    o.head.add_to(*eval);
    common_seed(eval);
    out_dir(eval);

    auto* clu = app.add_subcommand("cluster", "Ward clustering of embeddings");
    clu->add_option("--embeddings", o.embeddings)->required();
    clu->add_option("--annotations", o.annotations)->required();
    clu->add_option("--sample", o.sample, "random subset size (0 = all)")->capture_default_str();
    common_seed(clu);
    out_dir(clu);

    auto* ts = app.add_subcommand("tsne", "2-D t-SNE projection of embeddings");
    ts->add_option("--embeddings", o.embeddings)->required();
    ts->add_option("--annotations", o.annotations)->required();
    ts->add_option("--sample", o.sample, "random subset size (0 = all)")->capture_default_str();
    ts->add_option("--perplexity", o.perplexity)->capture_default_str();
    ts->add_option("--iterations", o.iterations)->capture_default_str();
    common_seed(ts);
    out_dir(ts);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(o, out);
        if (trn->parsed()) return cmd_train(o, out, err);
        if (emb->parsed()) return cmd_embed(o, out, err);
        if (qry->parsed()) return cmd_query(o, out, err);
        if (eval->parsed()) return cmd_evaluate(o, out, err);
        if (clu->parsed()) return cmd_cluster(o, out, err);
        if (ts->parsed()) return cmd_tsne(o, out, err);
    } catch (const Error& e) {
        err << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace ncbir

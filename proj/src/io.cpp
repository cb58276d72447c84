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

#include "ncbir/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "ncbir/error.hpp"

namespace ncbir {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kAnnotationsFormat = "ncbir-annotations";
constexpr const char* kFeaturesFormat = "ncbir-features";
constexpr const char* kEmbeddingsFormat = "ncbir-embeddings";
constexpr const char* kModelMagic = "ncbir-head-model";

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::Io, "cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot read " + path.string());
    return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) fail(ErrorCategory::Io, "write failed for " + path.string());
}

json manifest_json(const Manifest& m) {
    json seeds = json::object();
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    return json{{"version", m.version}, {"tool", m.tool}, {"provenance", m.provenance}, {"seeds", seeds}};
}

Manifest parse_manifest(const json& j) {
    Manifest m;
    m.version = j.at("version").get<int>();
    m.tool = j.value("tool", std::string{});
    m.provenance = j.value("provenance", std::string{"real"});
    if (j.contains("seeds")) {
        for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
    }
    return m;
}

json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        fail(ErrorCategory::Format, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
}

// Reads a JSON-lines file whose first line is a header naming the format.
std::pair<json, std::vector<json>> read_jsonl(const std::filesystem::path& path, const char* format) {
    std::ifstream in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    json header;
    std::vector<json> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = parse_line(line, path, lineno);
        if (header.is_null()) {
            if (!j.is_object() || j.value("format", std::string{}) != format) {
                fail(ErrorCategory::Format, path.string() + ": expected a '" + format + "' header line");
            }
            const int version = j.value("version", -1);
            if (version != kFormatVersion) {
                fail(ErrorCategory::Format, path.string() + ": unsupported format version " +
                                                std::to_string(version));
            }
            header = std::move(j);
        } else {
            rows.push_back(std::move(j));
        }
    }
    if (header.is_null()) fail(ErrorCategory::Format, path.string() + " is empty");
    return {std::move(header), std::move(rows)};
}

void write_line(std::ofstream& out, const json& j) {
    out << j.dump() << '\n';
}

std::string csv_real(double v) { return format_real(v); }

std::string write_reals(std::span<const double> values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ' ';
        s += format_real(values[i]);
    }
    return s;
}

template <typename T>
T get_field(const json& j, const char* key, const std::filesystem::path& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorCategory::Format, path.string() + ": field '" + key + "': " + e.what());
    }
}

} // namespace

std::string format_real(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) fail(ErrorCategory::Format, "cannot format real");
    return std::string(buf, ptr);
}

void write_annotations(const std::filesystem::path& path, const Dataset& dataset, const Manifest& manifest) {
    std::ofstream out = open_out(path);
    write_line(out, json{{"format", kAnnotationsFormat}, {"version", kFormatVersion},
                         {"characteristics", kCharacteristicNames}, {"manifest", manifest_json(manifest)}});
    for (const auto& r : dataset.records()) {
        json ratings = json::array();
        for (const auto& a : r.annotations) ratings.push_back(a.values());
        write_line(out, json{{"nodule_id", r.nodule_id}, {"scan_id", r.scan_id}, {"ratings", ratings}});
    }
    finish(out, path);
}

void write_features(const std::filesystem::path& path, const Dataset& dataset, const Manifest& manifest) {
    std::ofstream out = open_out(path);
    write_line(out, json{{"format", kFeaturesFormat}, {"version", kFormatVersion},
                         {"feature_dim", dataset.feature_dim()}, {"manifest", manifest_json(manifest)}});
    for (const auto& r : dataset.records()) {
        write_line(out, json{{"nodule_id", r.nodule_id}, {"values", r.feature}});
    }
    finish(out, path);
}

namespace {

std::vector<NoduleRecord> parse_annotation_rows(const std::vector<json>& a_rows,
                                                const std::filesystem::path& annotations) {
    std::vector<NoduleRecord> records;
    std::set<std::string> seen;
    for (const auto& row : a_rows) {
        NoduleRecord r;
        r.nodule_id = get_field<std::string>(row, "nodule_id", annotations);
        r.scan_id = get_field<std::string>(row, "scan_id", annotations);
        if (!seen.insert(r.nodule_id).second) {
            fail(ErrorCategory::Format, annotations.string() + ": duplicate nodule_id " + r.nodule_id);
        }
        for (const auto& arr : get_field<std::vector<std::vector<double>>>(row, "ratings", annotations)) {
            if (arr.size() != kNumCharacteristics) {
                fail(ErrorCategory::Format, annotations.string() + ": nodule " + r.nodule_id +
                                                " has a rating of length " + std::to_string(arr.size()));
            }
            RatingVector::Values v;
            std::copy(arr.begin(), arr.end(), v.begin());
            r.annotations.push_back(RatingVector::raw(v));
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) {
        fail(ErrorCategory::EmptyDataset, annotations.string() + " has no records");
    }
    return records;
}

Provenance provenance_of(const Manifest& m) {
    return m.provenance == "synthetic" ? Provenance::Synthetic : Provenance::Real;
}

} // namespace

LoadedDataset read_annotations(const std::filesystem::path& annotations) {
    auto [header, rows] = read_jsonl(annotations, kAnnotationsFormat);
    Manifest manifest = parse_manifest(header.at("manifest"));
    return {filter_dataset(parse_annotation_rows(rows, annotations), 0, provenance_of(manifest)),
            std::move(manifest)};
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream out = open_out(path);
    out << manifest_json(manifest).dump(2) << '\n';
    finish(out, path);
}

LoadedDataset read_dataset(const std::filesystem::path& annotations, const std::filesystem::path& features) {
    auto [a_header, a_rows] = read_jsonl(annotations, kAnnotationsFormat);
    auto [f_header, f_rows] = read_jsonl(features, kFeaturesFormat);
    const std::size_t dim = get_field<std::size_t>(f_header, "feature_dim", features);

    std::map<std::string, std::vector<double>> feature_of;
    for (const auto& row : f_rows) {
        auto id = get_field<std::string>(row, "nodule_id", features);
        auto values = get_field<std::vector<double>>(row, "values", features);
        if (values.size() != dim) {
            fail(ErrorCategory::Shape, features.string() + ": nodule " + id + " has " +
                                           std::to_string(values.size()) + " values, header says " +
                                           std::to_string(dim));
        }
        if (!feature_of.emplace(id, std::move(values)).second) {
            fail(ErrorCategory::Format, features.string() + ": duplicate nodule_id " + id);
        }
    }

    std::vector<NoduleRecord> records = parse_annotation_rows(a_rows, annotations);
    for (NoduleRecord& r : records) {
        auto it = feature_of.find(r.nodule_id);
        if (it == feature_of.end()) {
            fail(ErrorCategory::Join, "nodule " + r.nodule_id + " has annotations but no features");
        }
        r.feature = std::move(it->second);
        feature_of.erase(it);
    }
    if (!feature_of.empty()) {
        fail(ErrorCategory::Join, "nodule " + feature_of.begin()->first + " has features but no annotations");
    }

    Manifest manifest = parse_manifest(a_header.at("manifest"));
    return {filter_dataset(std::move(records), dim, provenance_of(manifest)), std::move(manifest)};
}

void write_embeddings(const std::filesystem::path& path, const std::vector<Embedding>& embeddings,
                      const Manifest& manifest) {
    std::ofstream out = open_out(path);
    write_line(out, json{{"format", kEmbeddingsFormat}, {"version", kFormatVersion}, {"dim", kEmbeddingDim},
                         {"manifest", manifest_json(manifest)}});
    for (const auto& e : embeddings) {
        write_line(out, json{{"nodule_id", e.nodule_id}, {"values", e.values}});
    }
    finish(out, path);
}

std::vector<Embedding> read_embeddings(const std::filesystem::path& path) {
    auto [header, rows] = read_jsonl(path, kEmbeddingsFormat);
    if (get_field<std::size_t>(header, "dim", path) != kEmbeddingDim) {
        fail(ErrorCategory::Format, path.string() + ": embeddings must be 10-dimensional");
    }
    std::vector<Embedding> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        Embedding e;
        e.nodule_id = get_field<std::string>(row, "nodule_id", path);
        const auto values = get_field<std::vector<double>>(row, "values", path);
        if (values.size() != kEmbeddingDim) {
            fail(ErrorCategory::Shape, path.string() + ": embedding " + e.nodule_id + " has " +
                                           std::to_string(values.size()) + " values");
        }
        std::copy(values.begin(), values.end(), e.values.begin());
        out.push_back(std::move(e));
    }
    return out;
}

void write_model(const std::filesystem::path& path, const HeadModel& model, const Manifest& manifest) {
    model.validate();
    std::ofstream out = open_out(path);
    const HeadConfig& c = model.config;
    out << kModelMagic << ' ' << kFormatVersion << '\n';
    out << "manifest " << manifest_json(manifest).dump() << '\n';
    out << "input_dim " << c.input_dim << '\n';
    out << "hidden_dim " << c.hidden_dim << '\n';
    out << "embed_dim " << kEmbeddingDim << '\n';
    out << "output_dim " << kOutputDim << '\n';
    out << "embedding_tap " << (c.tap == EmbeddingTap::PostActivation ? "post" : "pre") << '\n';
    out << "learning_rate " << format_real(c.learning_rate) << '\n';
    out << "epochs " << c.epochs << '\n';
    out << "batch_size " << c.batch_size << '\n';
    out << "seed " << c.seed << '\n';
    const auto layer = [&](const char* name, const DenseLayer& l) {
        out << name << ".weight " << l.outputs << ' ' << l.inputs << '\n' << write_reals(l.weight) << '\n';
        out << name << ".bias " << l.outputs << '\n' << write_reals(l.bias) << '\n';
    };
    layer("hidden", model.params.hidden);
    layer("embed", model.params.embed);
    layer("output", model.params.output);
    finish(out, path);
}

HeadModel read_model(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    const auto bad = [&](const std::string& what) -> void {
        fail(ErrorCategory::Format, path.string() + ": " + what);
    };
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != kModelMagic) bad("not a head model file");
    if (version != kFormatVersion) bad("unsupported format version " + std::to_string(version));

    const auto expect_key = [&](const std::string& key) {
        std::string k;
        in >> k;
        if (k != key) bad("expected '" + key + "', found '" + k + "'");
    };
    expect_key("manifest");
    std::string manifest_line;
    std::getline(in, manifest_line);

    HeadModel model;
    HeadConfig& c = model.config;
    std::size_t embed_dim = 0;
    std::size_t output_dim = 0;
    std::string tap;
    std::string lr;
    expect_key("input_dim");
    in >> c.input_dim;
    expect_key("hidden_dim");
    in >> c.hidden_dim;
    expect_key("embed_dim");
    in >> embed_dim;
    expect_key("output_dim");
    in >> output_dim;
    expect_key("embedding_tap");
    in >> tap;
    expect_key("learning_rate");
    in >> lr;
    expect_key("epochs");
    in >> c.epochs;
    expect_key("batch_size");
    in >> c.batch_size;
    expect_key("seed");
    in >> c.seed;
    if (!in) bad("truncated header");
    if (embed_dim != kEmbeddingDim || output_dim != kOutputDim) bad("embed/output dims must be 10/5");
    if (tap != "post" && tap != "pre") bad("unknown embedding_tap '" + tap + "'");
    c.tap = tap == "post" ? EmbeddingTap::PostActivation : EmbeddingTap::PreActivation;
    {
        auto [p, ec] = std::from_chars(lr.data(), lr.data() + lr.size(), c.learning_rate);
        if (ec != std::errc{} || p != lr.data() + lr.size()) bad("bad learning_rate");
    }

    model.params = HeadParams::zeros(c.input_dim, c.hidden_dim);
    const auto read_values = [&](std::vector<double>& dst) {
        std::string tok;
        for (double& v : dst) {
            if (!(in >> tok)) bad("truncated parameter block");
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size()) bad("bad real '" + tok + "'");
        }
    };
    const auto layer = [&](const std::string& name, DenseLayer& l) {
        std::size_t rows = 0;
        std::size_t cols = 0;
        expect_key(name + ".weight");
        in >> rows >> cols;
        if (rows != l.outputs || cols != l.inputs) bad(name + ".weight shape mismatch");
        read_values(l.weight);
        expect_key(name + ".bias");
        in >> rows;
        if (rows != l.outputs) bad(name + ".bias shape mismatch");
        read_values(l.bias);
    };
    layer("hidden", model.params.hidden);
    layer("embed", model.params.embed);
    layer("output", model.params.output);
    std::string trailing;
    if (in >> trailing) bad("unexpected trailing content");
    model.validate();
    return model;
}

void write_train_report(const std::filesystem::path& path, const TrainReport& report) {
    std::ofstream out = open_out(path);
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
        out << (i + 1) << ',' << csv_real(report.epoch_loss[i]) << '\n';
    }
    finish(out, path);
}

std::string render_table(const EvaluationReport& report) {
    std::ostringstream os;
    char buf[256];
    os << "method        dissent(mean std)  rating RMSE [1,5] (sub sph mar lob mal)  "
          "rating STD [1,5] (sub sph mar lob mal)  precision\n";
    for (const auto& m : report.methods) {
        std::snprintf(buf, sizeof buf, "%-12s  %6.3f %6.3f        ", m.name.c_str(), m.dissent_mean, m.dissent_std);
        os << buf;
        for (double v : m.components.rmse) {
            std::snprintf(buf, sizeof buf, " %5.2f", v);
            os << buf;
        }
        os << "               ";
        for (double v : m.components.std) {
            std::snprintf(buf, sizeof buf, " %5.2f", v);
            os << buf;
        }
        if (m.precision) {
            std::snprintf(buf, sizeof buf, "               %5.3f", *m.precision);
            os << buf;
        }
        os << '\n';
    }
    std::snprintf(buf, sizeof buf, "%-12s  %27s%*s%5.3f\n", "cbir-mean", "", 83, "", report.mean_precision.precision);
    os << buf;
    os << "reference row (radiomics-based regressor):\n";
    std::snprintf(buf, sizeof buf, "%-12s  %13s        ", "radiomics-ref", "");
    os << buf;
    for (double v : kRadiomicsReference.rmse) {
        std::snprintf(buf, sizeof buf, " %5.2f", v);
        os << buf;
    }
    os << "               ";
    for (double v : kRadiomicsReference.std) {
        std::snprintf(buf, sizeof buf, " %5.2f", v);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "               %5.3f\n", kRadiomicsReference.precision);
    os << buf;
    return os.str();
}

void write_evaluation(const std::filesystem::path& dir, const EvaluationReport& report, const Manifest& manifest) {
    json methods = json::array();
    for (const auto& m : report.methods) {
        json jm{{"name", m.name},
                {"dissent_mean", m.dissent_mean},
                {"dissent_std", m.dissent_std},
                {"n_samples", m.samples.size()},
                {"rating_rmse", m.components.rmse},
                {"rating_std", m.components.std}};
        if (m.fit) {
            jm["lognormal"] = json{{"mu", m.fit->mu}, {"sigma", m.fit->sigma}, {"excluded_zero", m.fit_excluded}};
        } else {
            jm["lognormal"] = nullptr;
        }
        jm["precision"] = m.precision ? json(*m.precision) : json(nullptr);
        methods.push_back(std::move(jm));
    }
    json precision = json::array();
    for (const auto& [k, p] : report.precision) {
        precision.push_back(json{{"k", k}, {"precision", p.precision}, {"hits", p.hits},
                                 {"retrieved", p.retrieved}, {"truncated", p.truncated}});
    }
    json j{{"format", "ncbir-evaluation"},
           {"version", kFormatVersion},
           {"manifest", manifest_json(manifest)},
           {"n_nodules", report.n_nodules},
           {"n_folds", report.folds.n_folds()},
           {"metric", metric_name(report.metric)},
           {"characteristics", kCharacteristicNames},
           {"seeds", json{{"folds", report.seeds.folds},
                          {"random_baseline", report.seeds.random_baseline},
                          {"head", report.seeds.head}}},
           {"k_list", report.k_list},
           {"precision_ks", report.precision_ks},
           {"methods", methods},
           {"precision", precision},
           {"mean_precision", json{{"value", report.mean_precision.precision},
                                   {"truncated", report.mean_precision.truncated}}},
           {"fold_final_loss", report.fold_final_loss},
           {"reference_radiomics", json{{"rating_rmse", kRadiomicsReference.rmse},
                                     {"rating_std", kRadiomicsReference.std},
                                     {"precision", kRadiomicsReference.precision}}}};
    {
        const auto path = dir / "report.json";
        std::ofstream out = open_out(path);
        out << j.dump(2) << '\n';
        finish(out, path);
    }
    {
        const auto path = dir / "table.txt";
        std::ofstream out = open_out(path);
        out << render_table(report);
        finish(out, path);
    }
    for (const auto& m : report.methods) {
        const auto path = dir / ("dissent_" + m.name + ".csv");
        std::ofstream out = open_out(path);
        out << "subject,nodule_id,dissent\n";
        for (const auto& s : m.samples) out << s.subject << ',' << s.nodule_id << ',' << csv_real(s.score) << '\n';
        finish(out, path);
    }
    {
        const auto path = dir / "lognormal_fits.csv";
        std::ofstream out = open_out(path);
        out << "method,mu,sigma,n_samples,excluded_zero\n";
        for (const auto& m : report.methods) {
            if (!m.fit) continue;
            out << m.name << ',' << csv_real(m.fit->mu) << ',' << csv_real(m.fit->sigma) << ','
                << m.samples.size() << ',' << m.fit_excluded << '\n';
        }
        finish(out, path);
    }
    {
        // Dissent lives on the normalized scale, so [0, 1] covers the support of interest.
        const auto path = dir / "lognormal_curves.csv";
        std::ofstream out = open_out(path);
        out << "x";
        for (const auto& m : report.methods) {
            if (m.fit) out << ",pdf_" << m.name << ",cdf_" << m.name;
        }
        out << '\n';
        for (int i = 1; i <= 200; ++i) {
            const double x = 0.005 * i;
            out << csv_real(x);
            for (const auto& m : report.methods) {
                if (m.fit) out << ',' << csv_real(m.fit->pdf(x)) << ',' << csv_real(m.fit->cdf(x));
            }
            out << '\n';
        }
        finish(out, path);
    }
    {
        const auto path = dir / "folds.csv";
        std::ofstream out = open_out(path);
        out << "nodule_id,fold\n";
        for (const auto& [id, fold] : report.folds.map()) out << id << ',' << fold << '\n';
        finish(out, path);
    }
}

void write_dendrogram(const std::filesystem::path& path, const Dendrogram& dendrogram,
                      const std::vector<std::string>& leaf_ids) {
    std::ofstream out = open_out(path);
    out << "# leaves 0.." << dendrogram.leaves - 1 << " in order: ";
    for (std::size_t i = 0; i < leaf_ids.size(); ++i) out << (i ? " " : "") << leaf_ids[i];
    out << '\n';
    out << "step,cluster_a,cluster_b,height,size\n";
    for (std::size_t i = 0; i < dendrogram.merges.size(); ++i) {
        const Merge& m = dendrogram.merges[i];
        out << i << ',' << m.cluster_a << ',' << m.cluster_b << ',' << csv_real(m.height) << ',' << m.size << '\n';
    }
    finish(out, path);
}

void write_splits(const std::filesystem::path& path, const SplitSummary& summary, const Manifest& manifest) {
    json splits = json::array();
    for (const auto& s : summary.splits) {
        const auto side = [](const SplitSide& side) {
            return json{{"size", side.nodule_ids.size()},
                        {"mean_rating", side.mean_rating.values()},
                        {"nodule_ids", side.nodule_ids}};
        };
        splits.push_back(json{{"node", s.node}, {"height", s.height}, {"left", side(s.left)}, {"right", side(s.right)}});
    }
    std::ofstream out = open_out(path);
    out << json{{"format", "ncbir-splits"},
                {"version", kFormatVersion},
                {"manifest", manifest_json(manifest)},
                {"characteristics", kCharacteristicNames},
                {"splits", splits}}
               .dump(2)
        << '\n';
    finish(out, path);
}

void write_projection(const std::filesystem::path& path, const std::vector<ProjectedPoint>& points) {
    std::ofstream out = open_out(path);
    out << "nodule_id,x,y,class\n";
    for (const auto& p : points) {
        out << p.nodule_id << ',' << csv_real(p.xy[0]) << ',' << csv_real(p.xy[1]) << ',' << class_name(p.malignancy)
            << '\n';
    }
    finish(out, path);
}

void write_kl_trace(const std::filesystem::path& path, const TsneResult& result) {
    std::ofstream out = open_out(path);
    out << "iteration,kl\n";
    for (const auto& [iter, kl] : result.kl_trace) out << iter << ',' << csv_real(kl) << '\n';
    finish(out, path);
}

} // namespace ncbir

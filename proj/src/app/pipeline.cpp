#include "rpe/app/pipeline.hpp"

#include "json.hpp"
#include "rpe/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rpe::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

#ifndef RPE_CONFIG_DIR
#define RPE_CONFIG_DIR "configs"
#endif

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

ordered_json report_json(const RankingReport& r) {
    ordered_json j;
    j["queries"] = r.query_count;
    j["mrr"] = r.mrr;
    for (const auto& [n, v] : r.hits) j["hits@" + std::to_string(n)] = v;
    return j;
}

ordered_json config_json(const ConfigMap& map) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : map) j[k] = v;
    return j;
}

ConfigMap config_from_json(const nlohmann::json& j) {
    ConfigMap map;
    for (const auto& [k, v] : j.items()) map[k] = v.get<std::string>();
    return map;
}

nlohmann::json read_checkpoint_json(const fs::path& dir) {
    const fs::path p = dir / "checkpoint.json";
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data, p.string() + ": " + e.what());
    }
}

KnownTriples known_of(const CompletionDataset& data) {
    KnownTriples known;
    known.add(data.train);
    known.add(data.valid);
    known.add(data.test);
    return known;
}

// Mean (or last) of the full node states, entity rows then prototype rows.
Matrix final_node_states(const HiddenStates& states, bool aggregate_all_layers) {
    const std::size_t last = states.layers.size() - 1;
    if (!aggregate_all_layers) return states.layers[last];
    Matrix sum = Matrix::Zero(states.layers[1].rows(), states.layers[1].cols());
    for (std::size_t l = 1; l <= last; ++l) sum += states.layers[l];
    return sum / static_cast<double>(last);
}

EmbeddingMatrix rows_of(const Matrix& m, Eigen::Index begin, Eigen::Index end) {
    EmbeddingMatrix out;
    out.reserve(static_cast<std::size_t>(end - begin));
    for (Eigen::Index i = begin; i < end; ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

fs::path resolve_dataset_dir(const std::string& name_or_path) {
    if (name_or_path.empty()) throw Error(ErrorKind::usage, "empty dataset name");
    if (fs::exists(name_or_path)) return fs::path(name_or_path);
    const char* env = std::getenv("RPE_DATA_DIR");
    const fs::path base = env && *env ? fs::path(env) : fs::path("data");
    const fs::path dir = base / name_or_path;
    if (!fs::is_directory(dir)) {
        throw Error(ErrorKind::io, "dataset '" + name_or_path + "' not found (looked in " + dir.string() + ")");
    }
    return dir;
}

std::string dataset_fingerprint(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "not a dataset directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    std::uint64_t h = fnv1a64("rpe-dataset");
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        const std::string bytes = read_file(f);
        h = fnv1a64(name, h);
        h = fnv1a64(std::string_view("\0", 1), h);
        h = fnv1a64(std::to_string(bytes.size()), h);
        h = fnv1a64(bytes, h);
    }
    return hex64(h);
}

CompletionDataset load_completion_dataset(const fs::path& dir) { return ingest_completion_dataset(dir); }

AlignmentDataset load_alignment_dataset(const fs::path& dir) {
    double fraction = 0.30;
    std::uint64_t split_seed = 0;
    if (fs::exists(dir / kSplitFile)) {
        const auto map = load_config_file(dir / kSplitFile);
        for (const auto& [k, v] : map) {
            try {
                if (k == "seed_fraction") fraction = std::stod(v);
                else if (k == "split_seed") split_seed = std::stoull(v);
                else throw Error(ErrorKind::data, "unknown key '" + k + "' in " + (dir / kSplitFile).string());
            } catch (const std::logic_error&) {
                throw Error(ErrorKind::data, "bad value '" + v + "' for " + k + " in " + (dir / kSplitFile).string());
            }
        }
    }
    return ingest_alignment_dataset({dir / kSourceFile, dir / kTargetFile, dir / kSeedFile}, fraction, split_seed);
}

void write_alignment_dataset(const AlignmentDataset& data, std::uint64_t split_seed, const fs::path& dir) {
    fs::create_directories(dir);
    write_triples(*data.source, data.source->triples(), dir / kSourceFile);
    write_triples(*data.target, data.target->triples(), dir / kTargetFile);
    write_seed_pairs(*data.source, *data.target, data.seeds.pairs, dir / kSeedFile);
    save_config_file({{"seed_fraction", format_double(data.seeds.train_fraction)},
                      {"split_seed", std::to_string(split_seed)}},
                     dir / kSplitFile);
}

fs::path config_dir() {
    const char* env = std::getenv("RPE_CONFIG_DIR");
    return env && *env ? fs::path(env) : fs::path(RPE_CONFIG_DIR);
}

std::optional<fs::path> preset_config_path(const std::string& dataset_name) {
    const fs::path name = fs::path(dataset_name).filename();
    if (name.empty()) return std::nullopt;
    const fs::path p = config_dir() / (name.string() + ".conf");
    if (fs::is_regular_file(p)) return p;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

CompletionRun run_completion(const CompletionDataset& data, const CompletionConfig& config, CompletionModel model) {
    CompletionRun run;
    run.model = model;
    run.config = config;
    run.train = train_completion(data, config, model);
    run.test = completion_report(data.test, data.graph->entity_count(),
                                 make_rotate_scorer(run.train.tables, model, config.lambda), known_of(data),
                                 config.tie_policy, config.threads);
    return run;
}

AlignmentRun run_alignment(const AlignmentDataset& data, const GcnConfig& config, GcnMode mode) {
    AlignmentRun run;
    run.mode = mode;
    run.config = config;
    run.train = train_alignment(data, config, mode);
    const AlignmentModel model(data, mode, config.lambda);
    run.embeddings = alignment_embeddings(model, run.train.params, config);
    run.test = alignment_report(data.seeds.test, to_embedding_matrix(run.embeddings[0]),
                                to_embedding_matrix(run.embeddings[1]), config.tie_policy, config.threads);
    return run;
}

std::string completion_metrics_json(const CompletionRun& run, const std::string& fingerprint) {
    ordered_json j;
    j["task"] = "completion";
    j["model"] = to_string(run.model);
    j["dataset_fingerprint"] = fingerprint;
    j["seed"] = run.config.seed;
    j["config"] = config_json(to_config_map(run.config));
    j["test"] = report_json(run.test);
    j["best_step"] = run.train.best_step;
    j["best_valid_mrr"] = run.train.best_valid_mrr ? ordered_json(*run.train.best_valid_mrr) : ordered_json();
    j["final_loss"] = run.train.curve.empty() ? ordered_json() : ordered_json(run.train.curve.back().loss);
    return j.dump(2) + "\n";
}

std::string alignment_metrics_json(const AlignmentRun& run, const std::string& fingerprint) {
    ordered_json j;
    j["task"] = "alignment";
    j["model"] = to_string(run.mode);
    j["dataset_fingerprint"] = fingerprint;
    j["seed"] = run.config.seed;
    j["config"] = config_json(to_config_map(run.config));
    j["test"] = report_json(run.test);
    j["final_loss"] = run.train.curve.empty() ? ordered_json() : ordered_json(run.train.curve.back().loss);
    return j.dump(2) + "\n";
}

void write_completion_curve(const std::vector<CurvePoint>& curve, const fs::path& path) {
    std::string out = "step,loss,valid_mrr\n";
    for (const auto& p : curve) {
        out += std::to_string(p.step) + "," + format_double(p.loss) + "," +
               (p.valid_mrr ? format_double(*p.valid_mrr) : std::string()) + "\n";
    }
    write_file(path, out);
}

void write_alignment_curve(const std::vector<AlignmentCurvePoint>& curve, const fs::path& path) {
    std::string out = "epoch,loss,test_hits1\n";
    for (const auto& p : curve) {
        out += std::to_string(p.epoch) + "," + format_double(p.loss) + "," +
               (p.test_hits1 ? format_double(*p.test_hits1) : std::string()) + "\n";
    }
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_completion_checkpoint(const CompletionCheckpoint& ckpt, const fs::path& dir) {
    fs::create_directories(dir);
    save_table_binary(ckpt.tables.entities, dir / "entities.bin");
    save_table_binary(ckpt.tables.relations, dir / "relations.bin");
    save_table_binary(ckpt.tables.prototypes, dir / "prototypes.bin");
    ordered_json j;
    j["task"] = "completion";
    j["model"] = to_string(ckpt.model);
    j["dataset_fingerprint"] = ckpt.fingerprint;
    j["config"] = config_json(to_config_map(ckpt.config));
    write_file(dir / "checkpoint.json", j.dump(2) + "\n");
}

CompletionCheckpoint load_completion_checkpoint(const fs::path& dir) {
    const auto j = read_checkpoint_json(dir);
    if (j.value("task", "") != "completion") throw Error(ErrorKind::usage, dir.string() + " is not a completion checkpoint");
    CompletionCheckpoint c;
    try {
        c.model = completion_model_from_string(j.at("model").get<std::string>());
        c.fingerprint = j.at("dataset_fingerprint").get<std::string>();
        c.config = completion_config_from(config_from_json(j.at("config")));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data, dir.string() + "/checkpoint.json: " + e.what());
    }
    c.tables.entities = load_table_binary(dir / "entities.bin");
    c.tables.relations = load_table_binary(dir / "relations.bin");
    c.tables.prototypes = load_table_binary(dir / "prototypes.bin");
    return c;
}

void save_alignment_checkpoint(const AlignmentCheckpoint& ckpt, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t l = 0; l < ckpt.params.weights.size(); ++l) {
        save_table_binary(ckpt.params.weights[l], dir / ("weight_" + std::to_string(l + 1) + ".bin"));
    }
    const char* names[2] = {"source", "target"};
    for (int g = 0; g < 2; ++g) {
        save_table_binary(ckpt.params.inputs[g].entities, dir / (std::string(names[g]) + "_entities.bin"));
        if (ckpt.params.inputs[g].prototypes.rows() > 0) {
            save_table_binary(ckpt.params.inputs[g].prototypes, dir / (std::string(names[g]) + "_prototypes.bin"));
        }
    }
    ordered_json j;
    j["task"] = "alignment";
    j["model"] = to_string(ckpt.mode);
    j["dataset_fingerprint"] = ckpt.fingerprint;
    j["config"] = config_json(to_config_map(ckpt.config));
    write_file(dir / "checkpoint.json", j.dump(2) + "\n");
}

AlignmentCheckpoint load_alignment_checkpoint(const fs::path& dir) {
    const auto j = read_checkpoint_json(dir);
    if (j.value("task", "") != "alignment") throw Error(ErrorKind::usage, dir.string() + " is not an alignment checkpoint");
    AlignmentCheckpoint c;
    try {
        c.mode = gcn_mode_from_string(j.at("model").get<std::string>());
        c.fingerprint = j.at("dataset_fingerprint").get<std::string>();
        c.config = gcn_config_from(config_from_json(j.at("config")));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data, dir.string() + "/checkpoint.json: " + e.what());
    }
    for (std::size_t l = 0; l < c.config.num_layers; ++l) {
        c.params.weights.push_back(load_table_binary(dir / ("weight_" + std::to_string(l + 1) + ".bin")));
    }
    const char* names[2] = {"source", "target"};
    for (int g = 0; g < 2; ++g) {
        c.params.inputs[g].entities = load_table_binary(dir / (std::string(names[g]) + "_entities.bin"));
        const fs::path protos = dir / (std::string(names[g]) + "_prototypes.bin");
        if (c.mode == GcnMode::rpe) c.params.inputs[g].prototypes = load_table_binary(protos);
    }
    return c;
}

std::string checkpoint_task(const fs::path& dir) {
    const auto j = read_checkpoint_json(dir);
    const std::string task = j.value("task", "");
    if (task != "completion" && task != "alignment") {
        throw Error(ErrorKind::data, dir.string() + "/checkpoint.json has no valid task");
    }
    return task;
}

void require_fingerprint(const std::string& expected, const std::string& actual, const std::string& what) {
    if (expected != actual) {
        throw Error(ErrorKind::fingerprint,
                    what + ": dataset fingerprint " + actual + " does not match checkpoint " + expected);
    }
}

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

double completion_dbi(const KnowledgeGraph& kg, const RotateTables& tables, CompletionModel model, double lambda,
                      const CategoryFilter& filter) {
    const auto view = CategoryAssignment::from_graph(kg).view(filter);
    return davies_bouldin(view, completion_category_embedding(tables, model, lambda));
}

double alignment_dbi(const KnowledgeGraph& kg, const Matrix& embeddings, const CategoryFilter& filter) {
    const auto view = CategoryAssignment::from_graph(kg).view(filter);
    return davies_bouldin(view, [&](Id e, const Category&) {
        return std::vector<double>(embeddings.row(e).begin(), embeddings.row(e).end());
    });
}

LongTailReport completion_long_tail(const CompletionDataset& data, std::span<const std::size_t> baseline_ranks,
                                    std::span<const std::size_t> rpe_ranks, std::span<const std::size_t> thresholds) {
    const auto queries = completion_queries(data.test);
    const auto degrees = answer_degrees(queries, degree_index(*data.graph));
    return long_tail_report(degrees, baseline_ranks, rpe_ranks, thresholds);
}

std::vector<double> default_lambda_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}; }

std::vector<SweepRow> completion_lambda_sweep(const CompletionDataset& data, const CompletionConfig& config,
                                              std::span<const double> grid) {
    std::vector<SweepRow> rows;
    for (double lambda : grid) {
        CompletionConfig c = config;
        c.lambda = lambda;
        const auto run = run_completion(data, c, CompletionModel::rpe_rotate);
        rows.push_back({lambda, run.test.mrr, run.test.hits.at(1), run.test.hits.at(10)});
    }
    return rows;
}

std::vector<SweepRow> alignment_lambda_sweep(const AlignmentDataset& data, const GcnConfig& config,
                                             std::span<const double> grid) {
    std::vector<SweepRow> rows;
    for (double lambda : grid) {
        GcnConfig c = config;
        c.lambda = lambda;
        const auto run = run_alignment(data, c, GcnMode::rpe);
        rows.push_back({lambda, run.test.mrr, run.test.hits.at(1), run.test.hits.at(10)});
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "lambda,mrr,hits1,hits10\n";
    for (const auto& r : rows) {
        out += format_double(r.lambda) + "," + format_double(r.mrr) + "," + format_double(r.hits1) + "," +
               format_double(r.hits10) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

GradCheckReport completion_gradcheck(std::uint64_t seed, std::size_t dim) {
    auto kg = std::make_shared<const KnowledgeGraph>(random_graph(20, 3, 60, seed));
    CompletionConfig cfg;
    cfg.dim = dim;
    cfg.batch_size = 6;
    cfg.negative_sample_size = 4;
    cfg.margin = 3.0;
    cfg.adversarial_temperature = 1.0;
    cfg.adversarial_detach = false;
    cfg.lambda = 0.5;
    cfg.anchor_penalty = 0.1;
    cfg.seed = seed;
    RotateTables tables = init_rotate_tables(*kg, cfg);

    Rng rng = make_rng(seed, "gradcheck/batch");
    const NegativeSampler sampler(kg, cfg.negative_retries);
    TripleBatch batch;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
        const Triple& t = kg->triples()[uniform_index(rng, kg->triple_count())];
        batch.positives.push_back(t);
        batch.negatives.push_back(sampler.sample(t, cfg.negative_sample_size, cfg.corruption, rng));
    }
    const auto analytic = self_adversarial_loss(batch, tables, cfg, CompletionModel::rpe_rotate);
    auto loss = [&] { return self_adversarial_loss(batch, tables, cfg, CompletionModel::rpe_rotate).loss; };

    auto rows_of_grad = [](const SparseGradient& g) {
        std::vector<std::size_t> rows;
        for (const auto& [r, v] : g.rows()) rows.push_back(r);
        return rows;
    };
    constexpr double h = 1e-3, tol = 1e-4;
    const std::vector<GradCheckReport> reports = {
        finite_difference_check(loss, tables.entities, analytic.grads.entities, rows_of_grad(analytic.grads.entities), h, tol),
        finite_difference_check(loss, tables.relations, analytic.grads.relations, rows_of_grad(analytic.grads.relations), h, tol),
        finite_difference_check(loss, tables.prototypes, analytic.grads.prototypes, rows_of_grad(analytic.grads.prototypes), h, tol),
    };
    return worst_of(reports);
}

GradCheckReport alignment_gradcheck(std::uint64_t seed, std::size_t dim) {
    AlignmentDataset data;
    data.source = std::make_shared<const KnowledgeGraph>(random_graph(24, 3, 60, seed));
    data.target = std::make_shared<const KnowledgeGraph>(random_graph(24, 3, 60, seed + 1));
    std::vector<EntityPair> pairs;
    for (Id i = 0; i < 24; ++i) pairs.emplace_back(i, i);
    data.seeds = split_seeds(std::move(pairs), 0.25, seed);

    GcnConfig cfg;
    cfg.dim = dim;
    cfg.num_layers = 2;
    cfg.activation = Activation::tanh;
    cfg.dropout = 0.0;
    cfg.negatives_per_positive = 3;
    cfg.lambda = 0.5;
    cfg.seed = seed;
    const AlignmentModel model(data, GcnMode::rpe, cfg.lambda);
    GcnParameters params = init_gcn_parameters(*data.source, *data.target, cfg);
    const auto emb = alignment_embeddings(model, params, cfg);
    const auto negatives = mine_negative_pairs(emb[0], emb[1], data.seeds.train, cfg.negatives_per_positive, 0);
    const auto analytic = alignment_objective(model, params, cfg, data.seeds.train, negatives);
    auto loss = [&] { return alignment_objective(model, params, cfg, data.seeds.train, negatives).loss; };

    constexpr double h = 1e-5, tol = 1e-4;
    std::vector<GradCheckReport> reports;
    auto check = [&](EmbeddingTable& table, const EmbeddingTable& grad) {
        std::vector<std::size_t> rows(table.rows());
        for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
        reports.push_back(finite_difference_check(
            loss, table, [&](std::size_t r, std::size_t c) { return grad.row(r)[c]; }, rows, h, tol));
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) check(params.weights[l], analytic.grads.weights[l]);
    for (int g = 0; g < 2; ++g) {
        check(params.inputs[g].entities, analytic.grads.inputs[g].entities);
        check(params.inputs[g].prototypes, analytic.grads.inputs[g].prototypes);
    }
    return worst_of(reports);
}

// ---------------------------------------------------------------------------
// Theory
// ---------------------------------------------------------------------------

ConstructedInstance constructed_completion_instance() {
    ConstructedInstance inst;
    inst.phases = EmbeddingTable(2, 1, TableKind::relation_phase, false);
    const double r = 0.1;
    auto ring = [&](double cx) {
        return std::vector<std::vector<double>>{{cx + r, 0.0}, {cx - r, 0.0}, {cx, r}, {cx, -r}, {cx, 0.0}};
    };
    Id next = 0;
    for (Id rel = 0; rel < 2; ++rel) {
        const double cx = rel == 0 ? 0.0 : 10.0;
        for (Side side : {Side::head, Side::tail}) {
            std::vector<Id> members;
            for (int i = 0; i < 5; ++i) members.push_back(next++);
            inst.areas.push_back(make_area(rel, side, {cx, 0.0}, std::move(members), ring(cx)));
        }
    }
    return inst;
}

TheoryReport completion_theory_report(const RotateTables& tables, const KnowledgeGraph& kg, double lambda,
                                      std::size_t samples, std::uint64_t seed, std::size_t max_triples) {
    TheoryReport report;
    const std::size_t n = std::min(max_triples, kg.triple_count());
    for (std::size_t i = 0; i < n; ++i) {
        const Triple& t = kg.triples()[i];
        auto e = check_lemma1(tables.entities.row(t.head), tables.entities.row(t.tail), tables.relations.row(t.relation),
                              tables.prototypes.row(head_prototype_row(t.relation)),
                              tables.prototypes.row(tail_prototype_row(t.relation)));
        e.subject = kg.entities().label(t.head) + " " + kg.relations().label(t.relation) + " " +
                    kg.entities().label(t.tail);
        report.entries.push_back(std::move(e));
    }
    Rng rng = make_rng(seed, "theory/samples");
    report.append(check_completion_theorems(build_areas(tables, kg, lambda), tables.relations, samples, rng));
    report.min_prototype_distance = min_prototype_distance(tables.prototypes);
    return report;
}

TheoryReport alignment_theory_report(const AlignmentDataset& data, const AlignmentCheckpoint& ckpt,
                                     std::size_t samples, std::uint64_t seed) {
    if (ckpt.mode != GcnMode::rpe) throw Error(ErrorKind::usage, "alignment theory checks need an rpe-gcn checkpoint");
    const AlignmentModel model(data, ckpt.mode, ckpt.config.lambda);
    std::array<std::vector<PrototypeArea>, 2> areas;
    const std::array<const KnowledgeGraph*, 2> graphs = {data.source.get(), data.target.get()};
    for (int g = 0; g < 2; ++g) {
        const auto& prop = model.propagation[g];
        const auto states = gcn_forward(prop, ckpt.params.weights, stack_inputs(ckpt.params.inputs[g], prop), ckpt.config);
        const Matrix nodes = final_node_states(states, ckpt.config.aggregate_all_layers);
        const auto ne = static_cast<Eigen::Index>(prop.entity_count());
        areas[g] = build_areas(rows_of(nodes, 0, ne), rows_of(nodes, ne, nodes.rows()), *graphs[g], 1.0);
    }
    std::vector<std::pair<std::size_t, std::size_t>> correspondence;
    for (Id r = 0; r < data.source->relation_count(); ++r) {
        const auto other = data.target->relations().find(data.source->relations().label(r));
        if (!other) continue;
        correspondence.emplace_back(2 * r, 2 * static_cast<std::size_t>(*other));
        correspondence.emplace_back(2 * r + 1, 2 * static_cast<std::size_t>(*other) + 1);
    }
    Rng rng = make_rng(seed, "theory/samples");
    TheoryReport report = check_theorem_alignment(areas[0], areas[1], correspondence, samples, rng);
    double min_dist = std::numeric_limits<double>::infinity();
    for (int g = 0; g < 2; ++g) {
        for (std::size_t a = 0; a < areas[g].size(); ++a) {
            for (std::size_t b = a + 1; b < areas[g].size(); ++b) {
                double d = 0.0;
                for (std::size_t j = 0; j < areas[g][a].center.size(); ++j) {
                    const double x = areas[g][a].center[j] - areas[g][b].center[j];
                    d += x * x;
                }
                min_dist = std::min(min_dist, std::sqrt(d));
            }
        }
    }
    if (std::isfinite(min_dist)) report.min_prototype_distance = min_dist;
    return report;
}

}  // namespace rpe::app

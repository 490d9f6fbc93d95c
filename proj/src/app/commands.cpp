#include "rpe/app/commands.hpp"

#include "CLI11.hpp"
#include "json.hpp"
#include "rpe/app/manifest.hpp"
#include "rpe/app/pipeline.hpp"
#include "rpe/synthetic.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <memory>

namespace rpe::app {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
}

// Options every run-producing subcommand shares.
struct RunOptions {
    std::string out_dir = "runs";
    unsigned threads = 1;
    bool deterministic = false;

    void add_to(CLI::App* sub) {
        sub->add_option("--out-dir", out_dir, "Parent directory of run directories")->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_flag("--deterministic", deterministic, "Single-threaded reductions; byte-stable metrics");
    }
    unsigned effective_threads() const { return deterministic ? 1u : threads; }
};

struct TrainOptions {
    std::string dataset;
    std::string config_file;
    std::string model;
    std::vector<std::string> sets;
    ConfigMap flags;
    bool dry_run = false;
    RunOptions run;

    void add_common(CLI::App* sub) {
        sub->add_option("--dataset", dataset, "Dataset name (under $RPE_DATA_DIR) or directory")->required();
        sub->add_option("--config", config_file, "Config file; replaces the dataset preset");
        sub->add_option("--set", sets, "Override any config key: key=value")->take_all();
        sub->add_flag("--dry-run", dry_run, "Print the resolved config and exit");
        run.add_to(sub);
    }
    void add_override(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(flag, [this, key](const std::string& v) { flags[key] = v; }, help);
    }
    ConfigSources sources() const { return {dataset, config_file, sets, flags}; }
};

std::string pick_model(const std::string& flag, const ConfigMap& map, const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (auto it = map.find(kModelKey); it != map.end()) return it->second;
    return fallback;
}

RunManifest start_manifest(const std::string& subcommand, const std::vector<std::string>& args,
                           const RunOptions& run, std::uint64_t seed) {
    RunManifest m;
    m.subcommand = subcommand;
    m.arguments = args;
    m.seed = seed;
    m.deterministic = run.deterministic;
    m.threads = run.effective_threads();
    m.started = utc_timestamp();
    return m;
}

void finish(RunManifest& m, const fs::path& run_dir, std::ostream& out) {
    m.finished = utc_timestamp();
    m.outputs.push_back("manifest.json");
    write_manifest(m, run_dir);
    out << "run_dir=" << run_dir.string() << "\n";
}

void print_report(const RankingReport& r, std::ostream& out) {
    out << "queries=" << r.query_count << "\nmrr=" << format_double(r.mrr) << "\n";
    for (const auto& [n, v] : r.hits) out << "hits@" << n << "=" << format_double(v) << "\n";
}

SideFilter side_filter_from(const std::string& s) {
    if (s == "head") return SideFilter::head;
    if (s == "tail") return SideFilter::tail;
    if (s == "both") return SideFilter::both;
    throw Error(ErrorKind::usage, "unknown side filter '" + s + "' (head|tail|both)");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_train_completion(const TrainOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    ConfigMap map = resolve_config_map(o.sources());
    const auto model = completion_model_from_string(pick_model(o.model, map, "rpe-rotate"));
    CompletionConfig cfg = completion_config_from(map);
    cfg.threads = o.run.effective_threads();
    cfg.validate();
    ConfigMap resolved = to_config_map(cfg);
    resolved[kModelKey] = to_string(model);
    if (o.dry_run) {
        out << serialize_config(resolved);
        return 0;
    }
    const fs::path dir = resolve_dataset_dir(o.dataset);
    const std::string fp = dataset_fingerprint(dir);
    const auto data = load_completion_dataset(dir);

    auto manifest = start_manifest("train-completion", args, o.run, cfg.seed);
    manifest.config = resolved;
    manifest.fingerprints[dir.filename().string()] = fp;
    const fs::path run_dir = make_run_dir(o.run.out_dir, cfg.seed);
    spdlog::info("training {} on {} ({} train triples)", to_string(model), dir.string(), data.train.size());

    const auto run = run_completion(data, cfg, model);
    save_completion_checkpoint({model, cfg, run.train.tables, fp}, run_dir / "checkpoint");
    write_completion_curve(run.train.curve, run_dir / "loss_curve.csv");
    write_text(run_dir / "metrics.json", completion_metrics_json(run, fp));
    manifest.outputs = {"checkpoint", "loss_curve.csv", "metrics.json"};
    print_report(run.test, out);
    finish(manifest, run_dir, out);
    return 0;
}

int cmd_train_alignment(const TrainOptions& o, bool no_layer_aggregation, const std::vector<std::string>& args,
                        std::ostream& out) {
    ConfigMap map = resolve_config_map(o.sources());
    const auto mode = gcn_mode_from_string(pick_model(o.model, map, "rpe-gcn"));
    GcnConfig cfg = gcn_config_from(map);
    if (no_layer_aggregation) cfg.aggregate_all_layers = false;
    cfg.threads = o.run.effective_threads();
    cfg.validate();
    ConfigMap resolved = to_config_map(cfg);
    resolved[kModelKey] = to_string(mode);
    if (o.dry_run) {
        out << serialize_config(resolved);
        return 0;
    }
    const fs::path dir = resolve_dataset_dir(o.dataset);
    const std::string fp = dataset_fingerprint(dir);
    const auto data = load_alignment_dataset(dir);

    auto manifest = start_manifest("train-alignment", args, o.run, cfg.seed);
    manifest.config = resolved;
    manifest.fingerprints[dir.filename().string()] = fp;
    const fs::path run_dir = make_run_dir(o.run.out_dir, cfg.seed);
    spdlog::info("training {} on {} ({} train seeds)", to_string(mode), dir.string(), data.seeds.train.size());

    const auto run = run_alignment(data, cfg, mode);
    save_alignment_checkpoint({mode, cfg, run.train.params, fp}, run_dir / "checkpoint");
    write_alignment_curve(run.train.curve, run_dir / "loss_curve.csv");
    write_text(run_dir / "metrics.json", alignment_metrics_json(run, fp));
    manifest.outputs = {"checkpoint", "loss_curve.csv", "metrics.json"};
    print_report(run.test, out);
    finish(manifest, run_dir, out);
    return 0;
}

struct EvalInputs {
    std::string checkpoint;
    std::string dataset;
    RunOptions run;
};

int cmd_evaluate(const EvalInputs& o, const std::vector<std::string>& args, std::ostream& out) {
    const fs::path dir = resolve_dataset_dir(o.dataset);
    const std::string fp = dataset_fingerprint(dir);
    nlohmann::ordered_json j;
    RunManifest manifest;
    RankingReport report;
    if (checkpoint_task(o.checkpoint) == "completion") {
        auto ckpt = load_completion_checkpoint(o.checkpoint);
        require_fingerprint(ckpt.fingerprint, fp, o.checkpoint);
        const auto data = load_completion_dataset(dir);
        KnownTriples known;
        known.add(data.train);
        known.add(data.valid);
        known.add(data.test);
        report = completion_report(data.test, data.graph->entity_count(),
                                   make_rotate_scorer(ckpt.tables, ckpt.model, ckpt.config.lambda), known,
                                   ckpt.config.tie_policy, o.run.effective_threads());
        manifest = start_manifest("evaluate", args, o.run, ckpt.config.seed);
        manifest.config = to_config_map(ckpt.config);
        manifest.config[kModelKey] = to_string(ckpt.model);
        j["model"] = to_string(ckpt.model);
    } else {
        auto ckpt = load_alignment_checkpoint(o.checkpoint);
        require_fingerprint(ckpt.fingerprint, fp, o.checkpoint);
        const auto data = load_alignment_dataset(dir);
        const AlignmentModel model(data, ckpt.mode, ckpt.config.lambda);
        const auto emb = alignment_embeddings(model, ckpt.params, ckpt.config);
        report = alignment_report(data.seeds.test, to_embedding_matrix(emb[0]), to_embedding_matrix(emb[1]),
                                  ckpt.config.tie_policy, o.run.effective_threads());
        manifest = start_manifest("evaluate", args, o.run, ckpt.config.seed);
        manifest.config = to_config_map(ckpt.config);
        manifest.config[kModelKey] = to_string(ckpt.mode);
        j["model"] = to_string(ckpt.mode);
    }
    manifest.fingerprints[dir.filename().string()] = fp;
    j["dataset_fingerprint"] = fp;
    j["test"] = nlohmann::ordered_json::parse(report.to_json());
    const fs::path run_dir = make_run_dir(o.run.out_dir, manifest.seed);
    write_text(run_dir / "metrics.json", j.dump(2) + "\n");
    manifest.outputs = {"metrics.json"};
    print_report(report, out);
    finish(manifest, run_dir, out);
    return 0;
}

struct DbiInputs {
    std::vector<std::string> checkpoints;
    std::string dataset;
    std::size_t min_members = 100;
    std::string sides = "head";
    bool no_exclusive = false;
    bool export_embeddings = false;
    RunOptions run;
};

int cmd_dbi(const DbiInputs& o, const std::vector<std::string>& args, std::ostream& out) {
    const fs::path dir = resolve_dataset_dir(o.dataset);
    const std::string fp = dataset_fingerprint(dir);
    const CategoryFilter filter{side_filter_from(o.sides), !o.no_exclusive, o.min_members};
    const std::string task = dataset_task(dir);
    auto manifest = start_manifest("dbi", args, o.run, 0);
    manifest.fingerprints[dir.filename().string()] = fp;
    manifest.config = {{"min_members", std::to_string(o.min_members)},
                       {"sides", o.sides},
                       {"exclusive", o.no_exclusive ? "false" : "true"}};
    const fs::path run_dir = make_run_dir(o.run.out_dir, 0);

    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
        const std::string& path = o.checkpoints[i];
        nlohmann::ordered_json row;
        row["checkpoint"] = path;
        if (task == "completion") {
            const auto ckpt = load_completion_checkpoint(path);
            require_fingerprint(ckpt.fingerprint, fp, path);
            const auto data = load_completion_dataset(dir);
            const double dbi = completion_dbi(*data.graph, ckpt.tables, ckpt.model, ckpt.config.lambda, filter);
            row["model"] = to_string(ckpt.model);
            row["dbi"] = dbi;
            out << path << " " << to_string(ckpt.model) << " dbi=" << format_double(dbi) << "\n";
            if (o.export_embeddings) {
                const auto assignment = CategoryAssignment::from_graph(*data.graph);
                const auto view = assignment.view(filter);
                const std::string name = "embeddings_" + std::to_string(i) + ".csv";
                export_embeddings_with_categories(*data.graph, assignment, &view,
                                                  completion_category_embedding(ckpt.tables, ckpt.model,
                                                                                ckpt.config.lambda),
                                                  run_dir / name);
                manifest.outputs.push_back(name);
            }
        } else {
            const auto ckpt = load_alignment_checkpoint(path);
            require_fingerprint(ckpt.fingerprint, fp, path);
            const auto data = load_alignment_dataset(dir);
            const AlignmentModel model(data, ckpt.mode, ckpt.config.lambda);
            const auto emb = alignment_embeddings(model, ckpt.params, ckpt.config);
            const double ds = alignment_dbi(*data.source, emb[0], filter);
            const double dt = alignment_dbi(*data.target, emb[1], filter);
            row["model"] = to_string(ckpt.mode);
            row["dbi_source"] = ds;
            row["dbi_target"] = dt;
            out << path << " " << to_string(ckpt.mode) << " dbi_source=" << format_double(ds)
                << " dbi_target=" << format_double(dt) << "\n";
        }
        results.push_back(row);
    }
    write_text(run_dir / "dbi.json", results.dump(2) + "\n");
    manifest.outputs.push_back("dbi.json");
    finish(manifest, run_dir, out);
    return 0;
}

struct LongTailInputs {
    std::string baseline;
    std::string rpe;
    std::string dataset;
    std::vector<std::size_t> thresholds;
    RunOptions run;
};

int cmd_longtail(const LongTailInputs& o, const std::vector<std::string>& args, std::ostream& out) {
    const fs::path dir = resolve_dataset_dir(o.dataset);
    const std::string fp = dataset_fingerprint(dir);
    const auto data = load_completion_dataset(dir);
    const auto base = load_completion_checkpoint(o.baseline);
    const auto rpe = load_completion_checkpoint(o.rpe);
    require_fingerprint(base.fingerprint, fp, o.baseline);
    require_fingerprint(rpe.fingerprint, fp, o.rpe);
    KnownTriples known;
    known.add(data.train);
    known.add(data.valid);
    known.add(data.test);
    auto ranks = [&](const CompletionCheckpoint& c) {
        return completion_report(data.test, data.graph->entity_count(),
                                 make_rotate_scorer(c.tables, c.model, c.config.lambda), known, c.config.tie_policy,
                                 o.run.effective_threads())
            .ranks;
    };
    const auto report = completion_long_tail(data, ranks(base), ranks(rpe), o.thresholds);

    auto manifest = start_manifest("longtail", args, o.run, rpe.config.seed);
    manifest.fingerprints[dir.filename().string()] = fp;
    const fs::path run_dir = make_run_dir(o.run.out_dir, manifest.seed);
    write_text(run_dir / "longtail.csv", report.to_csv());
    write_text(run_dir / "longtail.json", report.to_json());
    manifest.outputs = {"longtail.csv", "longtail.json"};
    out << report.to_csv();
    finish(manifest, run_dir, out);
    return 0;
}

struct TheoryInputs {
    bool constructed = false;
    std::string checkpoint;
    std::string dataset;
    std::size_t samples = 100;
    std::uint64_t seed = 0;
    std::size_t max_triples = 1000;
    bool strict = false;
    RunOptions run;
};

int cmd_theory_check(const TheoryInputs& o, const std::vector<std::string>& args, std::ostream& out) {
    TheoryReport report;
    auto manifest = start_manifest("theory-check", args, o.run, o.seed);
    if (o.constructed) {
        const auto inst = constructed_completion_instance();
        Rng rng = make_rng(o.seed, "theory/samples");
        report = check_completion_theorems(inst.areas, inst.phases, o.samples, rng, {}, true);
        manifest.config = {{"instance", "constructed"}};
    } else {
        if (o.checkpoint.empty() || o.dataset.empty()) {
            throw Error(ErrorKind::usage, "theory-check needs --constructed or --checkpoint with --dataset");
        }
        const fs::path dir = resolve_dataset_dir(o.dataset);
        const std::string fp = dataset_fingerprint(dir);
        manifest.fingerprints[dir.filename().string()] = fp;
        if (checkpoint_task(o.checkpoint) == "completion") {
            const auto ckpt = load_completion_checkpoint(o.checkpoint);
            require_fingerprint(ckpt.fingerprint, fp, o.checkpoint);
            const auto data = load_completion_dataset(dir);
            const double lambda = ckpt.model == CompletionModel::rotate ? 1.0 : ckpt.config.lambda;
            report = completion_theory_report(ckpt.tables, *data.graph, lambda, o.samples, o.seed, o.max_triples);
            manifest.config = to_config_map(ckpt.config);
        } else {
            const auto ckpt = load_alignment_checkpoint(o.checkpoint);
            require_fingerprint(ckpt.fingerprint, fp, o.checkpoint);
            report = alignment_theory_report(load_alignment_dataset(dir), ckpt, o.samples, o.seed);
            manifest.config = to_config_map(ckpt.config);
        }
    }
    const fs::path run_dir = make_run_dir(o.run.out_dir, o.seed);
    write_text(run_dir / "theory.json", report.to_json());
    write_text(run_dir / "theory.txt", report.to_text());
    manifest.outputs = {"theory.json", "theory.txt"};
    out << report.to_text();
    finish(manifest, run_dir, out);
    return o.strict && !report.all_passed() ? 1 : 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t dim, std::ostream& out) {
    auto line = [&](const char* name, const GradCheckReport& r) {
        out << name << ": " << (r.passed() ? "pass" : "FAIL") << " max_rel_error=" << r.max_rel_error
            << " coordinates=" << r.coordinates_checked << " worst=(" << r.worst_row << "," << r.worst_col
            << ") analytic=" << r.analytic_at_worst << " numeric=" << r.numeric_at_worst << "\n";
    };
    const auto c = completion_gradcheck(seed, dim);
    const auto a = alignment_gradcheck(seed, dim);
    line("rpe-rotate self-adversarial loss", c);
    line("rpe-gcn margin loss", a);
    return c.passed() && a.passed() ? 0 : 1;
}

int cmd_lambda_sweep(const TrainOptions& o, std::vector<double> grid, const std::vector<std::string>& args,
                     std::ostream& out) {
    if (grid.empty()) grid = default_lambda_grid();
    const fs::path dir = resolve_dataset_dir(o.dataset);
    const std::string fp = dataset_fingerprint(dir);
    const ConfigMap map = resolve_config_map(o.sources());
    auto manifest = start_manifest("lambda-sweep", args, o.run, 0);
    manifest.fingerprints[dir.filename().string()] = fp;
    std::vector<SweepRow> rows;
    if (dataset_task(dir) == "completion") {
        CompletionConfig cfg = completion_config_from(map);
        cfg.threads = o.run.effective_threads();
        cfg.validate();
        manifest.config = to_config_map(cfg);
        manifest.seed = cfg.seed;
        rows = completion_lambda_sweep(load_completion_dataset(dir), cfg, grid);
    } else {
        GcnConfig cfg = gcn_config_from(map);
        cfg.threads = o.run.effective_threads();
        cfg.validate();
        manifest.config = to_config_map(cfg);
        manifest.seed = cfg.seed;
        rows = alignment_lambda_sweep(load_alignment_dataset(dir), cfg, grid);
    }
    std::string grid_text;
    for (double g : grid) grid_text += (grid_text.empty() ? "" : ",") + format_double(g);
    manifest.config["lambda_grid"] = grid_text;
    const fs::path run_dir = make_run_dir(o.run.out_dir, manifest.seed);
    const std::string csv = sweep_csv(rows);
    write_text(run_dir / "lambda_sweep.csv", csv);
    manifest.outputs = {"lambda_sweep.csv"};
    out << csv;
    finish(manifest, run_dir, out);
    return 0;
}

int cmd_stats(const std::string& dataset, bool json, std::ostream& out) {
    const fs::path dir = resolve_dataset_dir(dataset);
    const DatasetStats stats = dataset_task(dir) == "completion" ? stats_of(load_completion_dataset(dir))
                                                                 : stats_of(load_alignment_dataset(dir));
    out << (json ? stats.to_json() : stats.to_key_value());
    return 0;
}

int cmd_make_fixture(const std::string& task, const std::string& out_dir, std::optional<std::uint64_t> seed,
                     std::ostream& out) {
    if (task == "completion") {
        CompletionFixtureSpec spec;
        if (seed) spec.seed = *seed;
        write_completion_dataset(make_completion_fixture(spec), out_dir);
    } else if (task == "alignment") {
        AlignmentFixtureSpec spec;
        if (seed) spec.seed = *seed;
        write_alignment_dataset(make_alignment_fixture(spec), spec.seed, out_dir);
    } else {
        throw Error(ErrorKind::usage, "unknown fixture task '" + task + "' (completion|alignment)");
    }
    out << "dataset=" << out_dir << "\nfingerprint=" << dataset_fingerprint(out_dir) << "\n";
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

ConfigMap resolve_config_map(const ConfigSources& s) {
    ConfigMap map;
    if (!s.config_file.empty()) {
        map = load_config_file(s.config_file);
    } else if (!s.dataset.empty()) {
        if (auto preset = preset_config_path(s.dataset)) map = load_config_file(*preset);
    }
    ConfigMap sets;
    for (const auto& kv : s.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::usage, "--set expects key=value, got '" + kv + "'");
        sets[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return merge(merge(map, sets), s.flags);
}

std::string dataset_task(const fs::path& dir) {
    if (fs::exists(dir / "train.txt")) return "completion";
    if (fs::exists(dir / kSourceFile)) return "alignment";
    throw Error(ErrorKind::data, dir.string() + " holds neither train.txt nor " + kSourceFile);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Relational prototype entity embeddings: training, evaluation and analysis", "rpe"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", tool_version());
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    // train-completion
    TrainOptions tc;
    auto* s_tc = app.add_subcommand("train-completion", "Train rotate or rpe-rotate on a completion dataset");
    tc.add_common(s_tc);
    s_tc->add_option("--model", tc.model, "rotate|rpe-rotate (default rpe-rotate)");
    tc.add_override(s_tc, "--dim", "dim", "Embedding size k");
    tc.add_override(s_tc, "--batch-size", "batch_size", "Positives per step");
    tc.add_override(s_tc, "--negatives", "negative_sample_size", "Negatives per positive");
    tc.add_override(s_tc, "--margin", "margin", "Fixed margin gamma");
    tc.add_override(s_tc, "--temperature", "adversarial_temperature", "Adversarial temperature alpha");
    tc.add_override(s_tc, "--lambda", "lambda", "Prototype weight lambda in (0, 1]");
    tc.add_override(s_tc, "--lr", "learning_rate", "Adam learning rate");
    tc.add_override(s_tc, "--max-steps", "max_steps", "Training steps");
    tc.add_override(s_tc, "--eval-every", "eval_every", "Validation interval in steps (0: end only)");
    tc.add_override(s_tc, "--seed", "seed", "Master seed");

    // train-alignment
    TrainOptions ta;
    bool no_layer_aggregation = false;
    auto* s_ta = app.add_subcommand("train-alignment", "Train gcn or rpe-gcn on an alignment dataset");
    ta.add_common(s_ta);
    s_ta->add_option("--model", ta.model, "gcn|rpe-gcn (default rpe-gcn)");
    s_ta->add_flag("--no-layer-aggregation", no_layer_aggregation, "Use the last layer instead of the layer mean");
    ta.add_override(s_ta, "--dim", "dim", "Embedding size k");
    ta.add_override(s_ta, "--layers", "num_layers", "GCN layers L");
    ta.add_override(s_ta, "--margin", "margin", "Hinge margin gamma");
    ta.add_override(s_ta, "--lambda", "lambda", "Prototype weight lambda in (0, 1]");
    ta.add_override(s_ta, "--lr", "learning_rate", "Adagrad learning rate");
    ta.add_override(s_ta, "--l2", "l2_weight", "L2 weight on layer matrices");
    ta.add_override(s_ta, "--dropout", "dropout", "Dropout rate");
    ta.add_override(s_ta, "--activation", "activation", "relu|tanh|identity");
    ta.add_override(s_ta, "--epochs", "epochs", "Training epochs");
    ta.add_override(s_ta, "--seed", "seed", "Master seed");

    // evaluate
    EvalInputs ev;
    auto* s_ev = app.add_subcommand("evaluate", "Rank the test split with a checkpoint");
    s_ev->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
    s_ev->add_option("--dataset", ev.dataset, "Dataset the checkpoint was trained on")->required();
    ev.run.add_to(s_ev);

    // dbi
    DbiInputs db;
    auto* s_db = app.add_subcommand("dbi", "Davies-Bouldin index of category clusters");
    s_db->add_option("--checkpoint", db.checkpoints, "Checkpoint directory (repeatable)")->required();
    s_db->add_option("--dataset", db.dataset, "Dataset")->required();
    s_db->add_option("--min-members", db.min_members, "Smallest category kept")->capture_default_str();
    s_db->add_option("--sides", db.sides, "head|tail|both")->capture_default_str();
    s_db->add_flag("--no-exclusive", db.no_exclusive, "Keep entities that belong to several categories");
    s_db->add_flag("--export", db.export_embeddings, "Write the clustered embeddings as CSV");
    db.run.add_to(s_db);

    // longtail
    LongTailInputs lt;
    auto* s_lt = app.add_subcommand("longtail", "MRR per answer-degree bucket, baseline vs rpe");
    s_lt->add_option("--baseline", lt.baseline, "Baseline checkpoint")->required();
    s_lt->add_option("--rpe", lt.rpe, "Prototype-model checkpoint")->required();
    s_lt->add_option("--dataset", lt.dataset, "Dataset")->required();
    s_lt->add_option("--thresholds", lt.thresholds, "Bucket limits, e.g. 5,10,20,50")->delimiter(',');
    lt.run.add_to(s_lt);

    // theory-check
    TheoryInputs th;
    auto* s_th = app.add_subcommand("theory-check", "Numerical checks of the prototype-area geometry");
    s_th->add_flag("--constructed", th.constructed, "Check the built-in separated instance");
    s_th->add_option("--checkpoint", th.checkpoint, "Checkpoint directory");
    s_th->add_option("--dataset", th.dataset, "Dataset");
    s_th->add_option("--samples", th.samples, "Ball samples per area")->capture_default_str();
    s_th->add_option("--seed", th.seed, "Sampling seed")->capture_default_str();
    s_th->add_option("--max-triples", th.max_triples, "Triples checked against the lemma")->capture_default_str();
    s_th->add_flag("--strict", th.strict, "Exit 1 when any conclusion fails");
    th.run.add_to(s_th);

    // gradcheck
    std::uint64_t gc_seed = 0;
    std::size_t gc_dim = 8;
    auto* s_gc = app.add_subcommand("gradcheck", "Finite-difference check of both losses");
    s_gc->add_option("--seed", gc_seed, "Seed")->capture_default_str();
    s_gc->add_option("--dim", gc_dim, "Embedding size")->check(CLI::Range(1, 64))->capture_default_str();

    // lambda-sweep
    TrainOptions ls;
    std::vector<double> grid;
    auto* s_ls = app.add_subcommand("lambda-sweep", "Retrain the prototype model over a lambda grid");
    ls.add_common(s_ls);
    s_ls->add_option("--grid", grid, "Comma-separated lambdas (default 0.1,...,0.9,1)")->delimiter(',');

    // stats
    std::string st_dataset;
    bool st_json = false;
    auto* s_st = app.add_subcommand("stats", "Dataset statistics");
    s_st->add_option("--dataset", st_dataset, "Dataset")->required();
    s_st->add_flag("--json", st_json, "JSON instead of key=value lines");

    // make-fixture
    std::string mf_task, mf_out;
    std::optional<std::uint64_t> mf_seed;
    auto* s_mf = app.add_subcommand("make-fixture", "Write a synthetic category-structured dataset");
    s_mf->add_option("--task", mf_task, "completion|alignment")->required();
    s_mf->add_option("--out", mf_out, "Output directory")->required();
    s_mf->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { mf_seed = v; }, "Generator seed");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(e.what()) + "\n" : app.help());
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::usage);
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));
        if (s_tc->parsed()) return cmd_train_completion(tc, args, out);
        if (s_ta->parsed()) return cmd_train_alignment(ta, no_layer_aggregation, args, out);
        if (s_ev->parsed()) return cmd_evaluate(ev, args, out);
        if (s_db->parsed()) return cmd_dbi(db, args, out);
        if (s_lt->parsed()) return cmd_longtail(lt, args, out);
        if (s_th->parsed()) return cmd_theory_check(th, args, out);
        if (s_gc->parsed()) return cmd_gradcheck(gc_seed, gc_dim, out);
        if (s_ls->parsed()) return cmd_lambda_sweep(ls, grid, args, out);
        if (s_st->parsed()) return cmd_stats(st_dataset, st_json, out);
        if (s_mf->parsed()) return cmd_make_fixture(mf_task, mf_out, mf_seed, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::io);
    }
    return static_cast<int>(ErrorKind::usage);
}

}  // namespace rpe::app

#pragma once
// End-to-end operations shared by the command line and the test suites:
// training runs with their reports, checkpoints, dataset resolution,
// clustering and long-tail analyses, sweeps, and gradient checks.

#include "rpe/config.hpp"
#include "rpe/evaluator.hpp"
#include "rpe/gcn.hpp"
#include "rpe/geometry.hpp"
#include "rpe/gradcheck.hpp"
#include "rpe/rotate.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rpe::app {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

// Completion directories hold train.txt/valid.txt/test.txt; alignment
// directories hold source.txt, target.txt and seeds.txt.
inline constexpr const char* kSourceFile = "source.txt";
inline constexpr const char* kTargetFile = "target.txt";
inline constexpr const char* kSeedFile = "seeds.txt";

// An existing path is used as is; otherwise the name is looked up under
// $RPE_DATA_DIR (default ./data).
std::filesystem::path resolve_dataset_dir(const std::string& name_or_path);

// Hash over every regular file of the directory (names and bytes, sorted by name).
std::string dataset_fingerprint(const std::filesystem::path& dir);

inline constexpr const char* kSplitFile = "split.conf";  // seed_fraction, split_seed

CompletionDataset load_completion_dataset(const std::filesystem::path& dir);
// The seed split comes from split.conf when present, else 30% with split seed 0.
AlignmentDataset load_alignment_dataset(const std::filesystem::path& dir);
void write_alignment_dataset(const AlignmentDataset& data, std::uint64_t split_seed,
                             const std::filesystem::path& dir);

// Shipped preset for a dataset name (configs/<name>.conf), if any.
std::optional<std::filesystem::path> preset_config_path(const std::string& dataset_name);
std::filesystem::path config_dir();

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct CompletionRun {
    CompletionModel model = CompletionModel::rpe_rotate;
    CompletionConfig config;
    CompletionTrainResult train;
    RankingReport test;
};

CompletionRun run_completion(const CompletionDataset& data, const CompletionConfig& config, CompletionModel model);

struct AlignmentRun {
    GcnMode mode = GcnMode::rpe;
    GcnConfig config;
    GcnTrainResult train;
    std::array<Matrix, 2> embeddings;  // evaluation-mode final embeddings
    RankingReport test;
};

AlignmentRun run_alignment(const AlignmentDataset& data, const GcnConfig& config, GcnMode mode);

// Metrics documents: stable key order, no timestamps.
std::string completion_metrics_json(const CompletionRun& run, const std::string& fingerprint);
std::string alignment_metrics_json(const AlignmentRun& run, const std::string& fingerprint);

void write_completion_curve(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);
void write_alignment_curve(const std::vector<AlignmentCurvePoint>& curve, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct CompletionCheckpoint {
    CompletionModel model = CompletionModel::rpe_rotate;
    CompletionConfig config;
    RotateTables tables;
    std::string fingerprint;
};

void save_completion_checkpoint(const CompletionCheckpoint& ckpt, const std::filesystem::path& dir);
CompletionCheckpoint load_completion_checkpoint(const std::filesystem::path& dir);

struct AlignmentCheckpoint {
    GcnMode mode = GcnMode::rpe;
    GcnConfig config;
    GcnParameters params;
    std::string fingerprint;
};

void save_alignment_checkpoint(const AlignmentCheckpoint& ckpt, const std::filesystem::path& dir);
AlignmentCheckpoint load_alignment_checkpoint(const std::filesystem::path& dir);

// "completion" or "alignment".
std::string checkpoint_task(const std::filesystem::path& dir);

// Throws Error(fingerprint) when they differ.
void require_fingerprint(const std::string& expected, const std::string& actual, const std::string& what);

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

double completion_dbi(const KnowledgeGraph& kg, const RotateTables& tables, CompletionModel model, double lambda,
                      const CategoryFilter& filter);
double alignment_dbi(const KnowledgeGraph& kg, const Matrix& embeddings, const CategoryFilter& filter);

LongTailReport completion_long_tail(const CompletionDataset& data, std::span<const std::size_t> baseline_ranks,
                                    std::span<const std::size_t> rpe_ranks,
                                    std::span<const std::size_t> thresholds = {});

struct SweepRow {
    double lambda = 0.0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
};

std::vector<double> default_lambda_grid();
std::vector<SweepRow> completion_lambda_sweep(const CompletionDataset& data, const CompletionConfig& config,
                                              std::span<const double> grid);
std::vector<SweepRow> alignment_lambda_sweep(const AlignmentDataset& data, const GcnConfig& config,
                                             std::span<const double> grid);
std::string sweep_csv(std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// Gradient checks and the constructed theory instance
// ---------------------------------------------------------------------------

// Small random problems: dim 8, batch <= 8, tanh activation. The completion
// check differentiates through the adversarial weights (no detach), which is
// what a finite difference of the loss value sees.
GradCheckReport completion_gradcheck(std::uint64_t seed, std::size_t dim = 8);
GradCheckReport alignment_gradcheck(std::uint64_t seed, std::size_t dim = 8);

// k = 1, relation 0 with phase 0 and P_H = P_T = 0, areas of radius 0.1;
// relation 1 has both areas of radius 0.1 centred at 10.
struct ConstructedInstance {
    std::vector<PrototypeArea> areas;
    EmbeddingTable phases;
};
ConstructedInstance constructed_completion_instance();

// Prototype score bounds on up to `max_triples` training triples, both theorems per
// relation, and the prototype separation summary.
TheoryReport completion_theory_report(const RotateTables& tables, const KnowledgeGraph& kg, double lambda,
                                      std::size_t samples, std::uint64_t seed, std::size_t max_triples = 1000);

// Areas of the final (layer-aggregated) GCN states; prototype mode only.
// Areas correspond across graphs by relation label and side.
TheoryReport alignment_theory_report(const AlignmentDataset& data, const AlignmentCheckpoint& ckpt,
                                     std::size_t samples, std::uint64_t seed);

}  // namespace rpe::app

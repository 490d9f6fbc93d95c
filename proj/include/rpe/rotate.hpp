#pragma once
// Link prediction with rotation scoring. The baseline scores -||h o r - t||
// over complex k-vectors; the prototype-augmented variant first pulls each
// entity toward its relation's head/tail prototype:
//   h^ = lambda h + (1 - lambda) P_H(r),   t^ = lambda t + (1 - lambda) P_T(r)
// Relations are stored as phase angles, so |r_i| = 1 holds structurally.

#include "rpe/evaluator.hpp"
#include "rpe/kg_store.hpp"
#include "rpe/optimizer.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rpe {

enum class CompletionModel { rotate, rpe_rotate };
enum class CorruptionMode { head, tail, both };
// Which quantity the loss margin is applied to:
//   distance: -log s(gamma - d_pos) - sum p_i log s(d_i - gamma), d = -f
//   score:    -log s(gamma - f_pos) - sum p_i log s(f_i - gamma), taken verbatim
enum class MarginConvention { distance, score };
enum class PrototypeInit { random, entity_mean };

std::string to_string(CompletionModel m);
CompletionModel completion_model_from_string(const std::string& s);
std::string to_string(CorruptionMode m);
CorruptionMode corruption_mode_from_string(const std::string& s);
std::string to_string(MarginConvention m);
MarginConvention margin_convention_from_string(const std::string& s);
std::string to_string(PrototypeInit m);
PrototypeInit prototype_init_from_string(const std::string& s);

struct CompletionConfig {
    std::size_t dim = 500;
    std::size_t batch_size = 512;
    std::size_t negative_sample_size = 1024;
    double margin = 6.0;
    double adversarial_temperature = 0.5;
    double lambda = 0.5;
    double learning_rate = 0.00005;
    std::size_t max_steps = 80000;
    std::size_t eval_every = 10000;  // 0: evaluate once at the end
    std::uint64_t seed = 0;

    bool adversarial_detach = true;
    CorruptionMode corruption = CorruptionMode::both;
    MarginConvention margin_convention = MarginConvention::distance;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double init_scale = 1.0;
    // Weight of the optional ||P_H o r - P_T||^2 term (prototype models only).
    double anchor_penalty = 0.0;
    PrototypeInit prototype_init = PrototypeInit::random;
    TiePolicy tie_policy = TiePolicy::mean;
    std::size_t negative_retries = 64;
    unsigned threads = 1;
    std::string expected_runtime;

    // Throws Error(usage) when an invariant is violated.
    void validate() const;
    bool operator==(const CompletionConfig&) const = default;
};

struct RotateTables {
    EmbeddingTable entities;    // complex, |E| rows
    EmbeddingTable relations;   // phases, |R| rows
    EmbeddingTable prototypes;  // complex, 2|R| rows: head of r at 2r, tail at 2r + 1
};

inline std::size_t head_prototype_row(Id relation) { return 2 * static_cast<std::size_t>(relation); }
inline std::size_t tail_prototype_row(Id relation) { return 2 * static_cast<std::size_t>(relation) + 1; }

RotateTables init_rotate_tables(const KnowledgeGraph& kg, const CompletionConfig& config);

// -||h o r - t||; head/tail hold 2k reals (re then im), phase holds k angles.
double rotate_score(std::span<const double> head, std::span<const double> phase, std::span<const double> tail);

// lambda e + (1 - lambda) p; throws unless 0 < lambda <= 1.
std::vector<double> aggregate_with_prototype(std::span<const double> e, std::span<const double> p, double lambda);
void aggregate_with_prototype(std::span<const double> e, std::span<const double> p, double lambda,
                              std::span<double> out);

double rpe_rotate_score(const Triple& triple, const RotateTables& tables, double lambda);

// Baseline ignores the prototypes and lambda.
double triple_score(const Triple& triple, const RotateTables& tables, CompletionModel model, double lambda);

// ---------------------------------------------------------------------------
// Negatives and loss
// ---------------------------------------------------------------------------

struct NegativeTriple {
    Triple triple;
    Side corrupted = Side::tail;
};

struct TripleBatch {
    std::vector<Triple> positives;
    std::vector<std::vector<NegativeTriple>> negatives;  // one list per positive
};

// Uniform corruption filtered against the training triples.
class NegativeSampler {
public:
    NegativeSampler(std::shared_ptr<const KnowledgeGraph> train, std::size_t retries = 64);

    // Draws `count` negatives. Each draw retries uniformly up to `retries`
    // times, then samples from the explicit candidate pool. Throws
    // Error(data) when no valid corruption exists for the positive.
    std::vector<NegativeTriple> sample(const Triple& positive, std::size_t count, CorruptionMode mode,
                                       Rng& rng) const;

private:
    std::shared_ptr<const KnowledgeGraph> train_;
    std::size_t retries_;

    bool is_valid(const Triple& t) const { return !train_->contains(t); }
    std::optional<NegativeTriple> draw(const Triple& positive, Side side, Rng& rng) const;
};

struct CompletionGradients {
    SparseGradient entities;
    SparseGradient relations;
    SparseGradient prototypes;
};

struct LossResult {
    double loss = 0.0;  // mean over positives
    CompletionGradients grads;
};

// Self-adversarial negative-sampling loss. Negative weights are softmax(alpha f)
// over each positive's negatives; with `adversarial_detach` they are constants.
LossResult self_adversarial_loss(const TripleBatch& batch, const RotateTables& tables,
                                 const CompletionConfig& config, CompletionModel model);

// Loss of a single positive from its score and its negatives' scores.
double self_adversarial_value(double positive_score, std::span<const double> negative_scores,
                              double margin, double temperature, MarginConvention convention);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct CurvePoint {
    std::size_t step = 0;
    double loss = 0.0;
    std::optional<double> valid_mrr;
};

struct CompletionTrainResult {
    RotateTables tables;  // best-validation checkpoint (final tables without a validation split)
    std::vector<CurvePoint> curve;
    std::size_t best_step = 0;
    std::optional<double> best_valid_mrr;
    std::size_t steps_per_epoch = 0;
};

// Scores every entity as a replacement for the query slot.
CandidateScorer make_rotate_scorer(const RotateTables& tables, CompletionModel model, double lambda);

// Entity embedding as seen from a category: aggregated with the category's
// prototype for the prototype model, raw for the baseline.
CategoryEmbedding completion_category_embedding(const RotateTables& tables, CompletionModel model, double lambda);

CompletionTrainResult train_completion(const CompletionDataset& data, const CompletionConfig& config,
                                       CompletionModel model);

}  // namespace rpe

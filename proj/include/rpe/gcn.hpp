#pragma once
// Entity alignment with graph convolutions. The vanilla layer averages an
// entity with its one-hop neighbours; the prototype variant also lets each
// entity attend to the head/tail prototypes of its relations:
//   e_i <- rho(W [lambda sum_{N(i)+i} e_j + (1-lambda) sum_{protos} P] / denom)
//   P   <- rho(W [lambda sum_{members} e_j + (1-lambda) P] / denom)
// Prototype states at layer l read entity states of layer l-1.

#include "rpe/embedding.hpp"
#include "rpe/evaluator.hpp"
#include "rpe/kg_store.hpp"
#include "rpe/optimizer.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <array>
#include <optional>
#include <vector>

namespace rpe {

enum class GcnMode { vanilla, rpe };
enum class Activation { relu, tanh, identity };

std::string to_string(GcnMode m);
GcnMode gcn_mode_from_string(const std::string& s);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct GcnConfig {
    std::size_t dim = 128;
    std::size_t num_layers = 2;
    double margin = 1.0;
    double lambda = 0.5;
    double learning_rate = 0.001;
    double l2_weight = 0.01;
    double dropout = 0.2;
    Activation activation = Activation::relu;
    bool aggregate_all_layers = true;
    std::size_t negatives_per_positive = 25;
    std::size_t negative_refresh_epochs = 5;
    std::size_t epochs = 2000;
    std::uint64_t seed = 0;

    bool train_entity_inputs = true;
    // Project input entity rows back onto the unit sphere after each update.
    bool normalize_inputs = false;
    InitScheme weight_init = InitScheme::uniform;
    double init_scale = 1.0;
    std::size_t eval_every = 0;  // 0: no intermediate test evaluation
    TiePolicy tie_policy = TiePolicy::mean;
    unsigned threads = 1;
    std::string expected_runtime;

    void validate() const;
    bool operator==(const GcnConfig&) const = default;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Inputs of one graph: entity rows and (prototype mode) 2|R| prototype rows.
struct GraphInputs {
    EmbeddingTable entities;
    EmbeddingTable prototypes;
    bool operator==(const GraphInputs&) const = default;
};

// One weight set shared by both graphs; inputs per graph (source, target).
struct GcnParameters {
    std::vector<EmbeddingTable> weights;  // L tables of k x k, row-major W
    std::array<GraphInputs, 2> inputs;
    bool operator==(const GcnParameters&) const = default;
};

using GcnGradients = GcnParameters;

GcnParameters init_gcn_parameters(const KnowledgeGraph& source, const KnowledgeGraph& target,
                                  const GcnConfig& config);
GcnGradients zero_like(const GcnParameters& params);

// Row-normalised propagation operator over entity rows followed (prototype
// mode) by prototype rows.
class Propagation {
public:
    Propagation(const AugmentedGraph& graph, GcnMode mode, double lambda);

    GcnMode mode() const noexcept { return mode_; }
    std::size_t entity_count() const noexcept { return entity_count_; }
    std::size_t node_count() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    const SparseMatrix& matrix() const noexcept { return matrix_; }

private:
    GcnMode mode_;
    std::size_t entity_count_;
    SparseMatrix matrix_;
};

// Stacks entity rows then (prototype mode) prototype rows.
Matrix stack_inputs(const GraphInputs& inputs, const Propagation& prop);

struct DropoutStreams {
    Rng entities;
    Rng prototypes;
};

struct HiddenStates {
    std::size_t entity_count = 0;
    // layers[0] is the input; layers[l] the output of layer l (after dropout).
    std::vector<Matrix> layers;
    std::vector<Matrix> propagated;     // Y_l = M H_{l-1}
    std::vector<Matrix> preactivation;  // Z_l = Y_l W_l^T
    std::vector<Matrix> dropout_scale;  // empty when dropout is off
};

// Dropout applies only when `dropout` is given and the rate is positive.
HiddenStates gcn_forward(const Propagation& prop, const std::vector<EmbeddingTable>& weights,
                         const Matrix& inputs, const GcnConfig& config, DropoutStreams* dropout = nullptr);

// Mean of the entity rows over layers 1..L, or layer L alone.
Matrix final_embeddings(const HiddenStates& states, bool aggregate_all_layers);

// Accumulates dLoss/dW into `weight_grads` and returns dLoss/dinputs.
Matrix gcn_backward(const Propagation& prop, const std::vector<EmbeddingTable>& weights,
                    const HiddenStates& states, const GcnConfig& config, const Matrix& d_final,
                    std::vector<EmbeddingTable>& weight_grads);

// ---------------------------------------------------------------------------
// Margin loss and negatives
// ---------------------------------------------------------------------------

// Per training pair, the nearest same-graph entities of each side.
struct NegativePairCache {
    std::vector<std::vector<Id>> source;  // near the source entity
    std::vector<std::vector<Id>> target;  // near the target entity
    std::size_t epoch_stamp = 0;
};

// Exact top-`count` by cosine similarity for each anchor; ties go to the
// lower id, the anchor itself is excluded, zero vectors have similarity 0.
std::vector<std::vector<Id>> mine_negatives(const Matrix& embeddings, std::span<const Id> anchors,
                                            std::size_t count);

NegativePairCache mine_negative_pairs(const Matrix& source, const Matrix& target,
                                      std::span<const EntityPair> train_pairs, std::size_t count,
                                      std::size_t epoch);

struct AlignmentLoss {
    double loss = 0.0;
    Matrix d_source;
    Matrix d_target;
};

// Sum over pairs (i, j) and negative pairs (i', j), (i, j') of
// [||e_i - e_j|| + margin - ||e_i' - e_j'||]_+.
AlignmentLoss alignment_loss(std::span<const EntityPair> train_pairs, const NegativePairCache& negatives,
                             const Matrix& source, const Matrix& target, double margin);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct AlignmentModel {
    std::array<AugmentedGraph, 2> graphs;
    std::array<Propagation, 2> propagation;
    GcnMode mode;

    AlignmentModel(const AlignmentDataset& data, GcnMode mode, double lambda);
};

struct GcnObjective {
    double loss = 0.0;   // hinge + l2
    double hinge = 0.0;
    GcnGradients grads;
};

// Full objective for fixed negatives; training=true enables dropout.
GcnObjective alignment_objective(const AlignmentModel& model, const GcnParameters& params,
                                 const GcnConfig& config, std::span<const EntityPair> train_pairs,
                                 const NegativePairCache& negatives,
                                 std::array<DropoutStreams, 2>* dropout = nullptr);

// Evaluation-mode final embeddings of (source, target).
std::array<Matrix, 2> alignment_embeddings(const AlignmentModel& model, const GcnParameters& params,
                                           const GcnConfig& config);

EmbeddingMatrix to_embedding_matrix(const Matrix& m);

struct AlignmentCurvePoint {
    std::size_t epoch = 0;
    double loss = 0.0;
    std::optional<double> test_hits1;
};

struct GcnTrainResult {
    GcnParameters params;
    std::vector<AlignmentCurvePoint> curve;
};

GcnTrainResult train_alignment(const AlignmentDataset& data, const GcnConfig& config, GcnMode mode);

}  // namespace rpe

#include "rpe/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

namespace rpe {

std::string to_string(GcnMode m) { return m == GcnMode::vanilla ? "gcn" : "rpe-gcn"; }

GcnMode gcn_mode_from_string(const std::string& s) {
    if (s == "gcn" || s == "vanilla") return GcnMode::vanilla;
    if (s == "rpe-gcn" || s == "rpe") return GcnMode::rpe;
    throw Error(ErrorKind::usage, "unknown alignment model '" + s + "' (expected gcn|rpe-gcn)");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "relu";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw Error(ErrorKind::usage, "unknown activation '" + s + "'");
}

void GcnConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::usage, "alignment config: " + msg); };
    if (dim == 0) fail("dim must be >= 1");
    if (num_layers == 0) fail("num_layers must be >= 1");
    if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda must lie in (0, 1]");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
    if (!(margin >= 0.0)) fail("margin must be >= 0");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(l2_weight >= 0.0)) fail("l2_weight must be >= 0");
    if (negatives_per_positive == 0) fail("negatives_per_positive must be >= 1");
    if (negative_refresh_epochs == 0) fail("negative_refresh_epochs must be >= 1");
    if (weight_init == InitScheme::zeros) fail("zero weight init cannot train");
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

namespace {

void normalize_rows(EmbeddingTable& t) {
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto r = t.row(i);
        double n = 0.0;
        for (double x : r) n += x * x;
        n = std::sqrt(n);
        if (n > 0.0) {
            for (auto& x : r) x /= n;
        }
    }
}

Eigen::Map<const Matrix> as_matrix(const EmbeddingTable& t) {
    return {t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.width())};
}

Eigen::Map<Matrix> as_matrix(EmbeddingTable& t) {
    return {t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.width())};
}

}  // namespace

GcnParameters init_gcn_parameters(const KnowledgeGraph& source, const KnowledgeGraph& target,
                                  const GcnConfig& config) {
    GcnParameters p;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        p.weights.push_back(init_table(config.dim, config.dim, TableKind::gcn_weight, config.weight_init,
                                       derive_seed(config.seed, "init/weight/" + std::to_string(l)),
                                       config.init_scale));
    }
    const KnowledgeGraph* graphs[2] = {&source, &target};
    const char* names[2] = {"source", "target"};
    for (int g = 0; g < 2; ++g) {
        p.inputs[g].entities = init_table(graphs[g]->entity_count(), config.dim, TableKind::entity,
                                          InitScheme::uniform,
                                          derive_seed(config.seed, std::string("init/entity/") + names[g]),
                                          config.init_scale);
        p.inputs[g].prototypes = init_table(2 * graphs[g]->relation_count(), config.dim, TableKind::prototype,
                                            InitScheme::uniform,
                                            derive_seed(config.seed, std::string("init/prototype/") + names[g]),
                                            config.init_scale);
        if (config.normalize_inputs) {
            normalize_rows(p.inputs[g].entities);
            normalize_rows(p.inputs[g].prototypes);
        }
    }
    return p;
}

GcnGradients zero_like(const GcnParameters& params) {
    GcnGradients g = params;
    for (auto& w : g.weights) std::fill(w.values().begin(), w.values().end(), 0.0);
    for (auto& in : g.inputs) {
        std::fill(in.entities.values().begin(), in.entities.values().end(), 0.0);
        std::fill(in.prototypes.values().begin(), in.prototypes.values().end(), 0.0);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

Propagation::Propagation(const AugmentedGraph& graph, GcnMode mode, double lambda)
    : mode_(mode), entity_count_(graph.entity_count()) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorKind::usage, "lambda must lie in (0, 1]");
    const std::size_t ne = graph.entity_count();
    const std::size_t n = mode == GcnMode::rpe ? graph.node_count() : ne;
    const double mu = 1.0 - lambda;
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<Id> cols;
    for (Id i = 0; i < ne; ++i) {
        const auto nbrs = graph.entity_neighbors(i);
        cols.assign(nbrs.begin(), nbrs.end());
        cols.insert(std::lower_bound(cols.begin(), cols.end(), i), i);
        const double self_count = static_cast<double>(cols.size());
        if (mode == GcnMode::vanilla) {
            for (Id j : cols) entries.emplace_back(i, j, 1.0 / self_count);
            continue;
        }
        const auto protos = graph.proto_neighbors_of_entity(i);
        const double denom = lambda * self_count + mu * static_cast<double>(protos.size());
        for (Id j : cols) entries.emplace_back(i, j, lambda / denom);
        // Kept even when zero so the entity sums match the vanilla layer exactly at lambda = 1.
        for (Id p : protos) entries.emplace_back(i, p, mu / denom);
    }
    if (mode == GcnMode::rpe) {
        for (std::size_t row = 0; row < graph.prototype_count(); ++row) {
            const Id p = static_cast<Id>(ne + row);
            const auto members = graph.entity_neighbors_of_proto(p);
            const double denom = lambda * static_cast<double>(members.size()) + mu;
            for (Id j : members) entries.emplace_back(p, j, lambda / denom);
            entries.emplace_back(p, p, mu / denom);
        }
    }
    matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    matrix_.setFromTriplets(entries.begin(), entries.end());
    matrix_.makeCompressed();
}

Matrix stack_inputs(const GraphInputs& inputs, const Propagation& prop) {
    const std::size_t ne = prop.entity_count();
    if (inputs.entities.rows() != ne) throw Error(ErrorKind::numeric, "gcn: entity input rows mismatch");
    const std::size_t k = inputs.entities.width();
    Matrix x(prop.node_count(), k);
    x.topRows(ne) = as_matrix(inputs.entities);
    if (prop.mode() == GcnMode::rpe) {
        if (inputs.prototypes.rows() != prop.node_count() - ne || inputs.prototypes.width() != k) {
            throw Error(ErrorKind::numeric, "gcn: prototype input shape mismatch");
        }
        x.bottomRows(prop.node_count() - ne) = as_matrix(inputs.prototypes);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::identity: return z;
    }
    return z;
}

Matrix activation_derivative(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
        case Activation::tanh: return (1.0 - z.array().tanh().square()).matrix();
        case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
    }
    return Matrix::Ones(z.rows(), z.cols());
}

void fill_mask(Matrix& mask, Eigen::Index begin, Eigen::Index end, Rng& rng, double rate) {
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = begin; i < end; ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(i, j) = uniform01(rng) >= rate ? keep_scale : 0.0;
    }
}

// Row blocks are multiplied separately so the entity rows see the same
// kernel shapes whether or not prototype rows are present.
Matrix times_transpose(const Matrix& y, const Eigen::Map<const Matrix>& w, std::size_t ne) {
    Matrix z(y.rows(), w.rows());
    const auto np = static_cast<Eigen::Index>(y.rows()) - static_cast<Eigen::Index>(ne);
    z.topRows(ne).noalias() = y.topRows(ne) * w.transpose();
    if (np > 0) z.bottomRows(np).noalias() = y.bottomRows(np) * w.transpose();
    return z;
}

}  // namespace

HiddenStates gcn_forward(const Propagation& prop, const std::vector<EmbeddingTable>& weights,
                         const Matrix& inputs, const GcnConfig& config, DropoutStreams* dropout) {
    if (weights.empty()) throw Error(ErrorKind::numeric, "gcn: no layers");
    if (static_cast<std::size_t>(inputs.rows()) != prop.node_count()) {
        throw Error(ErrorKind::numeric, "gcn: input rows do not match the propagation operator");
    }
    const std::size_t ne = prop.entity_count();
    const std::size_t np = prop.node_count() - ne;
    const bool use_dropout = dropout != nullptr && config.dropout > 0.0;
    HiddenStates s;
    s.entity_count = ne;
    s.layers.push_back(inputs);
    for (const auto& w_table : weights) {
        const auto w = as_matrix(w_table);
        if (w.rows() != w.cols() || w.cols() != s.layers.back().cols()) {
            throw Error(ErrorKind::numeric, "gcn: weight shape does not match the hidden dimension");
        }
        Matrix y = prop.matrix() * s.layers.back();
        Matrix z = times_transpose(y, w, ne);
        Matrix h = activate(z, config.activation);
        if (use_dropout) {
            Matrix mask(h.rows(), h.cols());
            const auto split = static_cast<Eigen::Index>(ne);
            fill_mask(mask, 0, split, dropout->entities, config.dropout);
            fill_mask(mask, split, split + static_cast<Eigen::Index>(np), dropout->prototypes, config.dropout);
            h = h.cwiseProduct(mask);
            s.dropout_scale.push_back(std::move(mask));
        }
        s.propagated.push_back(std::move(y));
        s.preactivation.push_back(std::move(z));
        s.layers.push_back(std::move(h));
    }
    return s;
}

Matrix final_embeddings(const HiddenStates& states, bool aggregate_all_layers) {
    const std::size_t layers = states.layers.size() - 1;
    const auto ne = static_cast<Eigen::Index>(states.entity_count);
    if (!aggregate_all_layers) return states.layers.back().topRows(ne);
    Matrix sum = states.layers[1].topRows(ne);
    for (std::size_t l = 2; l <= layers; ++l) sum += states.layers[l].topRows(ne);
    return sum / static_cast<double>(layers);
}

Matrix gcn_backward(const Propagation& prop, const std::vector<EmbeddingTable>& weights,
                    const HiddenStates& states, const GcnConfig& config, const Matrix& d_final,
                    std::vector<EmbeddingTable>& weight_grads) {
    const std::size_t L = weights.size();
    const std::size_t ne = prop.entity_count();
    const auto np = static_cast<Eigen::Index>(prop.node_count() - ne);
    const auto k = states.layers[0].cols();
    std::vector<Matrix> d_h(L + 1, Matrix::Zero(prop.node_count(), k));
    if (config.aggregate_all_layers) {
        for (std::size_t l = 1; l <= L; ++l) d_h[l].topRows(ne) += d_final / static_cast<double>(L);
    } else {
        d_h[L].topRows(ne) += d_final;
    }
    for (std::size_t l = L; l >= 1; --l) {
        Matrix d_z = d_h[l];
        if (!states.dropout_scale.empty()) d_z = d_z.cwiseProduct(states.dropout_scale[l - 1]);
        d_z = d_z.cwiseProduct(activation_derivative(states.preactivation[l - 1], config.activation));
        const Matrix& y = states.propagated[l - 1];
        auto dw = as_matrix(weight_grads[l - 1]);
        dw.noalias() += d_z.topRows(ne).transpose() * y.topRows(ne);
        if (np > 0) dw.noalias() += d_z.bottomRows(np).transpose() * y.bottomRows(np);
        const auto w = as_matrix(weights[l - 1]);
        Matrix d_y(d_z.rows(), k);
        d_y.topRows(ne).noalias() = d_z.topRows(ne) * w;
        if (np > 0) d_y.bottomRows(np).noalias() = d_z.bottomRows(np) * w;
        d_h[l - 1] += prop.matrix().transpose() * d_y;
    }
    return d_h[0];
}

// ---------------------------------------------------------------------------
// Negatives and loss
// ---------------------------------------------------------------------------

std::vector<std::vector<Id>> mine_negatives(const Matrix& embeddings, std::span<const Id> anchors,
                                            std::size_t count) {
    const auto n = static_cast<std::size_t>(embeddings.rows());
    if (n < count + 2) {
        throw Error(ErrorKind::data, "negative mining needs more than " + std::to_string(count + 1) +
                                         " entities, graph has " + std::to_string(n));
    }
    Eigen::VectorXd norms = embeddings.rowwise().norm();
    std::vector<std::vector<Id>> out(anchors.size());
    parallel_for(anchors.size(), 1, [&](std::size_t a) {
        const Id anchor = anchors[a];
        std::vector<std::pair<double, Id>> sims;
        sims.reserve(n - 1);
        for (Id j = 0; j < n; ++j) {
            if (j == anchor) continue;
            const double denom = norms[anchor] * norms[j];
            const double sim = denom > 0.0 ? embeddings.row(anchor).dot(embeddings.row(j)) / denom : 0.0;
            sims.emplace_back(-sim, j);
        }
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(count), sims.end());
        out[a].reserve(count);
        for (std::size_t c = 0; c < count; ++c) out[a].push_back(sims[c].second);
    });
    return out;
}

NegativePairCache mine_negative_pairs(const Matrix& source, const Matrix& target,
                                      std::span<const EntityPair> train_pairs, std::size_t count,
                                      std::size_t epoch) {
    std::vector<Id> src_anchor, tgt_anchor;
    for (const auto& [i, j] : train_pairs) {
        src_anchor.push_back(i);
        tgt_anchor.push_back(j);
    }
    NegativePairCache cache;
    cache.source = mine_negatives(source, src_anchor, count);
    cache.target = mine_negatives(target, tgt_anchor, count);
    cache.epoch_stamp = epoch;
    return cache;
}

AlignmentLoss alignment_loss(std::span<const EntityPair> train_pairs, const NegativePairCache& negatives,
                             const Matrix& source, const Matrix& target, double margin) {
    AlignmentLoss out;
    out.d_source = Matrix::Zero(source.rows(), source.cols());
    out.d_target = Matrix::Zero(target.rows(), target.cols());
    if (negatives.source.size() != train_pairs.size() || negatives.target.size() != train_pairs.size()) {
        throw Error(ErrorKind::data, "negative cache does not match the training pairs");
    }
    // Unit direction of a - b (zero at zero distance).
    auto direction = [](const Eigen::RowVectorXd& diff, double dist) -> Eigen::RowVectorXd {
        return dist > 0.0 ? Eigen::RowVectorXd(diff / dist) : Eigen::RowVectorXd::Zero(diff.size());
    };
    for (std::size_t p = 0; p < train_pairs.size(); ++p) {
        const auto [i, j] = train_pairs[p];
        const Eigen::RowVectorXd pos_diff = source.row(i) - target.row(j);
        const double pos = pos_diff.norm();
        const Eigen::RowVectorXd pos_dir = direction(pos_diff, pos);
        auto hinge = [&](const Eigen::RowVectorXd& neg_diff, Id neg_src, Id neg_tgt) {
            const double neg = neg_diff.norm();
            const double term = pos + margin - neg;
            if (!(term > 0.0)) return;
            out.loss += term;
            out.d_source.row(i) += pos_dir;
            out.d_target.row(j) -= pos_dir;
            const Eigen::RowVectorXd neg_dir = direction(neg_diff, neg);
            out.d_source.row(neg_src) -= neg_dir;
            out.d_target.row(neg_tgt) += neg_dir;
        };
        for (Id ni : negatives.source[p]) hinge(source.row(ni) - target.row(j), ni, j);
        for (Id nj : negatives.target[p]) hinge(source.row(i) - target.row(nj), i, nj);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Objective and training
// ---------------------------------------------------------------------------

AlignmentModel::AlignmentModel(const AlignmentDataset& data, GcnMode m, double lambda)
    : graphs{AugmentedGraph(data.source), AugmentedGraph(data.target)},
      propagation{Propagation(graphs[0], m, lambda), Propagation(graphs[1], m, lambda)},
      mode(m) {}

GcnObjective alignment_objective(const AlignmentModel& model, const GcnParameters& params,
                                 const GcnConfig& config, std::span<const EntityPair> train_pairs,
                                 const NegativePairCache& negatives, std::array<DropoutStreams, 2>* dropout) {
    std::array<HiddenStates, 2> states;
    std::array<Matrix, 2> finals;
    for (int g = 0; g < 2; ++g) {
        states[g] = gcn_forward(model.propagation[g], params.weights,
                                stack_inputs(params.inputs[g], model.propagation[g]), config,
                                dropout ? &(*dropout)[g] : nullptr);
        finals[g] = final_embeddings(states[g], config.aggregate_all_layers);
    }
    AlignmentLoss hinge = alignment_loss(train_pairs, negatives, finals[0], finals[1], config.margin);

    GcnObjective out;
    out.grads = zero_like(params);
    out.hinge = hinge.loss;
    const Matrix* d_final[2] = {&hinge.d_source, &hinge.d_target};
    for (int g = 0; g < 2; ++g) {
        const Matrix d_in = gcn_backward(model.propagation[g], params.weights, states[g], config, *d_final[g],
                                         out.grads.weights);
        const auto ne = static_cast<Eigen::Index>(model.propagation[g].entity_count());
        as_matrix(out.grads.inputs[g].entities) = d_in.topRows(ne);
        if (model.mode == GcnMode::rpe) {
            as_matrix(out.grads.inputs[g].prototypes) = d_in.bottomRows(d_in.rows() - ne);
        }
    }
    double l2 = 0.0;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const auto w = as_matrix(params.weights[l]);
        l2 += w.squaredNorm();
        as_matrix(out.grads.weights[l]) += config.l2_weight * w;
    }
    out.loss = hinge.loss + 0.5 * config.l2_weight * l2;
    return out;
}

std::array<Matrix, 2> alignment_embeddings(const AlignmentModel& model, const GcnParameters& params,
                                           const GcnConfig& config) {
    std::array<Matrix, 2> out;
    for (int g = 0; g < 2; ++g) {
        const auto states = gcn_forward(model.propagation[g], params.weights,
                                        stack_inputs(params.inputs[g], model.propagation[g]), config);
        out[g] = final_embeddings(states, config.aggregate_all_layers);
    }
    return out;
}

EmbeddingMatrix to_embedding_matrix(const Matrix& m) {
    EmbeddingMatrix out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    }
    return out;
}

GcnTrainResult train_alignment(const AlignmentDataset& data, const GcnConfig& config, GcnMode mode) {
    config.validate();
    if (data.seeds.train.empty()) throw Error(ErrorKind::data, "alignment dataset has no training pairs");
    const AlignmentModel model(data, mode, config.lambda);

    GcnTrainResult result;
    result.params = init_gcn_parameters(*data.source, *data.target, config);
    GcnParameters& params = result.params;

    OptimizerSettings adagrad{OptimizerKind::adagrad, config.learning_rate};
    adagrad.epsilon = 1e-10;
    adagrad.initial_accumulator = 0.1;
    std::vector<OptimizerState> weight_states;
    for (const auto& w : params.weights) weight_states.push_back(make_optimizer_state(w, adagrad));
    std::array<OptimizerState, 2> entity_states{make_optimizer_state(params.inputs[0].entities, adagrad),
                                                make_optimizer_state(params.inputs[1].entities, adagrad)};
    std::array<OptimizerState, 2> proto_states{make_optimizer_state(params.inputs[0].prototypes, adagrad),
                                               make_optimizer_state(params.inputs[1].prototypes, adagrad)};

    std::array<DropoutStreams, 2> dropout{
        DropoutStreams{make_rng(config.seed, "dropout/source/entities"),
                       make_rng(config.seed, "dropout/source/prototypes")},
        DropoutStreams{make_rng(config.seed, "dropout/target/entities"),
                       make_rng(config.seed, "dropout/target/prototypes")}};

    NegativePairCache negatives;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (epoch == 1 || epoch - negatives.epoch_stamp >= config.negative_refresh_epochs) {
            const auto emb = alignment_embeddings(model, params, config);
            negatives = mine_negative_pairs(emb[0], emb[1], data.seeds.train, config.negatives_per_positive, epoch);
        }
        GcnObjective obj = alignment_objective(model, params, config, data.seeds.train, negatives, &dropout);
        if (!std::isfinite(obj.loss)) {
            throw Error(ErrorKind::numeric, "alignment training diverged at epoch " + std::to_string(epoch) +
                                                " (hinge " + std::to_string(obj.hinge) + ")");
        }
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            apply_dense_gradients(params.weights[l], obj.grads.weights[l].values(), weight_states[l]);
        }
        for (int g = 0; g < 2; ++g) {
            if (config.train_entity_inputs) {
                apply_dense_gradients(params.inputs[g].entities, obj.grads.inputs[g].entities.values(),
                                      entity_states[g]);
                if (config.normalize_inputs) normalize_rows(params.inputs[g].entities);
            }
            if (mode == GcnMode::rpe) {
                apply_dense_gradients(params.inputs[g].prototypes, obj.grads.inputs[g].prototypes.values(),
                                      proto_states[g]);
            }
        }
        result.curve.push_back({epoch, obj.loss, std::nullopt});
        if (config.eval_every > 0 && epoch % config.eval_every == 0 && !data.seeds.test.empty()) {
            const auto emb = alignment_embeddings(model, params, config);
            const auto report = alignment_report(data.seeds.test, to_embedding_matrix(emb[0]),
                                                 to_embedding_matrix(emb[1]), config.tie_policy, config.threads);
            result.curve.back().test_hits1 = report.hits.at(1);
            spdlog::debug("epoch {}: loss {:.4f}, test H@1 {:.4f}", epoch, obj.loss, report.hits.at(1));
        }
    }
    return result;
}

}  // namespace rpe

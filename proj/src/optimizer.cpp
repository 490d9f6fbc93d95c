#include "rpe/optimizer.hpp"

#include <cmath>

namespace rpe {

std::span<double> SparseGradient::row(std::size_t r) {
    auto [it, inserted] = rows_.try_emplace(r);
    if (inserted) it->second.assign(width_, 0.0);
    return it->second;
}

void SparseGradient::merge(const SparseGradient& other) {
    if (other.width_ != width_) throw Error(ErrorKind::numeric, "merging gradients of different width");
    for (const auto& [r, g] : other.rows_) {
        auto dst = row(r);
        for (std::size_t j = 0; j < width_; ++j) dst[j] += g[j];
    }
}

double SparseGradient::at(std::size_t r, std::size_t c) const {
    auto it = rows_.find(r);
    return it == rows_.end() ? 0.0 : it->second[c];
}

OptimizerState make_optimizer_state(const EmbeddingTable& table, const OptimizerSettings& settings) {
    if (!(settings.learning_rate > 0)) throw Error(ErrorKind::usage, "learning rate must be positive");
    OptimizerState state;
    state.settings = settings;
    const std::size_t n = table.values().size();
    if (settings.kind == OptimizerKind::adam) {
        state.first_moment.assign(n, 0.0);
        state.second_moment.assign(n, 0.0);
        state.row_steps.assign(table.rows(), 0);
    } else {
        state.second_moment.assign(n, settings.initial_accumulator);
    }
    return state;
}

namespace {

void update_row(std::span<double> params, std::span<const double> grad, std::size_t offset,
                std::size_t row, OptimizerState& state) {
    const auto& s = state.settings;
    if (s.kind == OptimizerKind::adam) {
        const std::uint64_t t = ++state.row_steps[row];
        const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
        for (std::size_t j = 0; j < params.size(); ++j) {
            double& m = state.first_moment[offset + j];
            double& v = state.second_moment[offset + j];
            m = s.beta1 * m + (1.0 - s.beta1) * grad[j];
            v = s.beta2 * v + (1.0 - s.beta2) * grad[j] * grad[j];
            const double m_hat = c1 > 0 ? m / c1 : m;
            const double v_hat = c2 > 0 ? v / c2 : v;
            params[j] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
        }
    } else {
        for (std::size_t j = 0; j < params.size(); ++j) {
            double& acc = state.second_moment[offset + j];
            acc += grad[j] * grad[j];
            params[j] -= s.learning_rate * grad[j] / (std::sqrt(acc) + s.epsilon);
        }
    }
}

void check_state(const EmbeddingTable& table, const OptimizerState& state) {
    if (state.second_moment.size() != table.values().size()) {
        throw Error(ErrorKind::numeric, "optimizer state shape does not match its table");
    }
}

}  // namespace

void apply_gradients(EmbeddingTable& table, const SparseGradient& grads, OptimizerState& state) {
    check_state(table, state);
    if (grads.width() != table.width()) {
        throw Error(ErrorKind::numeric, "gradient width " + std::to_string(grads.width()) +
                                            " does not match table width " + std::to_string(table.width()));
    }
    for (const auto& [r, g] : grads.rows()) {
        if (r >= table.rows()) {
            throw Error(ErrorKind::numeric, "gradient row " + std::to_string(r) + " out of range");
        }
        update_row(table.row(r), g, r * table.width(), r, state);
    }
    ++state.steps;
}

void apply_dense_gradients(EmbeddingTable& table, std::span<const double> grads, OptimizerState& state) {
    check_state(table, state);
    if (grads.size() != table.values().size()) {
        throw Error(ErrorKind::numeric, "dense gradient size does not match table");
    }
    const std::size_t w = table.width();
    for (std::size_t r = 0; r < table.rows(); ++r) {
        update_row(table.row(r), grads.subspan(r * w, w), r * w, r, state);
    }
    ++state.steps;
}

}  // namespace rpe

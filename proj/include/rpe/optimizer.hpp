#pragma once

#include "rpe/embedding.hpp"

#include <map>

namespace rpe {

// Row-sparse gradient. Rows are kept in key order so every consumer
// accumulates and applies them in a fixed order.
class SparseGradient {
public:
    explicit SparseGradient(std::size_t width = 0) : width_(width) {}

    std::size_t width() const noexcept { return width_; }
    // Returns the accumulator for `r`, zero-initialised on first touch.
    std::span<double> row(std::size_t r);
    const std::map<std::size_t, std::vector<double>>& rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }
    void clear() { rows_.clear(); }
    // Adds every row of `other` into this gradient.
    void merge(const SparseGradient& other);
    // Value at (row, col); zero when the row was never touched.
    double at(std::size_t r, std::size_t c) const;

private:
    std::size_t width_;
    std::map<std::size_t, std::vector<double>> rows_;
};

enum class OptimizerKind { adam, adagrad };

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Initial Adagrad accumulator value.
    double initial_accumulator = 0.0;
};

// Per-parameter optimizer state for one table. Adam keeps per-row step
// counters so updates on disjoint row sets commute; `steps` counts calls.
struct OptimizerState {
    OptimizerSettings settings;
    std::vector<double> first_moment;
    std::vector<double> second_moment;  // Adagrad: accumulated squared gradient
    std::vector<std::uint64_t> row_steps;
    std::uint64_t steps = 0;
};

OptimizerState make_optimizer_state(const EmbeddingTable& table, const OptimizerSettings& settings);

// Updates only the rows present in `grads`. Throws on width mismatch or
// an out-of-range row.
void apply_gradients(EmbeddingTable& table, const SparseGradient& grads, OptimizerState& state);

// Dense variant: `grads` covers every row.
void apply_dense_gradients(EmbeddingTable& table, std::span<const double> grads, OptimizerState& state);

}  // namespace rpe

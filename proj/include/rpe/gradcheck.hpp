#pragma once
// Central finite-difference gradient checker. Every analytic gradient in the
// engine is validated against it.

#include "rpe/embedding.hpp"
#include "rpe/optimizer.hpp"

#include <functional>
#include <optional>

namespace rpe {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    std::size_t coordinates_checked = 0;
    double tolerance = 0.0;

    bool passed() const noexcept { return max_rel_error < tolerance; }
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Perturbs each coordinate of the listed rows by +-h and +-2h in place,
// re-evaluates `loss`, and compares the five-point central difference
// (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h with `analytic(row, col)`.
// The table is restored afterwards. Throws Error(numeric) on a non-finite loss.
GradCheckReport finite_difference_check(const std::function<double()>& loss, EmbeddingTable& table,
                                        const std::function<double(std::size_t, std::size_t)>& analytic,
                                        std::span<const std::size_t> rows_to_check, double h,
                                        double tolerance);

GradCheckReport finite_difference_check(const std::function<double()>& loss, EmbeddingTable& table,
                                        const SparseGradient& analytic,
                                        std::span<const std::size_t> rows_to_check, double h,
                                        double tolerance);

// Combines reports from several tables: keeps the worst one and sums the counts.
GradCheckReport worst_of(std::span<const GradCheckReport> reports);

}  // namespace rpe

#include "rpe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rpe {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_difference_check(const std::function<double()>& loss, EmbeddingTable& table,
                                        const std::function<double(std::size_t, std::size_t)>& analytic,
                                        std::span<const std::size_t> rows_to_check, double h,
                                        double tolerance) {
    if (!(h > 0)) throw Error(ErrorKind::usage, "finite-difference step must be positive");
    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t r : rows_to_check) {
        if (r >= table.rows()) throw Error(ErrorKind::usage, "gradcheck row out of range");
        for (std::size_t c = 0; c < table.width(); ++c) {
            double& x = table.row(r)[c];
            const double saved = x;
            // five-point stencil: truncation O(h^4), so h can be large enough
            // that cancellation does not swamp gradients near 1e-7
            double f[4];
            const double offsets[4] = {2.0 * h, h, -h, -2.0 * h};
            for (int k = 0; k < 4; ++k) {
                x = saved + offsets[k];
                f[k] = loss();
            }
            x = saved;
            if (!std::isfinite(f[0]) || !std::isfinite(f[1]) || !std::isfinite(f[2]) || !std::isfinite(f[3])) {
                throw Error(ErrorKind::numeric, "gradcheck: non-finite loss at row " + std::to_string(r) +
                                                    ", column " + std::to_string(c));
            }
            const double numeric = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * h);
            const double a = analytic(r, c);
            const double err = relative_error(a, numeric);
            ++report.coordinates_checked;
            if (report.coordinates_checked == 1 || err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_row = r;
                report.worst_col = c;
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    return report;
}

GradCheckReport finite_difference_check(const std::function<double()>& loss, EmbeddingTable& table,
                                        const SparseGradient& analytic,
                                        std::span<const std::size_t> rows_to_check, double h,
                                        double tolerance) {
    return finite_difference_check(
        loss, table, [&analytic](std::size_t r, std::size_t c) { return analytic.at(r, c); },
        rows_to_check, h, tolerance);
}

GradCheckReport worst_of(std::span<const GradCheckReport> reports) {
    GradCheckReport out;
    std::size_t total = 0;
    bool first = true;
    for (const auto& r : reports) {
        total += r.coordinates_checked;
        if (first || r.max_rel_error > out.max_rel_error) out = r;
        first = false;
    }
    out.coordinates_checked = total;
    return out;
}

}  // namespace rpe

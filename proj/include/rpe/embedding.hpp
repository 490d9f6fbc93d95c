#pragma once
// Dense parameter tables. Complex-valued tables store 2k reals per row:
// the k real parts first, then the k imaginary parts.

#include "rpe/common.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rpe {

enum class TableKind : std::uint8_t { entity = 0, relation_phase = 1, prototype = 2, gcn_weight = 3 };

std::string to_string(TableKind kind);
TableKind table_kind_from_string(const std::string& s);

enum class InitScheme { uniform, zeros, identity };

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t rows, std::size_t dim, TableKind kind, bool complex_valued);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    // Reals per row: 2*dim for complex tables, dim otherwise.
    std::size_t width() const noexcept { return complex_ ? 2 * dim_ : dim_; }
    TableKind kind() const noexcept { return kind_; }
    bool complex_valued() const noexcept { return complex_; }

    std::span<double> row(std::size_t i) { return {values_.data() + i * width(), width()}; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * width(), width()}; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    // Throws Error(numeric) naming the first non-finite entry.
    void check_finite(const char* context) const;

    bool operator==(const EmbeddingTable&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    TableKind kind_ = TableKind::entity;
    bool complex_ = false;
    std::vector<double> values_;
};

// Entity/prototype tables: uniform in [-b, b], b = scale * 6 / sqrt(dim).
// Relation-phase tables: uniform in [-pi, pi).
// GCN weights: uniform Glorot bound scale * sqrt(6 / (2 * dim)); `identity` gives I.
EmbeddingTable init_table(std::size_t rows, std::size_t dim, TableKind kind, InitScheme scheme,
                          std::uint64_t seed, double scale = 1.0, bool complex_valued = false);

// Text form: "rows dim kind complex|real" header, then one row per line.
void save_table_text(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_table_text(const std::filesystem::path& path);

// Binary form: 16-byte header ("RPEB", u32 rows, u32 dim, u8 kind, u8 complex,
// 2 reserved bytes) followed by little-endian float64 values, row-major.
void save_table_binary(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_table_binary(const std::filesystem::path& path);

}  // namespace rpe

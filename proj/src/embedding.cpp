#include "rpe/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace rpe {

std::string to_string(TableKind kind) {
    switch (kind) {
        case TableKind::entity: return "entity";
        case TableKind::relation_phase: return "relation-phase";
        case TableKind::prototype: return "prototype";
        case TableKind::gcn_weight: return "gcn-weight";
    }
    return "unknown";
}

TableKind table_kind_from_string(const std::string& s) {
    if (s == "entity") return TableKind::entity;
    if (s == "relation-phase") return TableKind::relation_phase;
    if (s == "prototype") return TableKind::prototype;
    if (s == "gcn-weight") return TableKind::gcn_weight;
    throw Error(ErrorKind::data, "unknown table kind '" + s + "'");
}

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim, TableKind kind, bool complex_valued)
    : rows_(rows), dim_(dim), kind_(kind), complex_(complex_valued) {
    if (rows == 0 || dim == 0) throw Error(ErrorKind::usage, "embedding table needs rows > 0 and dim > 0");
    values_.assign(rows * width(), 0.0);
}

void EmbeddingTable::check_finite(const char* context) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw Error(ErrorKind::numeric, std::string(context) + ": non-finite value in " +
                                                to_string(kind_) + " table at row " +
                                                std::to_string(i / width()) + ", column " +
                                                std::to_string(i % width()));
        }
    }
}

EmbeddingTable init_table(std::size_t rows, std::size_t dim, TableKind kind, InitScheme scheme,
                          std::uint64_t seed, double scale, bool complex_valued) {
    EmbeddingTable table(rows, dim, kind, complex_valued);
    auto& v = table.values();
    if (scheme == InitScheme::zeros) return table;
    if (scheme == InitScheme::identity) {
        if (kind != TableKind::gcn_weight || rows != dim) {
            throw Error(ErrorKind::usage, "identity init needs a square gcn-weight table");
        }
        for (std::size_t i = 0; i < rows; ++i) table.row(i)[i] = 1.0;
        return table;
    }
    Rng rng(seed);
    if (kind == TableKind::relation_phase) {
        for (auto& x : v) {
            x = -std::numbers::pi + 2.0 * std::numbers::pi * uniform01(rng);
            if (x >= std::numbers::pi) x = -std::numbers::pi;
        }
        return table;
    }
    const double bound = kind == TableKind::gcn_weight
                             ? scale * std::sqrt(6.0 / (2.0 * static_cast<double>(dim)))
                             : scale * 6.0 / std::sqrt(static_cast<double>(dim));
    for (auto& x : v) x = -bound + 2.0 * bound * uniform01(rng);
    return table;
}

// ---------------------------------------------------------------------------
// Text / binary I/O
// ---------------------------------------------------------------------------

void save_table_text(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << table.rows() << ' ' << table.dim() << ' ' << to_string(table.kind()) << ' '
        << (table.complex_valued() ? "complex" : "real") << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < table.rows(); ++i) {
        auto r = table.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out << ' ';
            out << r[j];
        }
        out << '\n';
    }
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

EmbeddingTable load_table_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::size_t rows = 0, dim = 0;
    std::string kind, field;
    if (!(in >> rows >> dim >> kind >> field) || (field != "complex" && field != "real")) {
        throw Error(ErrorKind::data, path.string() + ": malformed embedding header");
    }
    EmbeddingTable table(rows, dim, table_kind_from_string(kind), field == "complex");
    for (auto& x : table.values()) {
        if (!(in >> x)) throw Error(ErrorKind::data, path.string() + ": truncated embedding body");
    }
    return table;
}

namespace {

constexpr char kMagic[4] = {'R', 'P', 'E', 'B'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_table_binary(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(table.rows()));
    put_u32(out, static_cast<std::uint32_t>(table.dim()));
    const char tail[4] = {static_cast<char>(table.kind()), static_cast<char>(table.complex_valued()), 0, 0};
    out.write(tail, 4);
    for (double x : table.values()) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

EmbeddingTable load_table_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), 16) || std::memcmp(header, kMagic, 4) != 0) {
        throw Error(ErrorKind::data, path.string() + ": not a binary embedding file");
    }
    const std::uint32_t rows = get_u32(header + 4);
    const std::uint32_t dim = get_u32(header + 8);
    if (header[12] > static_cast<unsigned char>(TableKind::gcn_weight) || header[13] > 1) {
        throw Error(ErrorKind::data, path.string() + ": bad kind/complex flags");
    }
    EmbeddingTable table(rows, dim, static_cast<TableKind>(header[12]), header[13] == 1);
    for (auto& x : table.values()) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) {
            throw Error(ErrorKind::data, path.string() + ": truncated embedding body");
        }
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        x = std::bit_cast<double>(bits);
    }
    return table;
}

}  // namespace rpe

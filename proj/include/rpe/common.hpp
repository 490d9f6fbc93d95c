#pragma once
// Shared vocabulary of the engine: ids, triples, errors, seeding, and a
// small deterministic parallel_for.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rpe {

using Id = std::uint32_t;

struct Triple {
    Id head = 0;
    Id relation = 0;
    Id tail = 0;

    auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t x = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
        x ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ull;
        x ^= x >> 31;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 29;
        return static_cast<std::size_t>(x);
    }
};

// Which slot of a triple a query asks for or a negative replaces.
enum class Side { head, tail };

// Error categories map onto CLI exit codes.
enum class ErrorKind { usage = 2, io = 3, data = 4, numeric = 5, fingerprint = 6 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

using Rng = std::mt19937_64;

// 64-bit FNV-1a; used for content fingerprints and for keying seed streams.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent seed for a named component from a master seed.
// Streams are keyed by name, so adding a component never shifts another's stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);

inline Rng make_rng(std::uint64_t master, std::string_view component) {
    return Rng(derive_seed(master, component));
}

// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

double standard_normal(Rng& rng);

// Runs fn(i) for i in [0, n) on up to `threads` workers with static
// contiguous chunking. Callers write to disjoint slots only.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// Numerically stable -log(sigmoid(x)).
double neg_log_sigmoid(double x);
double sigmoid(double x);

}  // namespace rpe

#pragma once
// Numerical checks of the prototype-area geometry. An area is the ball
// around a prototype whose radius is the largest member distance; with
// aggregation the members are lambda e + (1 - lambda) P, so radii shrink
// by exactly lambda.

#include "rpe/evaluator.hpp"
#include "rpe/kg_store.hpp"
#include "rpe/rotate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rpe {

struct PrototypeArea {
    Id relation = 0;
    Side side = Side::head;
    std::vector<double> center;
    double radius = 0.0;
    std::vector<Id> members;
    std::vector<std::vector<double>> points;  // member embeddings, parallel to `members`

    std::string label() const;
};

// Radius = max member distance; throws Error(data) on an empty member set.
PrototypeArea make_area(Id relation, Side side, std::vector<double> center, std::vector<Id> members,
                        std::vector<std::vector<double>> points);

// Areas for every relation (head area at 2r, tail at 2r + 1). `prototypes`
// holds 2|R| rows in the same order. lambda = 1 uses raw member embeddings.
std::vector<PrototypeArea> build_areas(const EmbeddingMatrix& entities, const EmbeddingMatrix& prototypes,
                                       const KnowledgeGraph& kg, double lambda);
std::vector<PrototypeArea> build_areas(const RotateTables& tables, const KnowledgeGraph& kg, double lambda);

// max(0, |c_a - c_b| - r_a - r_b)
double area_distance(const PrototypeArea& a, const PrototypeArea& b);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct TheoryEntry {
    std::string check;    // lemma1, thm1, thm2, thm3, thm4
    std::string subject;  // e.g. relation or area label
    bool premise = false;
    std::optional<bool> conclusion;  // only set when the premise holds
    double margin = 0.0;             // worst slack of the conclusion (premise slack if it failed)
    double assumption_residual = 0.0;
    std::string counterexample;      // empty unless the conclusion failed

    bool passed() const { return !premise || conclusion.value_or(false); }
};

struct TheoryReport {
    std::vector<TheoryEntry> entries;
    std::optional<double> min_prototype_distance;

    void append(const TheoryReport& other);
    std::size_t premise_count() const;
    std::size_t violation_count() const;
    bool all_passed() const { return violation_count() == 0; }
    std::string to_json() const;
    std::string to_text() const;
};

struct TheoryTolerances {
    double assumption = 1e-9;  // |P_H o r - P_T|
    double exact = 1e-9;       // lemma inequalities
    double sampled = 1e-6;     // sampled strict orderings
};

// Score bounds around the prototypes: with P_H o r = P_T,
//   f >= -|h - P_H| - |t - P_T|,  f <= |t - P_T| - |h - P_H|,  f <= |h - P_H| - |t - P_T|.
TheoryEntry check_lemma1(std::span<const double> h, std::span<const double> t, std::span<const double> phase,
                         std::span<const double> p_head, std::span<const double> p_tail, double tol = 1e-9);

// Points drawn uniformly from the ball; `grid` uses a polar grid (2 reals only).
std::vector<std::vector<double>> ball_samples(std::span<const double> center, double radius, std::size_t count,
                                              Rng& rng, bool grid = false);

enum class CompletionTheorem { head_side, tail_side };

// head_side: every h1 in C_H(r) outscores every h2 from another area, for
// each t in C_T(r), provided d(C, C_H(r)) > 2 R_T(r) for all other areas C.
// tail_side is the mirror statement. Areas geometrically identical to the
// tested one count as the same element of the area set.
TheoryEntry check_theorem_completion(const std::vector<PrototypeArea>& areas, Id relation,
                                     std::span<const double> phase, std::size_t samples, Rng& rng,
                                     CompletionTheorem which, const TheoryTolerances& tol = {},
                                     bool grid = false);

// Every relation, both theorems.
TheoryReport check_completion_theorems(const std::vector<PrototypeArea>& areas, const EmbeddingTable& phases,
                                       std::size_t samples, Rng& rng, const TheoryTolerances& tol = {},
                                       bool grid = false);

// Alignment analogue for corresponding areas (source index, target index):
// entities near the source area retrieve target-area entities before any
// entity of another target area, and vice versa.
TheoryReport check_theorem_alignment(const std::vector<PrototypeArea>& source,
                                     const std::vector<PrototypeArea>& target,
                                     std::span<const std::pair<std::size_t, std::size_t>> correspondence,
                                     std::size_t samples, Rng& rng, const TheoryTolerances& tol = {});

// Whether both completion premises hold for every relation when the areas
// are rebuilt at `lambda`.
bool completion_premises_hold(const RotateTables& tables, const KnowledgeGraph& kg, double lambda,
                              const TheoryTolerances& tol = {});

// Largest grid value at which all premises hold (nullopt when none does).
std::optional<double> premise_lambda_threshold(const RotateTables& tables, const KnowledgeGraph& kg,
                                               std::span<const double> lambda_grid,
                                               const TheoryTolerances& tol = {});

// Smallest distance between two distinct prototype embeddings.
double min_prototype_distance(const EmbeddingTable& prototypes);

}  // namespace rpe

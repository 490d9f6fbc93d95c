#include "rpe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rpe {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Rotates a complex vector (re block, im block) by the phases.
std::vector<double> rotate(std::span<const double> x, std::span<const double> phase) {
    const std::size_t k = phase.size();
    std::vector<double> out(2 * k);
    for (std::size_t i = 0; i < k; ++i) {
        const double c = std::cos(phase[i]), s = std::sin(phase[i]);
        out[i] = x[i] * c - x[k + i] * s;
        out[k + i] = x[i] * s + x[k + i] * c;
    }
    return out;
}

struct TaggedPoint {
    std::vector<double> x;
    std::string tag;
};

std::vector<TaggedPoint> area_points(const PrototypeArea& a, std::size_t samples, Rng& rng, bool grid) {
    std::vector<TaggedPoint> pts;
    for (std::size_t m = 0; m < a.members.size(); ++m) {
        pts.push_back({a.points[m], a.label() + " member " + std::to_string(a.members[m])});
    }
    auto drawn = ball_samples(a.center, a.radius, samples, rng, grid);
    for (std::size_t s = 0; s < drawn.size(); ++s) {
        pts.push_back({std::move(drawn[s]), a.label() + " sample " + std::to_string(s)});
    }
    return pts;
}

bool same_area(const PrototypeArea& a, const PrototypeArea& b, double tol) {
    return distance(a.center, b.center) <= tol && std::abs(a.radius - b.radius) <= tol;
}

// min over areas C other than `self` of d(C, self) - required; +inf when there are none.
double premise_slack(const std::vector<PrototypeArea>& areas, const PrototypeArea& self, double required,
                     double tol) {
    double slack = std::numeric_limits<double>::infinity();
    for (const auto& c : areas) {
        if (&c == &self || same_area(c, self, tol)) continue;
        slack = std::min(slack, area_distance(c, self) - required);
    }
    return slack;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

std::size_t area_index(Id relation, Side side) { return 2 * static_cast<std::size_t>(relation) + (side == Side::tail); }

}  // namespace

std::string PrototypeArea::label() const { return Category{relation, side}.label(); }

PrototypeArea make_area(Id relation, Side side, std::vector<double> center, std::vector<Id> members,
                        std::vector<std::vector<double>> points) {
    if (members.empty() || members.size() != points.size()) {
        throw Error(ErrorKind::data, "prototype area " + Category{relation, side}.label() + " has no members");
    }
    PrototypeArea a{relation, side, std::move(center), 0.0, std::move(members), std::move(points)};
    for (const auto& p : a.points) {
        if (p.size() != a.center.size()) throw Error(ErrorKind::numeric, "prototype area: dimension mismatch");
        a.radius = std::max(a.radius, distance(p, a.center));
    }
    return a;
}

std::vector<PrototypeArea> build_areas(const EmbeddingMatrix& entities, const EmbeddingMatrix& prototypes,
                                       const KnowledgeGraph& kg, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorKind::usage, "lambda must lie in (0, 1]");
    if (prototypes.size() != 2 * kg.relation_count() || entities.size() != kg.entity_count()) {
        throw Error(ErrorKind::data, "build_areas: table sizes do not match the graph");
    }
    std::vector<std::set<Id>> members(2 * kg.relation_count());
    for (const auto& t : kg.triples()) {
        members[area_index(t.relation, Side::head)].insert(t.head);
        members[area_index(t.relation, Side::tail)].insert(t.tail);
    }
    std::vector<PrototypeArea> areas;
    areas.reserve(members.size());
    for (std::size_t a = 0; a < members.size(); ++a) {
        const Id r = static_cast<Id>(a / 2);
        const Side side = a % 2 == 0 ? Side::head : Side::tail;
        if (members[a].empty()) {
            throw Error(ErrorKind::data, "relation " + kg.relations().label(r) + " has no triples");
        }
        std::vector<Id> ids(members[a].begin(), members[a].end());
        std::vector<std::vector<double>> pts;
        for (Id e : ids) {
            pts.push_back(lambda == 1.0 ? entities[e] : aggregate_with_prototype(entities[e], prototypes[a], lambda));
        }
        areas.push_back(make_area(r, side, prototypes[a], std::move(ids), std::move(pts)));
    }
    return areas;
}

std::vector<PrototypeArea> build_areas(const RotateTables& tables, const KnowledgeGraph& kg, double lambda) {
    auto rows = [](const EmbeddingTable& t) {
        EmbeddingMatrix m(t.rows());
        for (std::size_t i = 0; i < t.rows(); ++i) m[i].assign(t.row(i).begin(), t.row(i).end());
        return m;
    };
    return build_areas(rows(tables.entities), rows(tables.prototypes), kg, lambda);
}

double area_distance(const PrototypeArea& a, const PrototypeArea& b) {
    return std::max(0.0, distance(a.center, b.center) - (a.radius + b.radius));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void TheoryReport::append(const TheoryReport& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    if (other.min_prototype_distance) min_prototype_distance = other.min_prototype_distance;
}

std::size_t TheoryReport::premise_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.premise; }));
}

std::size_t TheoryReport::violation_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const auto& e) { return !e.passed(); }));
}

std::string TheoryReport::to_json() const {
    nlohmann::ordered_json j;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json row;
        row["check"] = e.check;
        row["subject"] = e.subject;
        row["premise"] = e.premise;
        row["conclusion"] = e.conclusion ? nlohmann::ordered_json(*e.conclusion) : nlohmann::ordered_json();
        row["margin"] = std::isfinite(e.margin) ? nlohmann::ordered_json(e.margin) : nlohmann::ordered_json();
        row["assumption_residual"] = e.assumption_residual;
        if (!e.counterexample.empty()) row["counterexample"] = e.counterexample;
        j["entries"].push_back(row);
    }
    j["premises_held"] = premise_count();
    j["violations"] = violation_count();
    j["min_prototype_distance"] =
        min_prototype_distance ? nlohmann::ordered_json(*min_prototype_distance) : nlohmann::ordered_json();
    return j.dump(2);
}

std::string TheoryReport::to_text() const {
    std::ostringstream os;
    os << "check    subject       premise  conclusion  margin\n";
    for (const auto& e : entries) {
        std::string c = e.conclusion ? (*e.conclusion ? "holds" : "VIOLATED") : "-";
        os.width(9);
        os << std::left << e.check;
        os.width(14);
        os << e.subject;
        os.width(9);
        os << (e.premise ? "yes" : "no");
        os.width(12);
        os << c << fmt(e.margin) << '\n';
        if (!e.counterexample.empty()) os << "    counterexample: " << e.counterexample << '\n';
    }
    os << "premises held: " << premise_count() << "/" << entries.size() << ", violations: " << violation_count()
       << '\n';
    if (min_prototype_distance) os << "min prototype distance: " << fmt(*min_prototype_distance) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Lemma
// ---------------------------------------------------------------------------

TheoryEntry check_lemma1(std::span<const double> h, std::span<const double> t, std::span<const double> phase,
                         std::span<const double> p_head, std::span<const double> p_tail, double tol) {
    TheoryEntry e;
    e.check = "lemma1";
    e.assumption_residual = distance(rotate(p_head, phase), p_tail);
    e.premise = e.assumption_residual <= tol;
    const double f = rotate_score(h, phase, t);
    const double dh = distance(h, p_head), dt = distance(t, p_tail);
    const double s1 = f - (-dh - dt);
    const double s2 = (dt - dh) - f;
    const double s3 = (dh - dt) - f;
    e.margin = std::min({s1, s2, s3});
    if (!e.premise) return e;
    e.conclusion = e.margin >= -tol;
    if (!*e.conclusion) {
        e.counterexample = "f=" + fmt(f) + " |h-P_H|=" + fmt(dh) + " |t-P_T|=" + fmt(dt) + " slacks=(" + fmt(s1) +
                           ", " + fmt(s2) + ", " + fmt(s3) + ")";
    }
    return e;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> ball_samples(std::span<const double> center, double radius, std::size_t count,
                                              Rng& rng, bool grid) {
    const std::size_t d = center.size();
    std::vector<std::vector<double>> out;
    out.reserve(count);
    if (grid) {
        if (d != 2) throw Error(ErrorKind::usage, "grid sampling needs a 2-dimensional ball");
        const auto angles = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
        const std::size_t rings = angles == 0 ? 0 : (count + angles - 1) / angles;
        for (std::size_t i = 0; i < count; ++i) {
            const double rho = radius * static_cast<double>(i / angles + 1) / static_cast<double>(rings);
            const double theta = 2.0 * std::numbers::pi * static_cast<double>(i % angles) / static_cast<double>(angles);
            out.push_back({center[0] + rho * std::cos(theta), center[1] + rho * std::sin(theta)});
        }
        return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> dir(d);
        double n = 0.0;
        while (n == 0.0) {
            for (auto& x : dir) x = standard_normal(rng);
            n = 0.0;
            for (double x : dir) n += x * x;
            n = std::sqrt(n);
        }
        const double rho = radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(d));
        std::vector<double> p(d);
        for (std::size_t j = 0; j < d; ++j) p[j] = center[j] + rho * dir[j] / n;
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Completion theorems
// ---------------------------------------------------------------------------

TheoryEntry check_theorem_completion(const std::vector<PrototypeArea>& areas, Id relation,
                                     std::span<const double> phase, std::size_t samples, Rng& rng,
                                     CompletionTheorem which, const TheoryTolerances& tol, bool grid) {
    const std::size_t hi = area_index(relation, Side::head), ti = area_index(relation, Side::tail);
    if (ti >= areas.size()) throw Error(ErrorKind::data, "no areas for relation " + std::to_string(relation));
    const PrototypeArea& head = areas[hi];
    const PrototypeArea& tail = areas[ti];
    const bool head_side = which == CompletionTheorem::head_side;
    // The slot that varies, and the slot held fixed.
    const PrototypeArea& own = head_side ? head : tail;
    const PrototypeArea& fixed = head_side ? tail : head;

    TheoryEntry e;
    e.check = head_side ? "thm1" : "thm2";
    e.subject = "relation " + std::to_string(relation);
    e.assumption_residual = distance(rotate(head.center, phase), tail.center);
    const double slack = premise_slack(areas, own, 2.0 * fixed.radius, tol.assumption);
    e.premise = e.assumption_residual <= tol.assumption && slack > 0.0;
    if (!e.premise) {
        e.margin = slack;
        return e;
    }

    const auto fixed_pts = area_points(fixed, samples, rng, grid);
    const auto own_pts = area_points(own, samples, rng, grid);
    std::vector<TaggedPoint> other_pts;
    for (const auto& c : areas) {
        if (&c == &own || same_area(c, own, tol.assumption)) continue;
        auto pts = area_points(c, samples, rng, grid);
        other_pts.insert(other_pts.end(), std::make_move_iterator(pts.begin()), std::make_move_iterator(pts.end()));
    }
    auto score = [&](const std::vector<double>& varying, const std::vector<double>& held) {
        return head_side ? rotate_score(varying, phase, held) : rotate_score(held, phase, varying);
    };

    e.margin = std::numeric_limits<double>::infinity();
    for (const auto& f : fixed_pts) {
        std::size_t worst_in = 0, worst_out = 0;
        double min_in = std::numeric_limits<double>::infinity();
        double max_out = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < own_pts.size(); ++i) {
            const double s = score(own_pts[i].x, f.x);
            if (s < min_in) min_in = s, worst_in = i;
        }
        for (std::size_t i = 0; i < other_pts.size(); ++i) {
            const double s = score(other_pts[i].x, f.x);
            if (s > max_out) max_out = s, worst_out = i;
        }
        const double m = min_in - max_out;
        if (m < e.margin) {
            e.margin = m;
            if (m <= -tol.sampled) {
                e.counterexample = "fixed " + f.tag + ": " + own_pts[worst_in].tag + " scores " + fmt(min_in) +
                                   " <= " + other_pts[worst_out].tag + " scores " + fmt(max_out);
            }
        }
    }
    e.conclusion = e.margin > -tol.sampled;
    if (*e.conclusion) e.counterexample.clear();
    return e;
}

TheoryReport check_completion_theorems(const std::vector<PrototypeArea>& areas, const EmbeddingTable& phases,
                                       std::size_t samples, Rng& rng, const TheoryTolerances& tol, bool grid) {
    TheoryReport report;
    for (Id r = 0; r < phases.rows(); ++r) {
        for (auto which : {CompletionTheorem::head_side, CompletionTheorem::tail_side}) {
            report.entries.push_back(check_theorem_completion(areas, r, phases.row(r), samples, rng, which, tol, grid));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Alignment theorems
// ---------------------------------------------------------------------------

namespace {

TheoryEntry alignment_entry(const PrototypeArea& query_area, const std::vector<PrototypeArea>& answer_areas,
                            std::size_t answer_index, std::size_t samples, Rng& rng, const TheoryTolerances& tol,
                            const std::string& check) {
    const PrototypeArea& answer = answer_areas[answer_index];
    TheoryEntry e;
    e.check = check;
    e.subject = query_area.label() + "~" + answer.label();
    e.assumption_residual =
        std::max(distance(query_area.center, answer.center), std::abs(query_area.radius - answer.radius));
    const double slack = premise_slack(answer_areas, answer, 2.0 * answer.radius, tol.assumption);
    e.premise = e.assumption_residual <= tol.assumption && slack > 0.0;
    if (!e.premise) {
        e.margin = slack;
        return e;
    }
    const auto query_pts = area_points(query_area, samples, rng, false);
    const auto in_pts = area_points(answer, samples, rng, false);
    std::vector<TaggedPoint> out_pts;
    for (const auto& c : answer_areas) {
        if (&c == &answer || same_area(c, answer, tol.assumption)) continue;
        auto pts = area_points(c, samples, rng, false);
        out_pts.insert(out_pts.end(), std::make_move_iterator(pts.begin()), std::make_move_iterator(pts.end()));
    }
    e.margin = std::numeric_limits<double>::infinity();
    for (const auto& q : query_pts) {
        double far_in = 0.0, near_out = std::numeric_limits<double>::infinity();
        std::size_t wi = 0, wo = 0;
        for (std::size_t i = 0; i < in_pts.size(); ++i) {
            const double d = distance(q.x, in_pts[i].x);
            if (d > far_in) far_in = d, wi = i;
        }
        for (std::size_t i = 0; i < out_pts.size(); ++i) {
            const double d = distance(q.x, out_pts[i].x);
            if (d < near_out) near_out = d, wo = i;
        }
        // Scores are negated distances.
        const double m = near_out - far_in;
        if (m < e.margin) {
            e.margin = m;
            if (m <= -tol.sampled && !in_pts.empty() && !out_pts.empty()) {
                e.counterexample = "query " + q.tag + ": " + in_pts[wi].tag + " at " + fmt(far_in) + " vs " +
                                   out_pts[wo].tag + " at " + fmt(near_out);
            }
        }
    }
    e.conclusion = e.margin > -tol.sampled;
    if (*e.conclusion) e.counterexample.clear();
    return e;
}

}  // namespace

TheoryReport check_theorem_alignment(const std::vector<PrototypeArea>& source,
                                     const std::vector<PrototypeArea>& target,
                                     std::span<const std::pair<std::size_t, std::size_t>> correspondence,
                                     std::size_t samples, Rng& rng, const TheoryTolerances& tol) {
    TheoryReport report;
    for (const auto& [s, t] : correspondence) {
        if (s >= source.size() || t >= target.size()) throw Error(ErrorKind::data, "area correspondence out of range");
        report.entries.push_back(alignment_entry(source[s], target, t, samples, rng, tol, "thm3"));
        report.entries.push_back(alignment_entry(target[t], source, s, samples, rng, tol, "thm4"));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Lambda thresholds
// ---------------------------------------------------------------------------

bool completion_premises_hold(const RotateTables& tables, const KnowledgeGraph& kg, double lambda,
                              const TheoryTolerances& tol) {
    const auto areas = build_areas(tables, kg, lambda);
    for (Id r = 0; r < kg.relation_count(); ++r) {
        const auto& head = areas[area_index(r, Side::head)];
        const auto& tail = areas[area_index(r, Side::tail)];
        if (distance(rotate(head.center, tables.relations.row(r)), tail.center) > tol.assumption) return false;
        if (!(premise_slack(areas, head, 2.0 * tail.radius, tol.assumption) > 0.0)) return false;
        if (!(premise_slack(areas, tail, 2.0 * head.radius, tol.assumption) > 0.0)) return false;
    }
    return true;
}

std::optional<double> premise_lambda_threshold(const RotateTables& tables, const KnowledgeGraph& kg,
                                               std::span<const double> lambda_grid, const TheoryTolerances& tol) {
    std::optional<double> best;
    for (double lambda : lambda_grid) {
        if (completion_premises_hold(tables, kg, lambda, tol) && (!best || lambda > *best)) best = lambda;
    }
    return best;
}

double min_prototype_distance(const EmbeddingTable& prototypes) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prototypes.rows(); ++i) {
        for (std::size_t j = i + 1; j < prototypes.rows(); ++j) {
            best = std::min(best, distance(prototypes.row(i), prototypes.row(j)));
        }
    }
    return best;
}

}  // namespace rpe

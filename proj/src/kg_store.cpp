#include "rpe/kg_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"

namespace rpe {

// ---------------------------------------------------------------------------
// Vocabulary / builder
// ---------------------------------------------------------------------------

Id Vocabulary::intern(std::string_view label) {
    auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    const Id id = static_cast<Id>(labels_.size());
    labels_.emplace_back(label);
    index_.emplace(labels_.back(), id);
    return id;
}

std::optional<Id> Vocabulary::find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::label(Id id) const {
    if (id >= labels_.size()) {
        throw Error(ErrorKind::data, "vocabulary id " + std::to_string(id) + " out of range");
    }
    return labels_[id];
}

KnowledgeGraphBuilder::KnowledgeGraphBuilder(std::string name) { graph_.name_ = std::move(name); }

bool KnowledgeGraphBuilder::add(std::string_view head, std::string_view relation,
                                std::string_view tail) {
    const Id h = entity(head);
    const Id r = this->relation(relation);
    const Id t = entity(tail);
    return add(Triple{h, r, t});
}

bool KnowledgeGraphBuilder::add(const Triple& ids) {
    if (ids.head >= graph_.entities_.size() || ids.tail >= graph_.entities_.size() ||
        ids.relation >= graph_.relations_.size()) {
        throw Error(ErrorKind::data, "triple references an id outside the vocabulary");
    }
    if (!graph_.triple_set_.insert(ids).second) {
        ++graph_.dropped_duplicates_;
        return false;
    }
    graph_.triples_.push_back(ids);
    return true;
}

void KnowledgeGraphBuilder::reserve_numeric_entities(std::size_t count) {
    while (graph_.entities_.size() < count) {
        graph_.entities_.intern(std::to_string(graph_.entities_.size()));
    }
}

void KnowledgeGraphBuilder::reserve_numeric_relations(std::size_t count) {
    while (graph_.relations_.size() < count) {
        graph_.relations_.intern(std::to_string(graph_.relations_.size()));
    }
}

KnowledgeGraph KnowledgeGraphBuilder::build() && { return std::move(graph_); }

// ---------------------------------------------------------------------------
// TSV ingestion
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim_eol(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
    return s;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

Id parse_id(std::string_view token, const std::filesystem::path& path, std::size_t line_no) {
    Id value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw Error(ErrorKind::data, path.string() + ":" + std::to_string(line_no) +
                                         ": expected an integer id, got '" + std::string(token) + "'");
    }
    return value;
}

struct RawLine {
    std::size_t line_no;
    std::string_view head, relation, tail;
};

std::vector<RawLine> read_triple_lines(const std::filesystem::path& path, const TripleFormat& format,
                                       std::string& storage) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open triple file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    storage = buffer.str();

    std::vector<RawLine> lines;
    std::size_t line_no = 0;
    std::string_view rest(storage);
    while (!rest.empty()) {
        const std::size_t nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        ++line_no;
        line = trim_eol(line);
        if (is_blank(line)) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3 || std::any_of(fields.begin(), fields.end(),
                                              [](std::string_view f) { return f.empty(); })) {
            throw Error(ErrorKind::data, path.string() + ":" + std::to_string(line_no) +
                                             ": expected 3 tab-separated fields, found " +
                                             std::to_string(fields.size()));
        }
        if (format.order == ColumnOrder::head_relation_tail) {
            lines.push_back({line_no, fields[0], fields[1], fields[2]});
        } else {
            lines.push_back({line_no, fields[0], fields[2], fields[1]});
        }
    }
    if (lines.empty()) throw Error(ErrorKind::data, "triple file " + path.string() + " is empty");
    return lines;
}

}  // namespace

std::vector<Triple> ingest_into(KnowledgeGraphBuilder& builder, const std::filesystem::path& path,
                                const TripleFormat& format, bool add_to_graph) {
    std::string storage;
    const auto lines = read_triple_lines(path, format, storage);

    std::vector<Triple> parsed;
    parsed.reserve(lines.size());
    std::unordered_set<Triple, TripleHash> seen;
    std::size_t duplicates = 0;
    for (const auto& raw : lines) {
        Triple t;
        if (format.fields == FieldKind::ids) {
            t.head = parse_id(raw.head, path, raw.line_no);
            t.relation = parse_id(raw.relation, path, raw.line_no);
            t.tail = parse_id(raw.tail, path, raw.line_no);
            builder.reserve_numeric_entities(std::max(t.head, t.tail) + std::size_t{1});
            builder.reserve_numeric_relations(t.relation + std::size_t{1});
        } else {
            t.head = builder.entity(raw.head);
            t.relation = builder.relation(raw.relation);
            t.tail = builder.entity(raw.tail);
        }
        if (!seen.insert(t).second) {
            ++duplicates;
            if (add_to_graph) builder.add(t);  // counted as a dropped duplicate
            continue;
        }
        parsed.push_back(t);
        if (add_to_graph) builder.add(t);
    }
    if (duplicates > 0) {
        spdlog::warn("{}: dropped {} duplicate triple line(s)", path.string(), duplicates);
    }
    return parsed;
}

KnowledgeGraph ingest_triples(const std::filesystem::path& path, const TripleFormat& format,
                              std::string name) {
    KnowledgeGraphBuilder builder(name.empty() ? path.stem().string() : std::move(name));
    ingest_into(builder, path, format, /*add_to_graph=*/true);
    return std::move(builder).build();
}

void write_triples(const KnowledgeGraph& kg, std::span<const Triple> triples,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (const auto& t : triples) {
        out << kg.entities().label(t.head) << '\t' << kg.relations().label(t.relation) << '\t'
            << kg.entities().label(t.tail) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

Adjacency::Adjacency(std::vector<std::vector<Id>> lists) {
    offsets_.assign(1, 0);
    offsets_.reserve(lists.size() + 1);
    std::size_t total = 0;
    for (const auto& l : lists) total += l.size();
    items_.reserve(total);
    for (auto& l : lists) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
        items_.insert(items_.end(), l.begin(), l.end());
        offsets_.push_back(items_.size());
    }
}

AugmentedGraph::AugmentedGraph(std::shared_ptr<const KnowledgeGraph> base) : base_(std::move(base)) {
    if (!base_ || base_->triple_count() == 0) {
        throw Error(ErrorKind::data, "cannot augment an empty knowledge graph");
    }
    const std::size_t n = base_->entity_count();
    std::vector<std::vector<Id>> neighbors(n);
    std::vector<std::vector<Id>> protos(n);
    std::vector<std::vector<Id>> members(prototype_count());
    for (const auto& t : base_->triples()) {
        if (t.head != t.tail) {
            neighbors[t.head].push_back(t.tail);
            neighbors[t.tail].push_back(t.head);
        }
        const Id ph = proto_head_of(t.relation);
        const Id pt = proto_tail_of(t.relation);
        protos[t.head].push_back(ph);
        protos[t.tail].push_back(pt);
        members[prototype_row(ph)].push_back(t.head);
        members[prototype_row(pt)].push_back(t.tail);
    }
    entity_neighbors_ = Adjacency(std::move(neighbors));
    proto_of_entity_ = Adjacency(std::move(protos));
    entities_of_proto_ = Adjacency(std::move(members));
}

AugmentedGraph augment_with_prototypes(std::shared_ptr<const KnowledgeGraph> kg) {
    return AugmentedGraph(std::move(kg));
}

std::size_t degree_of(const KnowledgeGraph& kg, Id entity) {
    if (entity >= kg.entity_count()) {
        throw Error(ErrorKind::data, "degree_of: entity id " + std::to_string(entity) + " out of range");
    }
    std::set<Id> nbrs;
    for (const auto& t : kg.triples()) {
        if (t.head == t.tail) continue;
        if (t.head == entity) nbrs.insert(t.tail);
        if (t.tail == entity) nbrs.insert(t.head);
    }
    return nbrs.size();
}

std::vector<std::size_t> degree_index(const KnowledgeGraph& kg) {
    std::vector<std::vector<Id>> nbrs(kg.entity_count());
    for (const auto& t : kg.triples()) {
        if (t.head == t.tail) continue;
        nbrs[t.head].push_back(t.tail);
        nbrs[t.tail].push_back(t.head);
    }
    std::vector<std::size_t> degree(kg.entity_count());
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        auto& l = nbrs[i];
        std::sort(l.begin(), l.end());
        degree[i] = static_cast<std::size_t>(std::unique(l.begin(), l.end()) - l.begin());
    }
    return degree;
}

// ---------------------------------------------------------------------------
// Alignment data
// ---------------------------------------------------------------------------

AlignmentSeedSet split_seeds(std::vector<EntityPair> pairs, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw Error(ErrorKind::usage, "train fraction must lie in [0, 1]");
    }
    std::set<EntityPair> unique(pairs.begin(), pairs.end());
    if (unique.size() != pairs.size()) throw Error(ErrorKind::data, "duplicate seed alignment pair");

    AlignmentSeedSet set;
    set.pairs = pairs;
    set.train_fraction = train_fraction;
    Rng rng = make_rng(seed, "seed-split");
    for (std::size_t i = pairs.size(); i > 1; --i) {
        std::swap(pairs[i - 1], pairs[uniform_index(rng, i)]);
    }
    const auto n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(pairs.size()) * train_fraction + 1e-9));
    set.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
    set.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train), pairs.end());
    return set;
}

AlignmentDataset ingest_alignment_dataset(const AlignmentPaths& paths, double train_fraction,
                                          std::uint64_t seed, const TripleFormat& format) {
    auto source = std::make_shared<const KnowledgeGraph>(
        ingest_triples(paths.source_triples, format, paths.source_triples.stem().string()));
    auto target = std::make_shared<const KnowledgeGraph>(
        ingest_triples(paths.target_triples, format, paths.target_triples.stem().string()));

    std::ifstream in(paths.seed_pairs, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open seed file " + paths.seed_pairs.string());
    std::vector<EntityPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim_eol(line);
        if (is_blank(view)) continue;
        auto fields = split_tabs(view);
        if (fields.size() != 2) {
            throw Error(ErrorKind::data, paths.seed_pairs.string() + ":" + std::to_string(line_no) +
                                             ": expected 2 tab-separated fields");
        }
        auto a = source->entities().find(fields[0]);
        if (!a) {
            throw Error(ErrorKind::data, "seed label '" + std::string(fields[0]) +
                                             "' not found in source graph (line " +
                                             std::to_string(line_no) + ")");
        }
        auto b = target->entities().find(fields[1]);
        if (!b) {
            throw Error(ErrorKind::data, "seed label '" + std::string(fields[1]) +
                                             "' not found in target graph (line " +
                                             std::to_string(line_no) + ")");
        }
        pairs.emplace_back(*a, *b);
    }
    if (pairs.empty()) throw Error(ErrorKind::data, "seed file " + paths.seed_pairs.string() + " is empty");

    AlignmentDataset data;
    data.source = std::move(source);
    data.target = std::move(target);
    data.seeds = split_seeds(std::move(pairs), train_fraction, seed);
    return data;
}

void write_seed_pairs(const KnowledgeGraph& source, const KnowledgeGraph& target,
                      std::span<const EntityPair> pairs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (const auto& [a, b] : pairs) {
        out << source.entities().label(a) << '\t' << target.entities().label(b) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Completion data
// ---------------------------------------------------------------------------

CompletionDataset ingest_completion_dataset(const std::filesystem::path& dir, const TripleFormat& format) {
    KnowledgeGraphBuilder builder(dir.filename().string());
    CompletionDataset data;
    data.train = ingest_into(builder, dir / "train.txt", format, /*add_to_graph=*/true);
    if (std::filesystem::exists(dir / "valid.txt")) {
        data.valid = ingest_into(builder, dir / "valid.txt", format, false);
    }
    if (std::filesystem::exists(dir / "test.txt")) {
        data.test = ingest_into(builder, dir / "test.txt", format, false);
    }
    data.graph = std::make_shared<const KnowledgeGraph>(std::move(builder).build());
    return data;
}

void write_completion_dataset(const CompletionDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_triples(*data.graph, data.train, dir / "train.txt");
    if (!data.valid.empty()) write_triples(*data.graph, data.valid, dir / "valid.txt");
    if (!data.test.empty()) write_triples(*data.graph, data.test, dir / "test.txt");
}

// ---------------------------------------------------------------------------
// Stats
// ---------------------------------------------------------------------------

namespace {
GraphStats graph_stats(const KnowledgeGraph& kg) {
    return {kg.name(), kg.relation_count(), kg.entity_count(), kg.triple_count()};
}
}  // namespace

DatasetStats stats_of(const CompletionDataset& data) {
    DatasetStats s;
    s.graphs.push_back(graph_stats(*data.graph));
    s.train_count = data.train.size();
    s.valid_count = data.valid.size();
    s.test_count = data.test.size();
    return s;
}

DatasetStats stats_of(const AlignmentDataset& data) {
    DatasetStats s;
    s.graphs.push_back(graph_stats(*data.source));
    s.graphs.push_back(graph_stats(*data.target));
    s.seed_pairs = data.seeds.pairs.size();
    s.seed_train = data.seeds.train.size();
    s.seed_test = data.seeds.test.size();
    return s;
}

std::string DatasetStats::to_key_value() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const std::string p = "graph" + std::to_string(i) + ".";
        out << p << "name=" << graphs[i].name << '\n'
            << p << "relations=" << graphs[i].relation_count << '\n'
            << p << "entities=" << graphs[i].entity_count << '\n'
            << p << "triples=" << graphs[i].triple_count << '\n';
    }
    auto opt = [&out](const char* key, const std::optional<std::size_t>& v) {
        if (v) out << key << '=' << *v << '\n';
    };
    opt("train", train_count);
    opt("valid", valid_count);
    opt("test", test_count);
    opt("seed_pairs", seed_pairs);
    opt("seed_train", seed_train);
    opt("seed_test", seed_test);
    return out.str();
}

std::string DatasetStats::to_json() const {
    nlohmann::ordered_json j;
    j["graphs"] = nlohmann::ordered_json::array();
    for (const auto& g : graphs) {
        j["graphs"].push_back({{"name", g.name},
                               {"relations", g.relation_count},
                               {"entities", g.entity_count},
                               {"triples", g.triple_count}});
    }
    auto opt = [&j](const char* key, const std::optional<std::size_t>& v) {
        if (v) j[key] = *v;
    };
    opt("train", train_count);
    opt("valid", valid_count);
    opt("test", test_count);
    opt("seed_pairs", seed_pairs);
    opt("seed_train", seed_train);
    opt("seed_test", seed_test);
    return j.dump(2);
}

}  // namespace rpe

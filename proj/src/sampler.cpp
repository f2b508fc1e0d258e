#include "coba/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace coba {

namespace {

// Rounding rule used for every fractional count in the split protocol.
std::size_t round_count(double fraction, std::size_t total) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 0.5));
}

}  // namespace

EvalSplit split_edges(const DirectedGraph& g, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error("test_fraction must lie strictly between 0 and 1");

    std::vector<Edge> edges = g.edges();
    const std::size_t m = edges.size();
    const std::size_t test_count = round_count(test_fraction, m);
    if (test_count == 0 || test_count >= m)
        throw Error("test_fraction " + std::to_string(test_fraction) +
                    " leaves an empty train or test set (M=" + std::to_string(m) + ")");

    RandomStream rng = derive_stream(seed, "split");
    shuffle(edges, rng);

    EvalSplit split;
    split.test_fraction = test_fraction;
    split.seed = seed;
    split.test_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(test_count));
    std::vector<Edge> train_edges(edges.begin() + static_cast<std::ptrdiff_t>(test_count),
                                  edges.end());
    split.train_graph = DirectedGraph::build(g.node_names(), std::move(train_edges));
    std::sort(split.test_pos.begin(), split.test_pos.end());
    return split;
}

EvalSplit build_eval_negatives(EvalSplit split, const DirectedGraph& full_graph,
                               double mix_ratio, std::uint64_t seed) {
    if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw Error("mix_ratio must be in [0,1]");
    const std::size_t pos_count = split.test_pos.size();
    if (pos_count == 0) throw Error("split has no test positives");

    const std::size_t want_reversed = round_count(mix_ratio, pos_count);

    // Only unidirectional positives are eligible for reversal: their flipped
    // edge must be absent from the full graph, otherwise the "negative"
    // would be a real edge.
    std::vector<Edge> unidirectional;
    for (Edge e : split.test_pos)
        if (!full_graph.has_edge(e.dst, e.src)) unidirectional.push_back(e);

    if (want_reversed > unidirectional.size()) {
        const double achievable =
            static_cast<double>(unidirectional.size()) / static_cast<double>(pos_count);
        throw Error("mix_ratio " + std::to_string(mix_ratio) + " needs " +
                    std::to_string(want_reversed) + " reversed negatives but only " +
                    std::to_string(unidirectional.size()) +
                    " test positives are unidirectional (achievable mix_ratio " +
                    std::to_string(achievable) + ")");
    }

    RandomStream rng = derive_stream(seed, "eval-neg",
                                     static_cast<std::uint64_t>(std::llround(mix_ratio * 1e6)));
    shuffle(unidirectional, rng);

    split.test_neg.clear();
    split.test_neg.reserve(pos_count);
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(pos_count * 2);
    for (std::size_t i = 0; i < want_reversed; ++i) {
        const Edge rev{unidirectional[i].dst, unidirectional[i].src};
        chosen.insert(edge_key(rev));
        split.test_neg.push_back({rev, NegKind::Reversed});
    }

    const NodeId n = full_graph.num_nodes();
    const std::size_t want_random = pos_count - want_reversed;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * (want_random + 1) + 1000000;
    while (split.test_neg.size() < pos_count) {
        if (++attempts > max_attempts)
            throw Error("could not sample enough random non-edges (graph too dense?)");
        const NodeId u = static_cast<NodeId>(rng.uniform_below(n));
        const NodeId v = static_cast<NodeId>(rng.uniform_below(n));
        if (u == v) continue;
        const Edge e{u, v};
        if (full_graph.has_edge(u, v)) continue;
        if (!chosen.insert(edge_key(e)).second) continue;
        split.test_neg.push_back({e, NegKind::Random});
    }

    split.mix_ratio = mix_ratio;
    return split;
}

std::vector<NodeId> sample_neighbors(std::span<const NodeId> neighbors, std::size_t k,
                                     RandomStream& rng) {
    if (k == 0) throw Error("neighbor fan-out must be >= 1");
    std::vector<NodeId> out;
    if (neighbors.empty()) return out;
    out.reserve(k);
    const std::size_t n = neighbors.size();
    if (n < k) {
        // too few distinct neighbors: k draws with replacement
        for (std::size_t i = 0; i < k; ++i)
            out.push_back(neighbors[rng.uniform_below(n)]);
        return out;
    }
    // Floyd's sampling: k distinct indices without copying the list
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t i = n - k; i < n; ++i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_below(i + 1));
        if (std::find(picked.begin(), picked.end(), j) != picked.end()) j = i;
        picked.push_back(j);
    }
    for (std::size_t idx : picked) out.push_back(neighbors[idx]);
    return out;
}

NegativeBatch sample_training_negatives(const DirectedGraph& train_graph, std::size_t n,
                                        RandomStream& rng) {
    if (n == 0) throw Error("negatives per node must be >= 1");
    const NodeId num_nodes = train_graph.num_nodes();
    if (num_nodes < 2) throw Error("graph too small for negative sampling");

    constexpr std::size_t kMaxTries = 1000;
    NegativeBatch batch;
    batch.source_side.reserve(n * num_nodes);
    batch.target_side.reserve(n * num_nodes);

    for (NodeId v = 0; v < num_nodes; ++v) {
        // source side: u that does not point to v
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t tries = 0;
            for (;;) {
                if (++tries > kMaxTries) {
                    ++batch.skipped_source_nodes;
                    goto target_side;
                }
                const NodeId u = static_cast<NodeId>(rng.uniform_below(num_nodes));
                if (u == v || train_graph.has_edge(u, v)) continue;
                batch.source_side.push_back({u, v});
                break;
            }
        }
    target_side:
        // target side: w that v does not point to
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t tries = 0;
            for (;;) {
                if (++tries > kMaxTries) {
                    ++batch.skipped_target_nodes;
                    goto next_node;
                }
                const NodeId w = static_cast<NodeId>(rng.uniform_below(num_nodes));
                if (w == v || train_graph.has_edge(v, w)) continue;
                batch.target_side.push_back({v, w});
                break;
            }
        }
    next_node:;
    }
    return batch;
}

std::string mix_ratio_label(double mix_ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", mix_ratio * 100.0);
    return buf;
}

EvalSplit SplitBundle::select(double mix_ratio) const {
    for (std::size_t i = 0; i < mix_ratios.size(); ++i) {
        if (std::abs(mix_ratios[i] - mix_ratio) < 1e-9) {
            EvalSplit s = base;
            s.test_neg = negatives[i];
            s.mix_ratio = mix_ratios[i];
            return s;
        }
    }
    throw Error("split directory has no negatives for mix_ratio " + std::to_string(mix_ratio));
}

namespace {

std::string neg_file_name(const SplitBundle& bundle, std::size_t i) {
    if (bundle.mix_ratios.size() == 1) return "test_neg.edges";
    return "test_neg_" + mix_ratio_label(bundle.mix_ratios[i]) + ".edges";
}

}  // namespace

void save_split_dir(const std::filesystem::path& dir, const DirectedGraph& full_graph,
                    const SplitBundle& bundle) {
    std::filesystem::create_directories(dir);
    const DirectedGraph& train = bundle.base.train_graph;
    write_id_map(train, dir / "ids.map");
    write_edge_list(train, dir / "train.edges");

    {
        std::ofstream out(dir / "test_pos.edges");
        if (!out) throw Error("cannot write test_pos.edges");
        for (Edge e : bundle.base.test_pos)
            out << train.node_name(e.src) << ' ' << train.node_name(e.dst) << '\n';
    }

    nlohmann::ordered_json neg_meta = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < bundle.mix_ratios.size(); ++i) {
        const std::string fname = neg_file_name(bundle, i);
        std::ofstream out(dir / fname);
        if (!out) throw Error("cannot write " + fname);
        std::size_t reversed = 0;
        for (const TaggedEdge& te : bundle.negatives[i]) {
            out << train.node_name(te.edge.src) << ' ' << train.node_name(te.edge.dst) << ' '
                << static_cast<char>(te.kind) << '\n';
            if (te.kind == NegKind::Reversed) ++reversed;
        }
        neg_meta.push_back({{"mix_ratio", bundle.mix_ratios[i]},
                            {"file", fname},
                            {"count", bundle.negatives[i].size()},
                            {"reversed", reversed},
                            {"random", bundle.negatives[i].size() - reversed}});
    }

    nlohmann::ordered_json manifest{
        {"seed", bundle.base.seed},
        {"test_fraction", bundle.base.test_fraction},
        {"num_nodes", full_graph.num_nodes()},
        {"num_edges_full", full_graph.num_edges()},
        {"num_train_edges", train.num_edges()},
        {"num_test_pos", bundle.base.test_pos.size()},
        {"negatives", neg_meta},
    };
    std::ofstream out(dir / "split.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("cannot write split.json");
}

SplitBundle load_split_dir(const std::filesystem::path& dir) {
    std::ifstream jin(dir / "split.json");
    if (!jin) throw Error("not a split directory (missing split.json): " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(jin);

    const auto universe = read_id_map(dir / "ids.map");
    SplitBundle bundle;
    bundle.base.train_graph = load_edge_list(dir / "train.edges", universe);
    bundle.base.seed = manifest.at("seed").get<std::uint64_t>();
    bundle.base.test_fraction = manifest.at("test_fraction").get<double>();

    const DirectedGraph& g = bundle.base.train_graph;
    auto resolve = [&](const std::string& name, const std::filesystem::path& where) {
        const auto id = g.find_node(name);
        if (!id) throw Error(where.string() + ": unknown node '" + name + "'");
        return *id;
    };

    {
        std::ifstream in(dir / "test_pos.edges");
        if (!in) throw Error("missing test_pos.edges in " + dir.string());
        std::string src, dst;
        while (in >> src >> dst)
            bundle.base.test_pos.push_back(
                {resolve(src, dir / "test_pos.edges"), resolve(dst, dir / "test_pos.edges")});
    }

    for (const auto& meta : manifest.at("negatives")) {
        const std::filesystem::path file = dir / meta.at("file").get<std::string>();
        std::ifstream in(file);
        if (!in) throw Error("missing negatives file " + file.string());
        std::vector<TaggedEdge> negs;
        std::string src, dst;
        char tag;
        while (in >> src >> dst >> tag) {
            if (tag != 'r' && tag != 'x')
                throw Error(file.string() + ": bad negative tag '" + std::string(1, tag) + "'");
            negs.push_back({{resolve(src, file), resolve(dst, file)},
                            tag == 'r' ? NegKind::Random : NegKind::Reversed});
        }
        bundle.mix_ratios.push_back(meta.at("mix_ratio").get<double>());
        bundle.negatives.push_back(std::move(negs));
    }
    return bundle;
}

}  // namespace coba

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "coba/graph.hpp"
#include "coba/rng.hpp"

namespace coba {

enum class NegKind : char { Random = 'r', Reversed = 'x' };

struct TaggedEdge {
    Edge edge;
    NegKind kind;
    friend bool operator==(const TaggedEdge&, const TaggedEdge&) = default;
};

/// Train/test split of a directed graph. The train graph keeps the full
/// node universe (same dense ids as the original), only the edge set
/// shrinks; held-out positives plus train edges recompose the original
/// edge set exactly.
struct EvalSplit {
    DirectedGraph train_graph;
    std::vector<Edge> test_pos;
    std::vector<TaggedEdge> test_neg;  // empty until negatives are built
    double test_fraction = 0.0;
    double mix_ratio = 0.0;  // fraction of reversed negatives
    std::uint64_t seed = 0;
};

// Uniform random edge split; |test_pos| = floor(test_fraction * M + 0.5).
// Deterministic under seed (stream name "split"). Errors if either side
// would be empty.
EvalSplit split_edges(const DirectedGraph& g, double test_fraction, std::uint64_t seed);

// Completes a split with |test_neg| = |test_pos| negatives:
// round(mix_ratio * |test_pos|) reversals of unidirectional test positives
// (edges whose reverse is absent from the full graph), the rest uniform
// non-edges of the full graph. Negatives are deduplicated. Errors when the
// split has too few unidirectional positives for the requested ratio,
// reporting the achievable maximum.
EvalSplit build_eval_negatives(EvalSplit split, const DirectedGraph& full_graph,
                               double mix_ratio, std::uint64_t seed);

// Fixed-fan-out neighbor draw: k without replacement when enough neighbors
// exist, k with replacement when 0 < |neighbors| < k, empty when empty.
std::vector<NodeId> sample_neighbors(std::span<const NodeId> neighbors, std::size_t k,
                                     RandomStream& rng);

/// Per-epoch training negatives: for every node v, n sampled non-edges
/// (u,v) on the source side and n non-edges (v,w) on the target side,
/// checked against the train graph only. Nodes where rejection sampling
/// hits the retry cap (node adjacent to everything) are skipped and counted.
struct NegativeBatch {
    std::vector<Edge> source_side;  // entries (u,v): u does not point to v
    std::vector<Edge> target_side;  // entries (v,w): v does not point to w
    std::size_t skipped_source_nodes = 0;
    std::size_t skipped_target_nodes = 0;
};

NegativeBatch sample_training_negatives(const DirectedGraph& train_graph, std::size_t n,
                                        RandomStream& rng);

/// One positive split plus negatives for any number of mix ratios, as
/// produced by the prepare command and persisted as a split directory.
struct SplitBundle {
    EvalSplit base;  // negatives empty
    std::vector<double> mix_ratios;
    std::vector<std::vector<TaggedEdge>> negatives;  // parallel to mix_ratios

    // Assembles the complete split for one of the stored ratios.
    EvalSplit select(double mix_ratio) const;
};

// Directory layout: ids.map, train.edges, test_pos.edges, one negatives
// file per ratio ("test_neg.edges" for a single ratio, "test_neg_<pct>.edges"
// otherwise; third column r=random / x=reversed), split.json manifest.
void save_split_dir(const std::filesystem::path& dir, const DirectedGraph& full_graph,
                    const SplitBundle& bundle);
SplitBundle load_split_dir(const std::filesystem::path& dir);

std::string mix_ratio_label(double mix_ratio);  // 0.5 -> "50"

}  // namespace coba

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coba {

using NodeId = std::uint32_t;

struct Edge {
    NodeId src{};
    NodeId dst{};
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::uint64_t edge_key(Edge e) {
    return (static_cast<std::uint64_t>(e.src) << 32) | e.dst;
}

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadSummary {
    std::size_t edges_kept = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t self_loops_dropped = 0;
};

/// Immutable directed graph over dense node ids 0..N-1 with both adjacency
/// directions in CSR form. Neighbor lists are sorted ascending, so edge
/// membership is a binary search. External (file) ids are kept in a
/// side table; everything else in the project works on dense ids.
/// Self-loops and duplicate edges are dropped at construction and counted.
class DirectedGraph {
public:
    DirectedGraph() = default;

    // `names[i]` is the external id of dense node i; edges use dense ids.
    // Keeps isolated nodes: N is names.size() regardless of edge coverage.
    static DirectedGraph build(std::vector<std::string> names, std::vector<Edge> edges);

    NodeId num_nodes() const { return num_nodes_; }
    std::size_t num_edges() const { return out_targets_.size(); }

    std::span<const NodeId> out_neighbors(NodeId v) const {
        return {out_targets_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
    }
    std::span<const NodeId> in_neighbors(NodeId v) const {
        return {in_sources_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
    }
    std::size_t out_degree(NodeId v) const { return out_offsets_[v + 1] - out_offsets_[v]; }
    std::size_t in_degree(NodeId v) const { return in_offsets_[v + 1] - in_offsets_[v]; }

    bool has_edge(NodeId u, NodeId v) const;

    const std::string& node_name(NodeId v) const { return names_[v]; }
    const std::vector<std::string>& node_names() const { return names_; }
    std::optional<NodeId> find_node(std::string_view name) const;

    // Edges ascending by (src, dst).
    std::vector<Edge> edges() const;

    const LoadSummary& load_summary() const { return summary_; }

    // Structural self-check used by tests; throws on violation.
    void check_invariants() const;

private:
    NodeId num_nodes_ = 0;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<NodeId> out_targets_;
    std::vector<std::size_t> in_offsets_{0};
    std::vector<NodeId> in_sources_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeId> name_to_id_;
    LoadSummary summary_;
};

// Reads a "src dst" edge list; '#'/'%' lines are comments, extra columns
// after the first two tokens are ignored. Node ids may be arbitrary strings
// and are densely relabelled in order of first appearance.
// Throws Error on malformed lines (with line number) and on empty graphs.
DirectedGraph load_edge_list(const std::filesystem::path& path);

// Same, but over a fixed node universe (dense id i = universe[i]); lines may
// only reference ids in the universe. Used to reload split directories so the
// numbering matches the original graph.
DirectedGraph load_edge_list(const std::filesystem::path& path,
                             const std::vector<std::string>& universe);

// In-memory construction with nodes 0..num_nodes-1; names are the decimal ids.
DirectedGraph make_graph(NodeId num_nodes, std::vector<Edge> edges);

void write_edge_list(const DirectedGraph& g, const std::filesystem::path& path);

// One external id per line; line i is dense node i.
void write_id_map(const DirectedGraph& g, const std::filesystem::path& path);
std::vector<std::string> read_id_map(const std::filesystem::path& path);

/// Zero in-degree and zero out-degree node sets; these nodes are the ones
/// the reverse-fallback aggregation applies to.
struct DegreeIndex {
    std::vector<NodeId> zero_in;   // sorted
    std::vector<NodeId> zero_out;  // sorted
    std::vector<std::uint8_t> zero_in_mask;
    std::vector<std::uint8_t> zero_out_mask;

    bool is_zero_in(NodeId v) const { return zero_in_mask[v] != 0; }
    bool is_zero_out(NodeId v) const { return zero_out_mask[v] != 0; }
};

DegreeIndex degree_index(const DirectedGraph& g);

struct NodeLabels {
    std::vector<int> label;  // per dense node, -1 when unlabeled
    int num_classes = 0;
    std::vector<std::string> class_names;  // class id -> original label string

    std::size_t num_labeled() const;
};

// Reads "node label" lines; nodes resolved through the graph's external-id
// map, class ids assigned by sorted label string. Unknown node ids are an
// error listing the offenders.
NodeLabels load_labels(const std::filesystem::path& path, const DirectedGraph& g);

}  // namespace coba

#include "coba/graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace coba {

DirectedGraph DirectedGraph::build(std::vector<std::string> names, std::vector<Edge> edges) {
    DirectedGraph g;
    g.num_nodes_ = static_cast<NodeId>(names.size());
    g.names_ = std::move(names);
    g.name_to_id_.reserve(g.names_.size());
    for (NodeId v = 0; v < g.num_nodes_; ++v) {
        auto [it, inserted] = g.name_to_id_.emplace(g.names_[v], v);
        if (!inserted) throw Error("duplicate node id '" + g.names_[v] + "' in node table");
    }

    for (const Edge& e : edges) {
        if (e.src >= g.num_nodes_ || e.dst >= g.num_nodes_)
            throw Error("edge endpoint out of range");
    }

    auto last = std::partition(edges.begin(), edges.end(),
                               [](Edge e) { return e.src != e.dst; });
    g.summary_.self_loops_dropped = static_cast<std::size_t>(edges.end() - last);
    edges.erase(last, edges.end());

    std::sort(edges.begin(), edges.end());
    auto uniq = std::unique(edges.begin(), edges.end());
    g.summary_.duplicates_dropped = static_cast<std::size_t>(edges.end() - uniq);
    edges.erase(uniq, edges.end());
    g.summary_.edges_kept = edges.size();

    const NodeId n = g.num_nodes_;
    std::vector<std::size_t> out_deg(n, 0), in_deg(n, 0);
    for (Edge e : edges) {
        ++out_deg[e.src];
        ++in_deg[e.dst];
    }
    g.out_offsets_.assign(n + 1, 0);
    g.in_offsets_.assign(n + 1, 0);
    for (NodeId v = 0; v < n; ++v) {
        g.out_offsets_[v + 1] = g.out_offsets_[v] + out_deg[v];
        g.in_offsets_[v + 1] = g.in_offsets_[v] + in_deg[v];
    }
    g.out_targets_.resize(edges.size());
    g.in_sources_.resize(edges.size());

    // edges are sorted by (src, dst), so out lists come out sorted directly
    std::vector<std::size_t> cursor = g.out_offsets_;
    for (Edge e : edges) g.out_targets_[cursor[e.src]++] = e.dst;

    cursor = g.in_offsets_;
    for (Edge e : edges) g.in_sources_[cursor[e.dst]++] = e.src;
    for (NodeId v = 0; v < n; ++v) {
        auto* first = g.in_sources_.data() + g.in_offsets_[v];
        std::sort(first, g.in_sources_.data() + g.in_offsets_[v + 1]);
    }
    return g;
}

bool DirectedGraph::has_edge(NodeId u, NodeId v) const {
    const auto nb = out_neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

std::optional<NodeId> DirectedGraph::find_node(std::string_view name) const {
    auto it = name_to_id_.find(std::string(name));
    if (it == name_to_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<Edge> DirectedGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (NodeId u = 0; u < num_nodes_; ++u)
        for (NodeId v : out_neighbors(u)) out.push_back({u, v});
    return out;
}

void DirectedGraph::check_invariants() const {
    std::size_t out_sum = 0, in_sum = 0;
    for (NodeId v = 0; v < num_nodes_; ++v) {
        out_sum += out_degree(v);
        in_sum += in_degree(v);
        const auto out = out_neighbors(v);
        const auto in = in_neighbors(v);
        if (!std::is_sorted(out.begin(), out.end())) throw Error("out list not sorted");
        if (!std::is_sorted(in.begin(), in.end())) throw Error("in list not sorted");
        if (std::adjacent_find(out.begin(), out.end()) != out.end())
            throw Error("duplicate out edge");
        if (std::adjacent_find(in.begin(), in.end()) != in.end()) throw Error("duplicate in edge");
        for (NodeId w : out) {
            if (w == v) throw Error("self loop survived construction");
            const auto rin = in_neighbors(w);
            if (!std::binary_search(rin.begin(), rin.end(), v))
                throw Error("out/in adjacency mismatch");
        }
    }
    if (out_sum != num_edges() || in_sum != num_edges())
        throw Error("degree sums disagree with edge count");
}

namespace {

bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '#' || c == '%';
    }
    return true;  // blank
}

// Splits off the first two whitespace-separated tokens; extra columns
// (weights, timestamps) are tolerated and ignored.
bool split_src_dst(const std::string& line, std::string& src, std::string& dst) {
    std::istringstream ss(line);
    return static_cast<bool>(ss >> src >> dst);
}

DirectedGraph load_edges_impl(const std::filesystem::path& path,
                              const std::vector<std::string>* universe) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open edge list: " + path.string());

    std::vector<std::string> names;
    std::unordered_map<std::string, NodeId> ids;
    if (universe) {
        names = *universe;
        ids.reserve(names.size());
        for (NodeId v = 0; v < names.size(); ++v) ids.emplace(names[v], v);
    }

    auto intern = [&](const std::string& name, std::size_t line_no) -> NodeId {
        auto it = ids.find(name);
        if (it != ids.end()) return it->second;
        if (universe)
            throw Error(path.string() + ":" + std::to_string(line_no) + ": node '" + name +
                        "' not in the split's node table");
        const NodeId v = static_cast<NodeId>(names.size());
        names.push_back(name);
        ids.emplace(name, v);
        return v;
    };

    std::vector<Edge> edges;
    std::string line, src, dst;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        if (!split_src_dst(line, src, dst))
            throw Error(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'src dst', got '" + line + "'");
        const NodeId u = intern(src, line_no);
        const NodeId v = intern(dst, line_no);
        edges.push_back({u, v});
    }
    if (names.empty()) throw Error("empty graph: " + path.string());
    return DirectedGraph::build(std::move(names), std::move(edges));
}

}  // namespace

DirectedGraph load_edge_list(const std::filesystem::path& path) {
    return load_edges_impl(path, nullptr);
}

DirectedGraph load_edge_list(const std::filesystem::path& path,
                             const std::vector<std::string>& universe) {
    return load_edges_impl(path, &universe);
}

DirectedGraph make_graph(NodeId num_nodes, std::vector<Edge> edges) {
    std::vector<std::string> names(num_nodes);
    for (NodeId v = 0; v < num_nodes; ++v) names[v] = std::to_string(v);
    return DirectedGraph::build(std::move(names), std::move(edges));
}

void write_edge_list(const DirectedGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write edge list: " + path.string());
    for (NodeId u = 0; u < g.num_nodes(); ++u)
        for (NodeId v : g.out_neighbors(u))
            out << g.node_name(u) << ' ' << g.node_name(v) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

void write_id_map(const DirectedGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write id map: " + path.string());
    for (NodeId v = 0; v < g.num_nodes(); ++v) out << g.node_name(v) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<std::string> read_id_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open id map: " + path.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    if (names.empty()) throw Error("empty id map: " + path.string());
    return names;
}

DegreeIndex degree_index(const DirectedGraph& g) {
    DegreeIndex idx;
    const NodeId n = g.num_nodes();
    idx.zero_in_mask.assign(n, 0);
    idx.zero_out_mask.assign(n, 0);
    for (NodeId v = 0; v < n; ++v) {
        if (g.in_degree(v) == 0) {
            idx.zero_in_mask[v] = 1;
            idx.zero_in.push_back(v);
        }
        if (g.out_degree(v) == 0) {
            idx.zero_out_mask[v] = 1;
            idx.zero_out.push_back(v);
        }
    }
    return idx;
}

std::size_t NodeLabels::num_labeled() const {
    std::size_t n = 0;
    for (int l : label)
        if (l >= 0) ++n;
    return n;
}

NodeLabels load_labels(const std::filesystem::path& path, const DirectedGraph& g) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open label file: " + path.string());

    std::vector<std::pair<NodeId, std::string>> raw;
    std::vector<std::string> unknown;
    std::string line, node, label;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        if (!split_src_dst(line, node, label))
            throw Error(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'node label', got '" + line + "'");
        const auto id = g.find_node(node);
        if (!id) {
            unknown.push_back(node);
            continue;
        }
        raw.emplace_back(*id, label);
    }
    if (!unknown.empty()) {
        std::string msg = "label file references unknown nodes:";
        const std::size_t shown = std::min<std::size_t>(unknown.size(), 10);
        for (std::size_t i = 0; i < shown; ++i) msg += " '" + unknown[i] + "'";
        if (unknown.size() > shown)
            msg += " (+" + std::to_string(unknown.size() - shown) + " more)";
        throw Error(msg);
    }
    if (raw.empty()) throw Error("label file has no usable entries: " + path.string());

    // class ids by sorted label string, independent of file order
    std::set<std::string> classes;
    for (const auto& [v, l] : raw) classes.insert(l);
    if (classes.size() < 2) throw Error("need at least 2 label classes");

    NodeLabels out;
    out.class_names.assign(classes.begin(), classes.end());
    out.num_classes = static_cast<int>(out.class_names.size());
    std::map<std::string, int> class_id;
    for (int c = 0; c < out.num_classes; ++c) class_id[out.class_names[c]] = c;

    out.label.assign(g.num_nodes(), -1);
    for (const auto& [v, l] : raw) out.label[v] = class_id[l];
    return out;
}

}  // namespace coba

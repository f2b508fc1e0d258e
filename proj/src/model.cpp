#include "coba/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "coba/sampler.hpp"

namespace coba {

const char* to_string(AggregationMode mode) {
    switch (mode) {
        case AggregationMode::Full: return "full";
        case AggregationMode::NoReverse: return "no-reverse";
        case AggregationMode::NoReverseNoCollab: return "no-reverse-no-collab";
    }
    return "?";
}

const char* to_string(Activation act) {
    switch (act) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "?";
}

AggregationMode parse_mode(std::string_view s) {
    if (s == "full") return AggregationMode::Full;
    if (s == "no-reverse") return AggregationMode::NoReverse;
    if (s == "no-reverse-no-collab") return AggregationMode::NoReverseNoCollab;
    throw Error("unknown aggregation mode '" + std::string(s) +
                "' (expected full | no-reverse | no-reverse-no-collab)");
}

Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw Error("unknown activation '" + std::string(s) +
                "' (expected relu | tanh | identity)");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

int ModelParams::weight_input_dim(AggregationMode mode, int dim) {
    return (mode == AggregationMode::NoReverseNoCollab ? 2 : 3) * dim;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t count = 0;
    if (!tables_frozen)
        count += static_cast<std::size_t>(source_init.size() + target_init.size());
    for (const Mat& w : source_weights) count += static_cast<std::size_t>(w.size());
    for (const Mat& w : target_weights) count += static_cast<std::size_t>(w.size());
    return count;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

void fill_xavier(Mat& m, std::size_t fan_in, std::size_t fan_out, RandomStream& rng) {
    const double bound = xavier_bound(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = (2.0 * rng.next_double() - 1.0) * bound;
}

}  // namespace

ModelParams init_model(NodeId num_nodes, int dim, int layers, AggregationMode mode,
                       std::uint64_t seed, Activation activation, const Mat* features,
                       bool freeze) {
    if (dim < 1) throw Error("embedding dim must be >= 1");
    if (layers < 1) throw Error("layer count must be >= 1");

    RandomStream rng = derive_stream(seed, "init");
    ModelParams params;
    params.activation = activation;

    if (features) {
        if (features->rows() != static_cast<Eigen::Index>(num_nodes) ||
            features->cols() != dim)
            throw Error("feature table is " + std::to_string(features->rows()) + "x" +
                        std::to_string(features->cols()) + " but the model needs " +
                        std::to_string(num_nodes) + "x" + std::to_string(dim) +
                        " (no projection layer; set dim to the feature width)");
        params.source_init = *features;
        params.target_init = *features;
        params.tables_frozen = freeze;
    } else {
        params.source_init.resize(num_nodes, dim);
        params.target_init.resize(num_nodes, dim);
        fill_xavier(params.source_init, num_nodes, static_cast<std::size_t>(dim), rng);
        fill_xavier(params.target_init, num_nodes, static_cast<std::size_t>(dim), rng);
    }

    const int in_dim = ModelParams::weight_input_dim(mode, dim);
    for (int l = 0; l < layers; ++l) {
        Mat w(in_dim, dim);
        fill_xavier(w, static_cast<std::size_t>(in_dim), static_cast<std::size_t>(dim), rng);
        params.source_weights.push_back(std::move(w));
    }
    for (int l = 0; l < layers; ++l) {
        Mat w(in_dim, dim);
        fill_xavier(w, static_cast<std::size_t>(in_dim), static_cast<std::size_t>(dim), rng);
        params.target_weights.push_back(std::move(w));
    }
    return params;
}

NodeSample select_neighborhood(NodeId v, const DirectedGraph& g, const DegreeIndex& idx,
                               AggregationMode mode, std::size_t fan_out, RandomStream& rng) {
    NodeSample ns;
    const bool reverse_allowed = mode == AggregationMode::Full;

    // source side reads in-neighbors; zero in-degree nodes fall back to
    // out-neighbors in Full mode
    std::span<const NodeId> src_candidates = g.in_neighbors(v);
    if (idx.is_zero_in(v) && reverse_allowed) {
        src_candidates = g.out_neighbors(v);
        ns.source_reversed = true;
    }
    std::span<const NodeId> tgt_candidates = g.out_neighbors(v);
    if (idx.is_zero_out(v) && reverse_allowed) {
        tgt_candidates = g.in_neighbors(v);
        ns.target_reversed = true;
    }

    if (fan_out == 0) {
        ns.source_side.assign(src_candidates.begin(), src_candidates.end());
        ns.target_side.assign(tgt_candidates.begin(), tgt_candidates.end());
    } else {
        ns.source_side = sample_neighbors(src_candidates, fan_out, rng);
        ns.target_side = sample_neighbors(tgt_candidates, fan_out, rng);
    }
    return ns;
}

NeighborhoodPlan sample_plan(const DirectedGraph& g, const DegreeIndex& idx,
                             AggregationMode mode, std::size_t fan_out, int layers,
                             RandomStream& rng) {
    NeighborhoodPlan plan;
    plan.layers.resize(static_cast<std::size_t>(layers));
    for (auto& layer : plan.layers) {
        layer.nodes.reserve(g.num_nodes());
        for (NodeId v = 0; v < g.num_nodes(); ++v)
            layer.nodes.push_back(select_neighborhood(v, g, idx, mode, fan_out, rng));
    }
    return plan;
}

NeighborhoodPlan full_neighborhood_plan(const DirectedGraph& g, const DegreeIndex& idx,
                                        AggregationMode mode, int layers) {
    RandomStream unused(0);  // fan_out 0 never draws
    NeighborhoodPlan plan;
    plan.layers.resize(static_cast<std::size_t>(layers));
    for (auto& layer : plan.layers) {
        layer.nodes.reserve(g.num_nodes());
        for (NodeId v = 0; v < g.num_nodes(); ++v)
            layer.nodes.push_back(select_neighborhood(v, g, idx, mode, 0, unused));
    }
    return plan;
}

RowVec aggregate_mean(const std::vector<RowVec>& vectors, int dim) {
    RowVec out = RowVec::Zero(dim);
    if (vectors.empty()) return out;
    for (const RowVec& v : vectors) {
        if (v.size() != dim) throw Error("aggregate_mean: dimension mismatch");
        out += v;
    }
    out /= static_cast<double>(vectors.size());
    return out;
}

RowVec aggregate_mean(const Mat& table, std::span<const NodeId> ids) {
    RowVec out = RowVec::Zero(table.cols());
    if (ids.empty()) return out;
    for (NodeId u : ids) out += table.row(u);
    out /= static_cast<double>(ids.size());
    return out;
}

namespace {

void apply_activation(Activation act, Mat& m) {
    switch (act) {
        case Activation::Relu: m = m.cwiseMax(0.0); break;
        case Activation::Tanh: m = m.array().tanh().matrix(); break;
        case Activation::Identity: break;
    }
}

}  // namespace

DualEmbedding forward(const ModelParams& params, const NeighborhoodPlan& plan,
                      AggregationMode mode) {
    const NodeId n = params.num_nodes();
    const int d = params.dim();
    const int in_dim = ModelParams::weight_input_dim(mode, d);
    const bool collab = mode != AggregationMode::NoReverseNoCollab;

    if (plan.layers.size() != params.source_weights.size())
        throw Error("plan has " + std::to_string(plan.layers.size()) + " layers, params have " +
                    std::to_string(params.source_weights.size()));

    Mat s_prev = params.source_init;
    Mat t_prev = params.target_init;

    for (std::size_t l = 0; l < plan.layers.size(); ++l) {
        const Mat& ws = params.source_weights[l];
        const Mat& wt = params.target_weights[l];
        if (ws.rows() != in_dim || ws.cols() != d || wt.rows() != in_dim || wt.cols() != d)
            throw Error("weight shape does not match aggregation mode at layer " +
                        std::to_string(l));
        const LayerSamples& samples = plan.layers[l];
        if (samples.nodes.size() != n) throw Error("plan node count mismatch");

        // input layout per row: own embedding | cross embedding (collab) | aggregate
        Mat xs(n, in_dim), xt(n, in_dim);
        xs.leftCols(d) = s_prev;
        xt.leftCols(d) = t_prev;
        if (collab) {
            xs.middleCols(d, d) = t_prev;
            xt.middleCols(d, d) = s_prev;
        }
        for (NodeId v = 0; v < n; ++v) {
            xs.row(v).tail(d) = aggregate_mean(s_prev, samples.nodes[v].source_side);
            xt.row(v).tail(d) = aggregate_mean(t_prev, samples.nodes[v].target_side);
        }

        Mat s_next = xs * ws;
        Mat t_next = xt * wt;
        apply_activation(params.activation, s_next);
        apply_activation(params.activation, t_next);
        s_prev = std::move(s_next);
        t_prev = std::move(t_next);
    }
    return {std::move(s_prev), std::move(t_prev)};
}

double edge_logit(Eigen::Ref<const RowVec> source_u, Eigen::Ref<const RowVec> target_v) {
    return source_u.dot(target_v);
}

double score_edge(Eigen::Ref<const RowVec> source_u, Eigen::Ref<const RowVec> target_v) {
    return sigmoid(edge_logit(source_u, target_v));
}

void write_embedding_matrix(const Mat& m, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw Error("cannot write " + path.string());
    std::fprintf(f, "%lld %lld\n", static_cast<long long>(m.rows()),
                 static_cast<long long>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            std::fprintf(f, j == 0 ? "%.17g" : " %.17g", m(i, j));
        std::fputc('\n', f);
    }
    if (std::fclose(f) != 0) throw Error("write failed: " + path.string());
}

Mat read_embedding_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    long long rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1)
        throw Error("bad embedding header in " + path.string());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!(in >> m(i, j)))
                throw Error("truncated embedding matrix in " + path.string());
    return m;
}

}  // namespace coba

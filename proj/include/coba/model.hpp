#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coba/graph.hpp"
#include "coba/rng.hpp"

namespace coba {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;

/// Ablation switch for the forward pass.
///  - Full: directional aggregation, reverse fallback for zero in/out-degree
///    nodes, and the cross-embedding collaborative term.
///  - NoReverse: drops the reverse fallback (zero-degree sides aggregate
///    nothing); keeps the collaborative term.
///  - NoReverseNoCollab: directional aggregation only, smaller weights.
enum class AggregationMode { Full, NoReverse, NoReverseNoCollab };

enum class Activation { Relu, Tanh, Identity };

const char* to_string(AggregationMode mode);
const char* to_string(Activation act);
AggregationMode parse_mode(std::string_view s);
Activation parse_activation(std::string_view s);

double sigmoid(double x);

/// Trainable state: the per-node source/target embedding tables and one
/// weight matrix per layer and per side. Weight input dim is 3d with the
/// collaborative term (own embedding + cross embedding + neighbor
/// aggregate), 2d without it.
struct ModelParams {
    Mat source_init;  // N x d
    Mat target_init;  // N x d
    std::vector<Mat> source_weights;  // per layer, input_dim x d
    std::vector<Mat> target_weights;
    Activation activation = Activation::Relu;
    bool tables_frozen = false;  // set when initialized from fixed features

    int dim() const { return static_cast<int>(source_init.cols()); }
    int layers() const { return static_cast<int>(source_weights.size()); }
    NodeId num_nodes() const { return static_cast<NodeId>(source_init.rows()); }
    std::size_t parameter_count() const;  // trainable scalars

    static int weight_input_dim(AggregationMode mode, int dim);
};

// Xavier-uniform init, deterministic under seed (stream "init"). When a
// feature table is given it must be N x d and becomes the initial value of
// both embedding tables; `freeze` keeps them fixed during training.
ModelParams init_model(NodeId num_nodes, int dim, int layers, AggregationMode mode,
                       std::uint64_t seed, Activation activation = Activation::Relu,
                       const Mat* features = nullptr, bool freeze = false);

double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// One node's neighbor draw for one layer: the ids feeding the source-side
/// and target-side aggregates, plus flags recording whether the zero-degree
/// reverse fallback supplied them.
struct NodeSample {
    std::vector<NodeId> source_side;
    std::vector<NodeId> target_side;
    bool source_reversed = false;
    bool target_reversed = false;
};

struct LayerSamples {
    std::vector<NodeSample> nodes;  // indexed by dense node id
};

/// Per-layer neighbor draws for every node; drawn once per epoch and held
/// fixed within it.
struct NeighborhoodPlan {
    std::vector<LayerSamples> layers;
};

// Neighbor-set selection rule. Source side samples from in-neighbors
// (fan_out draws); for zero in-degree nodes in Full mode it falls back to
// out-neighbors. Target side mirrors this. fan_out == 0 means "all".
NodeSample select_neighborhood(NodeId v, const DirectedGraph& g, const DegreeIndex& idx,
                               AggregationMode mode, std::size_t fan_out, RandomStream& rng);

NeighborhoodPlan sample_plan(const DirectedGraph& g, const DegreeIndex& idx,
                             AggregationMode mode, std::size_t fan_out, int layers,
                             RandomStream& rng);

// Unsampled plan: every layer aggregates over the complete neighbor sets.
// Used for inference and for oracle comparisons.
NeighborhoodPlan full_neighborhood_plan(const DirectedGraph& g, const DegreeIndex& idx,
                                        AggregationMode mode, int layers);

// Elementwise mean; empty input yields the zero vector.
RowVec aggregate_mean(const std::vector<RowVec>& vectors, int dim);
RowVec aggregate_mean(const Mat& table, std::span<const NodeId> ids);

struct DualEmbedding {
    Mat source;  // N x d
    Mat target;  // N x d
};

// Whole-graph forward pass over the plan's layers. Both sides of layer l
// read layer l-1 values (synchronous update).
DualEmbedding forward(const ModelParams& params, const NeighborhoodPlan& plan,
                      AggregationMode mode);

// Directed edge decoder: sigmoid of the source/target inner product.
double edge_logit(Eigen::Ref<const RowVec> source_u, Eigen::Ref<const RowVec> target_v);
double score_edge(Eigen::Ref<const RowVec> source_u, Eigen::Ref<const RowVec> target_v);

// Embedding matrix file: header "N d", then one row per node in dense id
// order. Values carry 17 significant digits so reload is bit-exact.
void write_embedding_matrix(const Mat& m, const std::filesystem::path& path);
Mat read_embedding_matrix(const std::filesystem::path& path);

}  // namespace coba

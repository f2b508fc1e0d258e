#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "coba/model.hpp"
#include "coba/sampler.hpp"

namespace coba {

struct TrainConfig {
    int dim = 128;
    int epochs = 40;
    int layers = 1;
    std::size_t neighbor_fan_out = 2;   // sampled neighbors per node per layer
    std::size_t negatives_per_node = 2; // per direction, redrawn every epoch
    double learning_rate = 1e-3;
    std::size_t batch_size = 1024;      // positive edges per mini-batch
    std::uint64_t seed = 1;
    AggregationMode mode = AggregationMode::Full;
    Activation activation = Activation::Relu;
    double weight_decay = 0.0;
    double dropout = 0.0;
    bool freeze_tables = false;

    void validate() const;
};

nlohmann::ordered_json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

struct LossReport {
    int epoch = 0;
    double mean_loss = 0.0;
    double pos_term = 0.0;   // mean -log score over positives
    double neg_term = 0.0;   // mean -log(1-score) over negatives
    double grad_norm = 0.0;  // mean per-batch gradient 2-norm
};

// Two-term binary cross entropy over raw logits: mean softplus(-z) over
// positives plus mean softplus(z) over negatives. Computed in logit space;
// never evaluates log of a clamped sigmoid.
double bce_loss(std::span<const double> pos_logits, std::span<const double> neg_logits);

struct EdgeBatch {
    std::vector<Edge> positives;
    std::vector<Edge> negatives;
};

/// Gradients for one batch. Weight gradients are dense; embedding-table
/// gradients carry only the touched rows (sorted). Rows outside these lists
/// have exactly zero gradient.
struct Gradients {
    std::vector<Mat> source_weight_grads;
    std::vector<Mat> target_weight_grads;
    std::vector<NodeId> source_rows;
    std::vector<NodeId> target_rows;
    Mat source_row_grads;  // |source_rows| x d
    Mat target_row_grads;

    double squared_norm() const;
    bool is_finite() const;
    // Zero for untouched rows; row lookup by binary search.
    RowVec source_row_grad(NodeId v, int dim) const;
    RowVec target_row_grad(NodeId v, int dim) const;
};

/// Demand-driven forward pass over exactly the nodes a batch needs,
/// caching per-layer inputs and preactivations for the backward pass.
/// Level k holds layer-k embeddings of the active nodes; level 0 is the
/// touched rows of the embedding tables.
struct BatchForward {
    struct Level {
        std::vector<NodeId> source_nodes, target_nodes;  // sorted
        Mat source_values, target_values;
        Mat source_input, target_input;  // concat inputs, levels >= 1
        Mat source_pre, target_pre;      // preactivations, levels >= 1
        Mat source_mask, target_mask;    // inverted-dropout masks, if any
    };
    std::vector<Level> levels;  // size layers+1
    std::vector<double> pos_logits, neg_logits;
    double pos_term = 0.0, neg_term = 0.0, loss = 0.0;

    double logit(std::size_t level, NodeId u, NodeId v) const;
};

BatchForward forward_batch(const ModelParams& params, const NeighborhoodPlan& plan,
                           AggregationMode mode, const EdgeBatch& batch,
                           double dropout = 0.0, RandomStream* dropout_rng = nullptr);

// Exact reverse-mode gradients of the batch loss with respect to every
// weight matrix and every embedding row the batch touched, including rows
// reached only through neighbor aggregation or the collaborative cross
// terms.
Gradients backward(const ModelParams& params, const NeighborhoodPlan& plan,
                   AggregationMode mode, const EdgeBatch& batch, const BatchForward& fwd);

// Loss as a pure function of params; what the finite-difference checks probe.
double batch_loss(const ModelParams& params, const NeighborhoodPlan& plan,
                  AggregationMode mode, const EdgeBatch& batch);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer. Weight matrices update densely;
/// embedding tables update lazily, touching only rows with gradient (their
/// moments decay only when touched, as in the usual sparse-Adam scheme).
class AdamState {
public:
    explicit AdamState(const ModelParams& params, AdamConfig cfg = {});

    // Throws Error on non-finite gradients (caller aborts the epoch).
    void step(ModelParams& params, const Gradients& grads, double learning_rate,
              double weight_decay = 0.0);

    std::int64_t step_count() const { return step_count_; }

    void save(std::ostream& out) const;
    static AdamState load(std::istream& in, const ModelParams& params);

private:
    AdamConfig cfg_;
    std::vector<Mat> ws_m_, ws_v_, wt_m_, wt_v_;
    Mat s_m_, s_v_, t_m_, t_v_;
    std::int64_t step_count_ = 0;
};

struct TrainOptions {
    std::function<void(const LossReport&)> on_epoch;
    std::filesystem::path checkpoint_dir;  // empty disables checkpoints
    int checkpoint_every = 0;              // 0 = final (and last-good) only
    const Mat* features = nullptr;         // optional N x dim init table
};

struct TrainResult {
    ModelParams params;
    DualEmbedding embedding;  // full-neighborhood forward of final params
    std::vector<LossReport> reports;
    bool diverged = false;
    int completed_epochs = 0;
};

// Reference training loop: per epoch redraw neighbor samples and training
// negatives, then run shuffled positive-edge mini-batches with aligned
// slices of the negatives. Single-threaded and bit-reproducible under
// cfg.seed. On divergence (non-finite loss or gradient) the parameters roll
// back to the end of the last finished epoch.
TrainResult train(const DirectedGraph& train_graph, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

void save_checkpoint(const std::filesystem::path& file, int epoch, const TrainConfig& cfg,
                     const ModelParams& params, const AdamState& adam);

struct Checkpoint {
    int epoch = 0;
    TrainConfig config;
    ModelParams params;
    AdamState adam;
};
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace coba

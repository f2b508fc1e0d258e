#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coba/model.hpp"
#include "coba/sampler.hpp"

namespace coba {

enum class EvalTask { LinkPrediction, NodeClassification, GraphReconstruction };

const char* to_string(EvalTask task);
EvalTask parse_task(std::string_view s);

/// One evaluation outcome: a named-metric map plus the free-form setting it
/// was measured under (mix ratio, k list, ...). Aggregation over repeated
/// runs fills `runs` and per-metric standard deviations.
struct MetricReport {
    EvalTask task = EvalTask::LinkPrediction;
    nlohmann::ordered_json setting;
    std::map<std::string, double> metrics;
    std::size_t runs = 1;
    std::map<std::string, double> stddevs;
};

// Rank-based (Mann-Whitney) AUC: the probability that a uniformly chosen
// positive score exceeds a uniformly chosen negative, ties counting 1/2.
// Invariant under any strictly monotone transform of the scores.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

// Scores every held-out edge with the decoder and reports AUC of the test
// positives against the split's negatives.
MetricReport eval_link_prediction(const DualEmbedding& emb, const EvalSplit& split);

// Per-node probe features: concat(s_v, t_v), N x 2d.
Mat concat_features(const DualEmbedding& emb);

/// Multinomial logistic-regression probe on frozen features. Used on raw
/// feature matrices by tests; train_linear_probe wraps it for embeddings.
struct ProbeResult {
    double micro_f1 = 0.0;  // equals accuracy for single-label prediction
    double macro_f1 = 0.0;
    std::size_t train_size = 0, test_size = 0;
};
ProbeResult fit_probe(const Mat& features, const NodeLabels& labels, double train_fraction,
                      std::uint64_t seed);

// Node classification on concat(s, t): stratified train/test split of the
// labeled nodes, probe trained by full-batch gradient descent, Micro-F1 and
// Macro-F1 on the held-out part. Errors if a class is absent from the
// training split (resample with another seed).
MetricReport train_linear_probe(const DualEmbedding& emb, const NodeLabels& labels,
                                double train_fraction, std::uint64_t seed);

// Graph reconstruction: sample floor(fraction*N + 0.5) nodes; for each, rank
// every other node u by s_v . t_u (descending, ties by ascending id) and
// measure |top-k  intersect  out-neighbors| / k, averaged over the sample, for
// each k in ks (ascending). Denominator stays k even when out-degree < k.
MetricReport precision_at_k(const DualEmbedding& emb, const DirectedGraph& g,
                            double node_sample_fraction, std::span<const std::size_t> ks,
                            std::uint64_t seed);

// Mean and sample standard deviation of each metric across repeated runs of
// the same task. Settings are taken from the first report.
MetricReport aggregate_reports(std::span<const MetricReport> reports);

}  // namespace coba

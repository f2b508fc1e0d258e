#include "coba/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coba {

const char* to_string(EvalTask task) {
    switch (task) {
        case EvalTask::LinkPrediction: return "link_prediction";
        case EvalTask::NodeClassification: return "node_classification";
        case EvalTask::GraphReconstruction: return "graph_reconstruction";
    }
    return "?";
}

EvalTask parse_task(std::string_view s) {
    if (s == "link_prediction") return EvalTask::LinkPrediction;
    if (s == "node_classification") return EvalTask::NodeClassification;
    if (s == "graph_reconstruction") return EvalTask::GraphReconstruction;
    throw Error("unknown task: " + std::string(s));
}

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw Error("auc needs at least one positive and one negative score");
    // Average ranks over the pooled scores; U statistic from the positive
    // rank sum.
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> pool;
    pool.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) pool.push_back({s, true});
    for (double s : neg_scores) pool.push_back({s, false});
    std::sort(pool.begin(), pool.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].score == pool[i].score) ++j;
        // 1-based ranks i+1 .. j share the average rank.
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t)
            if (pool[t].positive) pos_rank_sum += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(pos_scores.size());
    const double q = static_cast<double>(neg_scores.size());
    const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * q);
}

MetricReport eval_link_prediction(const DualEmbedding& emb, const EvalSplit& split) {
    if (split.test_pos.empty()) throw Error("split has no test positives");
    if (split.test_neg.empty()) throw Error("split has no negatives; build them first");
    const auto n = static_cast<NodeId>(emb.source.rows());
    std::size_t reversed = 0;

    std::vector<double> pos, neg;
    pos.reserve(split.test_pos.size());
    neg.reserve(split.test_neg.size());
    auto check = [&](NodeId v) {
        if (v >= n) throw Error("edge endpoint " + std::to_string(v) + " outside embedding");
    };
    for (const Edge& e : split.test_pos) {
        check(e.src);
        check(e.dst);
        pos.push_back(score_edge(emb.source.row(e.src), emb.target.row(e.dst)));
    }
    for (const TaggedEdge& t : split.test_neg) {
        check(t.edge.src);
        check(t.edge.dst);
        neg.push_back(score_edge(emb.source.row(t.edge.src), emb.target.row(t.edge.dst)));
        if (t.kind == NegKind::Reversed) ++reversed;
    }

    MetricReport report;
    report.task = EvalTask::LinkPrediction;
    report.setting = {{"mix_ratio", split.mix_ratio},
                      {"num_pos", split.test_pos.size()},
                      {"num_neg", split.test_neg.size()},
                      {"num_reversed", reversed}};
    report.metrics["auc"] = auc(pos, neg);
    return report;
}

Mat concat_features(const DualEmbedding& emb) {
    if (emb.source.rows() != emb.target.rows() || emb.source.cols() != emb.target.cols())
        throw Error("source/target embedding shapes differ");
    Mat f(emb.source.rows(), emb.source.cols() + emb.target.cols());
    f << emb.source, emb.target;
    return f;
}

namespace {

// Per-class F1 from a confusion matrix; undefined ratios count as zero.
double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double denom = static_cast<double>(2 * tp + fp + fn);
    if (denom == 0.0) return 0.0;
    return 2.0 * static_cast<double>(tp) / denom;
}

}  // namespace

ProbeResult fit_probe(const Mat& features, const NodeLabels& labels, double train_fraction,
                      std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw Error("train_fraction must be in (0, 1)");
    if (features.rows() != static_cast<Eigen::Index>(labels.label.size()))
        throw Error("feature rows do not match label count");
    const int num_classes = labels.num_classes;
    if (num_classes < 2) throw Error("need at least two classes");

    // Stratified split: round(train_fraction * count) per class.
    std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t v = 0; v < labels.label.size(); ++v)
        if (labels.label[v] >= 0)
            by_class[static_cast<std::size_t>(labels.label[v])].push_back(
                static_cast<NodeId>(v));
    RandomStream rng = derive_stream(seed, "probe-split");
    std::vector<NodeId> train_ids, test_ids;
    for (int c = 0; c < num_classes; ++c) {
        auto& ids = by_class[static_cast<std::size_t>(c)];
        shuffle(ids, rng);
        const auto n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(ids.size()) + 0.5));
        if (n_train == 0)
            throw Error("class '" + labels.class_names.at(static_cast<std::size_t>(c)) +
                        "' absent from the training split; use another seed");
        train_ids.insert(train_ids.end(), ids.begin(),
                         ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_ids.insert(test_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                        ids.end());
    }
    if (test_ids.empty()) throw Error("probe test split is empty");

    const Eigen::Index d = features.cols();
    const auto n_train = static_cast<Eigen::Index>(train_ids.size());
    Mat x_train(n_train, d);
    for (Eigen::Index i = 0; i < n_train; ++i) x_train.row(i) = features.row(train_ids[i]);

    // Standardize with train statistics; constant columns pass through.
    RowVec mean = x_train.colwise().mean();
    RowVec std_dev =
        ((x_train.rowwise() - mean).array().square().colwise().sum() / double(n_train))
            .sqrt()
            .matrix();
    for (Eigen::Index c = 0; c < d; ++c)
        if (std_dev(c) == 0.0) std_dev(c) = 1.0;
    x_train = (x_train.rowwise() - mean).array().rowwise() / std_dev.array();

    Mat y_train = Mat::Zero(n_train, num_classes);
    for (Eigen::Index i = 0; i < n_train; ++i)
        y_train(i, labels.label[train_ids[static_cast<std::size_t>(i)]]) = 1.0;

    // Full-batch softmax regression, adaptive-moment updates, L2 on the
    // weights but not the bias.
    constexpr int kIterations = 200;
    constexpr double kL2 = 1e-4;
    constexpr double kLr = 0.1;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    Mat w = Mat::Zero(d, num_classes);
    RowVec b = RowVec::Zero(num_classes);
    Mat w_m = w, w_v = w;
    RowVec b_m = b, b_v = b;
    for (int it = 1; it <= kIterations; ++it) {
        Mat logits = (x_train * w).rowwise() + b;
        Mat probs = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
        probs.array().colwise() /= probs.rowwise().sum().array();
        const Mat delta = (probs - y_train) / static_cast<double>(n_train);
        const Mat gw = x_train.transpose() * delta + kL2 * w;
        const RowVec gb = delta.colwise().sum();
        const double bc1 = 1.0 - std::pow(kBeta1, it);
        const double bc2 = 1.0 - std::pow(kBeta2, it);
        w_m = kBeta1 * w_m + (1.0 - kBeta1) * gw;
        w_v = kBeta2 * w_v + (1.0 - kBeta2) * gw.cwiseProduct(gw);
        w.array() -= kLr * (w_m.array() / bc1) / ((w_v.array() / bc2).sqrt() + kEps);
        b_m = kBeta1 * b_m + (1.0 - kBeta1) * gb;
        b_v = kBeta2 * b_v + (1.0 - kBeta2) * gb.cwiseProduct(gb);
        b.array() -= kLr * (b_m.array() / bc1) / ((b_v.array() / bc2).sqrt() + kEps);
    }

    // Confusion counts on the held-out nodes; argmax ties resolve to the
    // lowest class id.
    std::vector<std::size_t> tp(static_cast<std::size_t>(num_classes), 0),
        fp(static_cast<std::size_t>(num_classes), 0), fn(static_cast<std::size_t>(num_classes), 0);
    std::size_t correct = 0;
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (NodeId v : test_ids) {
        RowVec x = ((features.row(v) - mean).array() / std_dev.array()).matrix();
        RowVec logits = x * w + b;
        int pred = 0;
        for (int c = 1; c < num_classes; ++c)
            if (logits(c) > logits(pred)) pred = c;
        const int truth = labels.label[v];
        seen[static_cast<std::size_t>(truth)] = true;
        seen[static_cast<std::size_t>(pred)] = true;
        if (pred == truth) {
            ++correct;
            ++tp[static_cast<std::size_t>(truth)];
        } else {
            ++fp[static_cast<std::size_t>(pred)];
            ++fn[static_cast<std::size_t>(truth)];
        }
    }

    ProbeResult result;
    result.train_size = train_ids.size();
    result.test_size = test_ids.size();
    result.micro_f1 = static_cast<double>(correct) / static_cast<double>(test_ids.size());
    double f1_sum = 0.0;
    std::size_t f1_classes = 0;
    for (int c = 0; c < num_classes; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        if (!seen[ci]) continue;  // class in neither truth nor prediction
        f1_sum += f1_of(tp[ci], fp[ci], fn[ci]);
        ++f1_classes;
    }
    result.macro_f1 = f1_classes ? f1_sum / static_cast<double>(f1_classes) : 0.0;
    return result;
}

MetricReport train_linear_probe(const DualEmbedding& emb, const NodeLabels& labels,
                                double train_fraction, std::uint64_t seed) {
    const ProbeResult r = fit_probe(concat_features(emb), labels, train_fraction, seed);
    MetricReport report;
    report.task = EvalTask::NodeClassification;
    report.setting = {{"train_fraction", train_fraction},
                      {"train_size", r.train_size},
                      {"test_size", r.test_size},
                      {"num_classes", labels.num_classes}};
    report.metrics["micro_f1"] = r.micro_f1;
    report.metrics["macro_f1"] = r.macro_f1;
    return report;
}

MetricReport precision_at_k(const DualEmbedding& emb, const DirectedGraph& g,
                            double node_sample_fraction, std::span<const std::size_t> ks,
                            std::uint64_t seed) {
    if (ks.empty()) throw Error("precision_at_k needs at least one k");
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1]) throw Error("ks must be strictly ascending");
    if (ks.front() == 0) throw Error("k must be positive");
    const NodeId n = g.num_nodes();
    if (emb.source.rows() != static_cast<Eigen::Index>(n))
        throw Error("embedding does not match graph size");

    const auto sample_size = static_cast<std::size_t>(
        std::floor(node_sample_fraction * static_cast<double>(n) + 0.5));
    if (sample_size == 0) throw Error("node sample is empty; raise node_sample_fraction");
    std::vector<NodeId> nodes(n);
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
    RandomStream rng = derive_stream(seed, "reconstruct");
    shuffle(nodes, rng);
    nodes.resize(sample_size);

    const std::size_t k_max = std::min<std::size_t>(ks.back(), n - 1);
    std::vector<double> precision_sum(ks.size(), 0.0);

    struct Cand {
        double score;
        NodeId id;
    };
    std::vector<Cand> cands;
    cands.reserve(n > 0 ? n - 1 : 0);
    for (NodeId v : nodes) {
        // One matrix-vector product scores v against every target embedding.
        const Eigen::VectorXd scores = emb.target * emb.source.row(v).transpose();
        cands.clear();
        for (NodeId u = 0; u < n; ++u)
            if (u != v) cands.push_back({scores(u), u});
        auto better = [](const Cand& a, const Cand& b) {
            return a.score > b.score || (a.score == b.score && a.id < b.id);
        };
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k_max),
                          cands.end(), better);

        const auto out = g.out_neighbors(v);
        std::size_t hits = 0, ki = 0;
        for (std::size_t rank = 0; rank < k_max; ++rank) {
            if (std::binary_search(out.begin(), out.end(), cands[rank].id)) ++hits;
            while (ki < ks.size() && rank + 1 == std::min<std::size_t>(ks[ki], k_max)) {
                precision_sum[ki] +=
                    static_cast<double>(hits) / static_cast<double>(ks[ki]);
                ++ki;
            }
        }
    }

    MetricReport report;
    report.task = EvalTask::GraphReconstruction;
    std::vector<std::size_t> ks_copy(ks.begin(), ks.end());
    report.setting = {{"node_sample_fraction", node_sample_fraction},
                      {"num_sampled", sample_size},
                      {"ks", ks_copy}};
    for (std::size_t i = 0; i < ks.size(); ++i)
        report.metrics["precision@" + std::to_string(ks[i])] =
            precision_sum[i] / static_cast<double>(sample_size);
    return report;
}

MetricReport aggregate_reports(std::span<const MetricReport> reports) {
    if (reports.empty()) throw Error("nothing to aggregate");
    MetricReport agg;
    agg.task = reports.front().task;
    agg.setting = reports.front().setting;
    agg.runs = reports.size();
    for (const auto& [name, first_value] : reports.front().metrics) {
        std::vector<double> values;
        values.reserve(reports.size());
        for (const MetricReport& r : reports) {
            if (r.task != agg.task) throw Error("cannot aggregate across tasks");
            values.push_back(r.metrics.at(name));
        }
        const double mean =
            std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        agg.metrics[name] = mean;
        agg.stddevs[name] =
            values.size() > 1 ? std::sqrt(var / double(values.size() - 1)) : 0.0;
    }
    return agg;
}

}  // namespace coba

#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "coba/eval.hpp"
#include "coba/rng.hpp"

using namespace coba;

namespace {

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos)
        for (double q : neg) wins += (p > q) ? 1.0 : (p == q ? 0.5 : 0.0);
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Random upper-triangular digraph: no reciprocal pairs, so every held-out
// edge is a reversal candidate.
DirectedGraph random_dag(NodeId n, std::size_t edges, std::uint64_t seed) {
    RandomStream rng = derive_stream(seed, "test-dag");
    std::set<std::uint64_t> seen;
    std::vector<Edge> es;
    while (es.size() < edges) {
        auto u = static_cast<NodeId>(rng.uniform_below(n));
        auto v = static_cast<NodeId>(rng.uniform_below(n));
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (!seen.insert(edge_key({u, v})).second) continue;
        es.push_back({u, v});
    }
    return make_graph(n, std::move(es));
}

// s_u[v] = logit_scale iff (u,v) is an edge, with one-hot targets: the
// decoder then recovers adjacency exactly.
DualEmbedding adjacency_embedding(const DirectedGraph& g, double logit_scale) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    DualEmbedding emb;
    emb.source = Mat::Zero(n, n);
    emb.target = Mat::Identity(n, n);
    for (const Edge& e : g.edges()) emb.source(e.src, e.dst) = logit_scale;
    return emb;
}

NodeLabels make_labels(std::vector<int> label, int num_classes) {
    NodeLabels labels;
    labels.label = std::move(label);
    labels.num_classes = num_classes;
    for (int c = 0; c < num_classes; ++c) labels.class_names.push_back("c" + std::to_string(c));
    return labels;
}

}  // namespace

TEST_CASE("auc closed forms") {
    CHECK(auc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}) == 1.0);
    CHECK(auc(std::vector<double>{0.1}, std::vector<double>{0.9}) == 0.0);
    CHECK(auc(std::vector<double>{0.5}, std::vector<double>{0.5}) == 0.5);
    // one win, one loss, no tie
    CHECK(auc(std::vector<double>{3.0, 1.0}, std::vector<double>{2.0}) == 0.5);
    // tie counts half: pairs (1>0), (1=1) -> 1.5/2
    CHECK(auc(std::vector<double>{1.0}, std::vector<double>{0.0, 1.0}) == 0.75);
    CHECK_THROWS_AS(auc({}, std::vector<double>{1.0}), Error);
    CHECK_THROWS_AS(auc(std::vector<double>{1.0}, {}), Error);
}

TEST_CASE("auc matches the pairwise definition on tied random scores") {
    RandomStream rng = derive_stream(99, "test-auc");
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> pos, neg;
        const std::size_t np = 1 + rng.uniform_below(40);
        const std::size_t nq = 1 + rng.uniform_below(40);
        // Quantized scores force plenty of exact ties.
        for (std::size_t i = 0; i < np; ++i)
            pos.push_back(std::floor(rng.next_double() * 10.0) / 10.0);
        for (std::size_t i = 0; i < nq; ++i)
            neg.push_back(std::floor(rng.next_double() * 10.0) / 10.0);
        CHECK(auc(pos, neg) == doctest::Approx(brute_auc(pos, neg)).epsilon(1e-12));
    }
}

TEST_CASE("auc is invariant under monotone transforms") {
    RandomStream rng = derive_stream(7, "test-auc");
    std::vector<double> pos, neg;
    for (int i = 0; i < 25; ++i) pos.push_back(rng.next_double() * 8.0 - 4.0);
    for (int i = 0; i < 35; ++i) neg.push_back(rng.next_double() * 8.0 - 4.0);
    auto squash = [](std::vector<double> v) {
        for (double& x : v) x = 1.0 / (1.0 + std::exp(-x));
        return v;
    };
    CHECK(auc(pos, neg) == auc(squash(pos), squash(neg)));
}

TEST_CASE("link prediction is perfect for an adjacency-exact embedding") {
    const DirectedGraph g = random_dag(16, 40, 1);
    EvalSplit split = split_edges(g, 0.3, 5);
    split = build_eval_negatives(std::move(split), g, 1.0, 5);
    const DualEmbedding emb = adjacency_embedding(g, 6.0);

    const MetricReport report = eval_link_prediction(emb, split);
    CHECK(report.task == EvalTask::LinkPrediction);
    CHECK(report.metrics.at("auc") == 1.0);
    CHECK(report.setting.at("mix_ratio") == 1.0);
    CHECK(report.setting.at("num_pos").get<std::size_t>() == split.test_pos.size());
    CHECK(report.setting.at("num_reversed").get<std::size_t>() == split.test_neg.size());
}

TEST_CASE("symmetric embeddings cannot tell direction") {
    // With S == T the score of every reversed negative equals the score of
    // its positive, so at 100% reversal the two score multisets coincide and
    // the rank statistic lands on exactly one half.
    const DirectedGraph g = random_dag(20, 60, 2);
    EvalSplit split = split_edges(g, 0.3, 3);
    split = build_eval_negatives(std::move(split), g, 1.0, 3);

    DualEmbedding emb;
    RandomStream rng = derive_stream(4, "test-sym");
    emb.source = Mat(20, 8);
    for (Eigen::Index i = 0; i < emb.source.size(); ++i)
        emb.source(i / 8, i % 8) = rng.next_double() * 2.0 - 1.0;
    emb.target = emb.source;

    const MetricReport report = eval_link_prediction(emb, split);
    CHECK(report.metrics.at("auc") == 0.5);
}

TEST_CASE("link prediction rejects an embedding of the wrong size") {
    const DirectedGraph g = random_dag(10, 20, 8);
    EvalSplit split = split_edges(g, 0.3, 1);
    split = build_eval_negatives(std::move(split), g, 0.0, 1);
    DualEmbedding emb;
    emb.source = Mat::Zero(4, 3);
    emb.target = Mat::Zero(4, 3);
    CHECK_THROWS_AS(eval_link_prediction(emb, split), Error);
}

TEST_CASE("concat features stacks source then target") {
    DualEmbedding emb;
    emb.source = Mat::Constant(3, 2, 1.0);
    emb.target = Mat::Constant(3, 2, 2.0);
    const Mat f = concat_features(emb);
    CHECK(f.rows() == 3);
    CHECK(f.cols() == 4);
    CHECK(f(0, 0) == 1.0);
    CHECK(f(0, 3) == 2.0);
    emb.target = Mat::Constant(4, 2, 2.0);
    CHECK_THROWS_AS(concat_features(emb), Error);
}

TEST_CASE("probe solves a linearly separable task exactly") {
    const int n = 30;
    std::vector<int> label(n);
    Mat features = Mat::Zero(n, 3);
    for (int i = 0; i < n; ++i) {
        label[i] = i % 3;
        features(i, label[i]) = 1.0;
    }
    const ProbeResult r = fit_probe(features, make_labels(label, 3), 0.7, 11);
    CHECK(r.micro_f1 == 1.0);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.train_size == 21);  // 7 of 10 per class
    CHECK(r.test_size == 9);
}

TEST_CASE("probe on constant features predicts the train majority") {
    // 20 nodes of class 0, 10 of class 1, all features identical: the probe
    // can only learn the prior, so on the stratified test split (6 + 3) it
    // scores micro 6/9 and macro (0.8 + 0)/2.
    const int n = 30;
    std::vector<int> label(n);
    for (int i = 0; i < n; ++i) label[i] = i < 20 ? 0 : 1;
    const Mat features = Mat::Ones(n, 4);
    const ProbeResult r = fit_probe(features, make_labels(label, 2), 0.7, 2);
    CHECK(r.train_size == 21);
    CHECK(r.test_size == 9);
    CHECK(r.micro_f1 == doctest::Approx(6.0 / 9.0).epsilon(1e-12));
    CHECK(r.macro_f1 == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(r.macro_f1 <= r.micro_f1);
}

TEST_CASE("probe refuses a class missing from the train split") {
    std::vector<int> label(12, 0);
    label[10] = 1;
    label[11] = 1;  // two members; at 0.2 train fraction none lands in train
    const Mat features = Mat::Ones(12, 2);
    CHECK_THROWS_AS(fit_probe(features, make_labels(label, 2), 0.2, 1), Error);
}

TEST_CASE("probe ignores unlabeled nodes") {
    std::vector<int> label(10, -1);
    Mat features = Mat::Zero(10, 2);
    for (int i = 0; i < 6; ++i) {
        label[i] = i % 2;
        features(i, label[i]) = 1.0;
    }
    const ProbeResult r = fit_probe(features, make_labels(label, 2), 0.7, 3);
    CHECK(r.train_size + r.test_size == 6);
    CHECK(r.micro_f1 == 1.0);
}

TEST_CASE("probe splits are seed-deterministic") {
    const int n = 40;
    std::vector<int> label(n);
    RandomStream rng = derive_stream(17, "test-probe");
    Mat features(n, 5);
    for (int i = 0; i < n; ++i) {
        label[i] = i % 4;
        for (int j = 0; j < 5; ++j) features(i, j) = rng.next_double();
        features(i, label[i] % 5) += 0.5;
    }
    const NodeLabels labels = make_labels(label, 4);
    const ProbeResult a = fit_probe(features, labels, 0.7, 21);
    const ProbeResult b = fit_probe(features, labels, 0.7, 21);
    CHECK(a.micro_f1 == b.micro_f1);
    CHECK(a.macro_f1 == b.macro_f1);
}

TEST_CASE("linear probe report carries the classification setting") {
    const int n = 24;
    std::vector<int> label(n);
    DualEmbedding emb;
    emb.source = Mat::Zero(n, 3);
    emb.target = Mat::Zero(n, 3);
    for (int i = 0; i < n; ++i) {
        label[i] = i % 3;
        emb.source(i, label[i]) = 1.0;
    }
    const MetricReport report = train_linear_probe(emb, make_labels(label, 3), 0.7, 4);
    CHECK(report.task == EvalTask::NodeClassification);
    CHECK(report.metrics.at("micro_f1") == 1.0);
    CHECK(report.metrics.at("macro_f1") == 1.0);
    CHECK(report.setting.at("train_fraction") == 0.7);
    CHECK(report.setting.at("num_classes") == 3);
}

TEST_CASE("precision at k against hand-computed values") {
    const DirectedGraph g = make_graph(5, {{0, 1}, {0, 2}, {1, 2}});
    const DualEmbedding emb = adjacency_embedding(g, 1.0);
    const std::vector<std::size_t> ks{1, 2, 3};
    const MetricReport report = precision_at_k(emb, g, 1.0, ks, 0);
    CHECK(report.task == EvalTask::GraphReconstruction);
    CHECK(report.setting.at("num_sampled") == 5);
    // Node 0 hits 1, 1, 2/3; node 1 hits 1, 1/2, 1/3; nodes 2-4 have no
    // out-edges and contribute zero.
    CHECK(report.metrics.at("precision@1") == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(report.metrics.at("precision@2") == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(report.metrics.at("precision@3") == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("precision keeps the nominal k in the denominator when clipped") {
    const DirectedGraph g = make_graph(5, {{0, 1}, {0, 2}, {1, 2}});
    const DualEmbedding emb = adjacency_embedding(g, 1.0);
    const std::vector<std::size_t> ks{10};
    const MetricReport report = precision_at_k(emb, g, 1.0, ks, 0);
    // Only 4 candidates exist per node; hits are 2 (node 0) and 1 (node 1),
    // still divided by the requested 10.
    CHECK(report.metrics.at("precision@10") == doctest::Approx(0.06).epsilon(1e-12));
}

TEST_CASE("score ties break toward the lower node id") {
    const DirectedGraph g = make_graph(4, {{3, 2}});
    DualEmbedding emb;
    emb.source = Mat::Zero(4, 4);
    emb.target = Mat::Identity(4, 4);
    emb.source.row(3).setOnes();  // node 3 scores every candidate equally
    const std::vector<std::size_t> ks{1};
    const MetricReport tied = precision_at_k(emb, g, 1.0, ks, 0);
    CHECK(tied.metrics.at("precision@1") == 0.0);  // id 0 outranks the true neighbor

    emb.source.row(3).setZero();
    emb.source(3, 2) = 1.0;  // break the tie in favor of the true neighbor
    const MetricReport scored = precision_at_k(emb, g, 1.0, ks, 0);
    CHECK(scored.metrics.at("precision@1") == 0.25);
}

TEST_CASE("precision node sampling is seed-deterministic") {
    const DirectedGraph g = random_dag(30, 80, 5);
    const DualEmbedding emb = adjacency_embedding(g, 2.0);
    const std::vector<std::size_t> ks{2, 5};
    const MetricReport a = precision_at_k(emb, g, 0.5, ks, 9);
    const MetricReport b = precision_at_k(emb, g, 0.5, ks, 9);
    CHECK(a.metrics == b.metrics);
    CHECK(a.setting.at("num_sampled") == 15);
}

TEST_CASE("precision validates its k list") {
    const DirectedGraph g = make_graph(3, {{0, 1}});
    const DualEmbedding emb = adjacency_embedding(g, 1.0);
    CHECK_THROWS_AS(precision_at_k(emb, g, 1.0, std::vector<std::size_t>{}, 0), Error);
    CHECK_THROWS_AS(precision_at_k(emb, g, 1.0, std::vector<std::size_t>{0, 2}, 0), Error);
    CHECK_THROWS_AS(precision_at_k(emb, g, 1.0, std::vector<std::size_t>{3, 3}, 0), Error);
    CHECK_THROWS_AS(precision_at_k(emb, g, 0.01, std::vector<std::size_t>{1}, 0), Error);
}

TEST_CASE("aggregation reports mean and sample deviation") {
    MetricReport a, b;
    a.task = b.task = EvalTask::LinkPrediction;
    a.setting = {{"mix_ratio", 0.5}};
    a.metrics["auc"] = 0.8;
    b.metrics["auc"] = 0.6;
    const std::vector<MetricReport> reports{a, b};
    const MetricReport agg = aggregate_reports(reports);
    CHECK(agg.runs == 2);
    CHECK(agg.metrics.at("auc") == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(agg.stddevs.at("auc") == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
    CHECK(agg.setting.at("mix_ratio") == 0.5);

    const std::vector<MetricReport> one{a};
    CHECK(aggregate_reports(one).stddevs.at("auc") == 0.0);

    MetricReport other = b;
    other.task = EvalTask::NodeClassification;
    const std::vector<MetricReport> mixed{a, other};
    CHECK_THROWS_AS(aggregate_reports(mixed), Error);
    CHECK_THROWS_AS(aggregate_reports({}), Error);
}

TEST_CASE("task names round trip") {
    for (auto task : {EvalTask::LinkPrediction, EvalTask::NodeClassification,
                      EvalTask::GraphReconstruction})
        CHECK(parse_task(to_string(task)) == task);
    CHECK_THROWS_AS(parse_task("frobnication"), Error);
}

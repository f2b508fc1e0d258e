#include "coba/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace coba {

namespace {

void sort_unique(std::vector<NodeId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

int row_of(const std::vector<NodeId>& sorted_nodes, NodeId v) {
    auto it = std::lower_bound(sorted_nodes.begin(), sorted_nodes.end(), v);
    if (it == sorted_nodes.end() || *it != v)
        throw Error("internal: node " + std::to_string(v) + " missing from batch level");
    return static_cast<int>(it - sorted_nodes.begin());
}

// log(1 + e^x) without overflow on either tail.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Mat gather_rows(const Mat& table, const std::vector<NodeId>& rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), table.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = table.row(rows[i]);
    return out;
}

void apply_activation_inplace(Mat& m, Activation act) {
    switch (act) {
        case Activation::Relu: m = m.cwiseMax(0.0); break;
        case Activation::Tanh: m = m.array().tanh().matrix(); break;
        case Activation::Identity: break;
    }
}

// d(act)/d(pre), elementwise, from the cached pre/post activations.
Mat activation_derivative(const Mat& pre, const Mat& post, Activation act) {
    switch (act) {
        case Activation::Relu: return (pre.array() > 0.0).cast<double>().matrix();
        case Activation::Tanh: return (1.0 - post.array().square()).matrix();
        case Activation::Identity: return Mat::Ones(pre.rows(), pre.cols());
    }
    throw Error("unknown activation");
}

}  // namespace

void TrainConfig::validate() const {
    if (dim <= 0) throw Error("dim must be positive");
    if (epochs < 0) throw Error("epochs must be >= 0");
    if (layers <= 0) throw Error("layers must be positive");
    if (learning_rate <= 0.0) throw Error("learning_rate must be positive");
    if (batch_size == 0) throw Error("batch_size must be positive");
    if (negatives_per_node == 0) throw Error("negatives_per_node must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0, 1)");
    if (weight_decay < 0.0) throw Error("weight_decay must be >= 0");
}

nlohmann::ordered_json config_to_json(const TrainConfig& cfg) {
    return nlohmann::ordered_json{{"dim", cfg.dim},
                                  {"epochs", cfg.epochs},
                                  {"layers", cfg.layers},
                                  {"neighbor_fan_out", cfg.neighbor_fan_out},
                                  {"negatives_per_node", cfg.negatives_per_node},
                                  {"learning_rate", cfg.learning_rate},
                                  {"batch_size", cfg.batch_size},
                                  {"seed", cfg.seed},
                                  {"mode", to_string(cfg.mode)},
                                  {"activation", to_string(cfg.activation)},
                                  {"weight_decay", cfg.weight_decay},
                                  {"dropout", cfg.dropout},
                                  {"freeze_tables", cfg.freeze_tables}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.dim = j.value("dim", cfg.dim);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.neighbor_fan_out = j.value("neighbor_fan_out", cfg.neighbor_fan_out);
    cfg.negatives_per_node = j.value("negatives_per_node", cfg.negatives_per_node);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("activation"))
        cfg.activation = parse_activation(j.at("activation").get<std::string>());
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.freeze_tables = j.value("freeze_tables", cfg.freeze_tables);
    return cfg;
}

double bce_loss(std::span<const double> pos_logits, std::span<const double> neg_logits) {
    if (pos_logits.empty() || neg_logits.empty())
        throw Error("bce_loss needs at least one positive and one negative logit");
    double pos = 0.0, neg = 0.0;
    for (double z : pos_logits) pos += softplus(-z);
    for (double z : neg_logits) neg += softplus(z);
    return pos / static_cast<double>(pos_logits.size()) +
           neg / static_cast<double>(neg_logits.size());
}

double BatchForward::logit(std::size_t level, NodeId u, NodeId v) const {
    const Level& lv = levels.at(level);
    return edge_logit(lv.source_values.row(row_of(lv.source_nodes, u)),
                      lv.target_values.row(row_of(lv.target_nodes, v)));
}

BatchForward forward_batch(const ModelParams& params, const NeighborhoodPlan& plan,
                           AggregationMode mode, const EdgeBatch& batch, double dropout,
                           RandomStream* dropout_rng) {
    const int L = params.layers();
    const int d = params.dim();
    if (static_cast<int>(plan.layers.size()) != L)
        throw Error("neighborhood plan has " + std::to_string(plan.layers.size()) +
                    " layers, model expects " + std::to_string(L));
    const bool collab = mode != AggregationMode::NoReverseNoCollab;
    const int in_dim = ModelParams::weight_input_dim(mode, d);
    const bool masking = dropout > 0.0 && dropout_rng != nullptr;
    const double keep_scale = masking ? 1.0 / (1.0 - dropout) : 1.0;

    // Which nodes each level must evaluate, walking demand down from the
    // batch endpoints through neighbor samples and (with collaboration)
    // the opposite-side cross terms.
    std::vector<std::vector<NodeId>> need_s(L + 1), need_t(L + 1);
    for (const Edge& e : batch.positives) {
        need_s[L].push_back(e.src);
        need_t[L].push_back(e.dst);
    }
    for (const Edge& e : batch.negatives) {
        need_s[L].push_back(e.src);
        need_t[L].push_back(e.dst);
    }
    sort_unique(need_s[L]);
    sort_unique(need_t[L]);
    for (int l = L; l >= 1; --l) {
        const LayerSamples& samples = plan.layers[l - 1];
        for (NodeId v : need_s[l]) {
            need_s[l - 1].push_back(v);
            if (collab) need_t[l - 1].push_back(v);
            for (NodeId u : samples.nodes.at(v).source_side) need_s[l - 1].push_back(u);
        }
        for (NodeId v : need_t[l]) {
            need_t[l - 1].push_back(v);
            if (collab) need_s[l - 1].push_back(v);
            for (NodeId u : samples.nodes.at(v).target_side) need_t[l - 1].push_back(u);
        }
        sort_unique(need_s[l - 1]);
        sort_unique(need_t[l - 1]);
    }

    BatchForward fwd;
    fwd.levels.resize(static_cast<std::size_t>(L) + 1);
    fwd.levels[0].source_nodes = std::move(need_s[0]);
    fwd.levels[0].target_nodes = std::move(need_t[0]);
    fwd.levels[0].source_values = gather_rows(params.source_init, fwd.levels[0].source_nodes);
    fwd.levels[0].target_values = gather_rows(params.target_init, fwd.levels[0].target_nodes);

    for (int l = 1; l <= L; ++l) {
        BatchForward::Level& prev = fwd.levels[static_cast<std::size_t>(l) - 1];
        BatchForward::Level& cur = fwd.levels[static_cast<std::size_t>(l)];
        cur.source_nodes = std::move(need_s[l]);
        cur.target_nodes = std::move(need_t[l]);
        const LayerSamples& samples = plan.layers[l - 1];

        auto build_side = [&](const std::vector<NodeId>& nodes, bool source) -> Mat {
            Mat x = Mat::Zero(static_cast<Eigen::Index>(nodes.size()), in_dim);
            for (std::size_t r = 0; r < nodes.size(); ++r) {
                const NodeId v = nodes[r];
                const Eigen::Index row = static_cast<Eigen::Index>(r);
                const Mat& own_prev = source ? prev.source_values : prev.target_values;
                const Mat& cross_prev = source ? prev.target_values : prev.source_values;
                const std::vector<NodeId>& own_nodes =
                    source ? prev.source_nodes : prev.target_nodes;
                const std::vector<NodeId>& cross_nodes =
                    source ? prev.target_nodes : prev.source_nodes;
                const std::vector<NodeId>& sample = source ? samples.nodes.at(v).source_side
                                                           : samples.nodes.at(v).target_side;
                x.block(row, 0, 1, d) = own_prev.row(row_of(own_nodes, v));
                int col = d;
                if (collab) {
                    x.block(row, col, 1, d) = cross_prev.row(row_of(cross_nodes, v));
                    col += d;
                }
                if (!sample.empty()) {
                    RowVec agg = RowVec::Zero(d);
                    for (NodeId u : sample) agg += own_prev.row(row_of(own_nodes, u));
                    x.block(row, col, 1, d) = agg / static_cast<double>(sample.size());
                }
            }
            return x;
        };

        cur.source_input = build_side(cur.source_nodes, /*source=*/true);
        cur.target_input = build_side(cur.target_nodes, /*source=*/false);
        if (masking) {
            auto draw_mask = [&](Eigen::Index rows) {
                Mat m(rows, in_dim);
                for (Eigen::Index i = 0; i < rows; ++i)
                    for (Eigen::Index c = 0; c < in_dim; ++c)
                        m(i, c) = dropout_rng->next_double() < dropout ? 0.0 : keep_scale;
                return m;
            };
            cur.source_mask = draw_mask(cur.source_input.rows());
            cur.target_mask = draw_mask(cur.target_input.rows());
            cur.source_input = cur.source_input.cwiseProduct(cur.source_mask);
            cur.target_input = cur.target_input.cwiseProduct(cur.target_mask);
        }
        cur.source_pre = cur.source_input * params.source_weights[static_cast<std::size_t>(l) - 1];
        cur.target_pre = cur.target_input * params.target_weights[static_cast<std::size_t>(l) - 1];
        cur.source_values = cur.source_pre;
        cur.target_values = cur.target_pre;
        apply_activation_inplace(cur.source_values, params.activation);
        apply_activation_inplace(cur.target_values, params.activation);
    }

    const BatchForward::Level& top = fwd.levels.back();
    fwd.pos_logits.reserve(batch.positives.size());
    fwd.neg_logits.reserve(batch.negatives.size());
    for (const Edge& e : batch.positives) {
        const double z = edge_logit(top.source_values.row(row_of(top.source_nodes, e.src)),
                                    top.target_values.row(row_of(top.target_nodes, e.dst)));
        fwd.pos_logits.push_back(z);
        fwd.pos_term += softplus(-z);
    }
    for (const Edge& e : batch.negatives) {
        const double z = edge_logit(top.source_values.row(row_of(top.source_nodes, e.src)),
                                    top.target_values.row(row_of(top.target_nodes, e.dst)));
        fwd.neg_logits.push_back(z);
        fwd.neg_term += softplus(z);
    }
    if (!batch.positives.empty()) fwd.pos_term /= static_cast<double>(batch.positives.size());
    if (!batch.negatives.empty()) fwd.neg_term /= static_cast<double>(batch.negatives.size());
    fwd.loss = fwd.pos_term + fwd.neg_term;
    return fwd;
}

Gradients backward(const ModelParams& params, const NeighborhoodPlan& plan,
                   AggregationMode mode, const EdgeBatch& batch, const BatchForward& fwd) {
    const int L = params.layers();
    const int d = params.dim();
    const bool collab = mode != AggregationMode::NoReverseNoCollab;

    Gradients grads;
    grads.source_weight_grads.reserve(static_cast<std::size_t>(L));
    grads.target_weight_grads.reserve(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
        grads.source_weight_grads.push_back(
            Mat::Zero(params.source_weights[static_cast<std::size_t>(l)].rows(), d));
        grads.target_weight_grads.push_back(
            Mat::Zero(params.target_weights[static_cast<std::size_t>(l)].rows(), d));
    }

    std::vector<Mat> d_source(static_cast<std::size_t>(L) + 1),
        d_target(static_cast<std::size_t>(L) + 1);
    for (int l = 0; l <= L; ++l) {
        const BatchForward::Level& lv = fwd.levels[static_cast<std::size_t>(l)];
        d_source[static_cast<std::size_t>(l)] = Mat::Zero(lv.source_values.rows(), d);
        d_target[static_cast<std::size_t>(l)] = Mat::Zero(lv.target_values.rows(), d);
    }

    // Top level: dL/dz is sigmoid(z)-1 for positives, sigmoid(z) for
    // negatives, each averaged over its own count.
    const BatchForward::Level& top = fwd.levels.back();
    const double pos_w =
        batch.positives.empty() ? 0.0 : 1.0 / static_cast<double>(batch.positives.size());
    const double neg_w =
        batch.negatives.empty() ? 0.0 : 1.0 / static_cast<double>(batch.negatives.size());
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        const Edge& e = batch.positives[i];
        const int ru = row_of(top.source_nodes, e.src);
        const int rv = row_of(top.target_nodes, e.dst);
        const double dz = (sigmoid(fwd.pos_logits[i]) - 1.0) * pos_w;
        d_source.back().row(ru) += dz * top.target_values.row(rv);
        d_target.back().row(rv) += dz * top.source_values.row(ru);
    }
    for (std::size_t i = 0; i < batch.negatives.size(); ++i) {
        const Edge& e = batch.negatives[i];
        const int ru = row_of(top.source_nodes, e.src);
        const int rv = row_of(top.target_nodes, e.dst);
        const double dz = sigmoid(fwd.neg_logits[i]) * neg_w;
        d_source.back().row(ru) += dz * top.target_values.row(rv);
        d_target.back().row(rv) += dz * top.source_values.row(ru);
    }

    for (int l = L; l >= 1; --l) {
        const BatchForward::Level& cur = fwd.levels[static_cast<std::size_t>(l)];
        const BatchForward::Level& prev = fwd.levels[static_cast<std::size_t>(l) - 1];
        const LayerSamples& samples = plan.layers[static_cast<std::size_t>(l) - 1];

        auto back_side = [&](bool source) {
            const Mat& d_out = source ? d_source[static_cast<std::size_t>(l)]
                                      : d_target[static_cast<std::size_t>(l)];
            const Mat& pre = source ? cur.source_pre : cur.target_pre;
            const Mat& post = source ? cur.source_values : cur.target_values;
            const Mat& input = source ? cur.source_input : cur.target_input;
            const Mat& mask = source ? cur.source_mask : cur.target_mask;
            const Mat& weight = source ? params.source_weights[static_cast<std::size_t>(l) - 1]
                                       : params.target_weights[static_cast<std::size_t>(l) - 1];
            Mat& d_weight = source ? grads.source_weight_grads[static_cast<std::size_t>(l) - 1]
                                   : grads.target_weight_grads[static_cast<std::size_t>(l) - 1];
            const std::vector<NodeId>& nodes = source ? cur.source_nodes : cur.target_nodes;
            const std::vector<NodeId>& own_prev_nodes =
                source ? prev.source_nodes : prev.target_nodes;
            const std::vector<NodeId>& cross_prev_nodes =
                source ? prev.target_nodes : prev.source_nodes;
            Mat& d_own_prev = source ? d_source[static_cast<std::size_t>(l) - 1]
                                     : d_target[static_cast<std::size_t>(l) - 1];
            Mat& d_cross_prev = source ? d_target[static_cast<std::size_t>(l) - 1]
                                       : d_source[static_cast<std::size_t>(l) - 1];

            const Mat d_pre =
                d_out.cwiseProduct(activation_derivative(pre, post, params.activation));
            d_weight += input.transpose() * d_pre;
            Mat d_in = d_pre * weight.transpose();
            if (mask.size() > 0) d_in = d_in.cwiseProduct(mask);

            for (std::size_t r = 0; r < nodes.size(); ++r) {
                const NodeId v = nodes[r];
                const Eigen::Index row = static_cast<Eigen::Index>(r);
                d_own_prev.row(row_of(own_prev_nodes, v)) += d_in.block(row, 0, 1, d);
                int col = d;
                if (collab) {
                    d_cross_prev.row(row_of(cross_prev_nodes, v)) += d_in.block(row, col, 1, d);
                    col += d;
                }
                const std::vector<NodeId>& sample = source ? samples.nodes.at(v).source_side
                                                           : samples.nodes.at(v).target_side;
                if (!sample.empty()) {
                    const RowVec share =
                        d_in.block(row, col, 1, d) / static_cast<double>(sample.size());
                    for (NodeId u : sample) d_own_prev.row(row_of(own_prev_nodes, u)) += share;
                }
            }
        };
        back_side(/*source=*/true);
        back_side(/*source=*/false);
    }

    grads.source_rows = fwd.levels[0].source_nodes;
    grads.target_rows = fwd.levels[0].target_nodes;
    grads.source_row_grads = std::move(d_source[0]);
    grads.target_row_grads = std::move(d_target[0]);
    return grads;
}

double batch_loss(const ModelParams& params, const NeighborhoodPlan& plan, AggregationMode mode,
                  const EdgeBatch& batch) {
    return forward_batch(params, plan, mode, batch).loss;
}

double Gradients::squared_norm() const {
    double s = 0.0;
    for (const Mat& m : source_weight_grads) s += m.squaredNorm();
    for (const Mat& m : target_weight_grads) s += m.squaredNorm();
    s += source_row_grads.squaredNorm();
    s += target_row_grads.squaredNorm();
    return s;
}

bool Gradients::is_finite() const {
    for (const Mat& m : source_weight_grads)
        if (!m.allFinite()) return false;
    for (const Mat& m : target_weight_grads)
        if (!m.allFinite()) return false;
    return source_row_grads.allFinite() && target_row_grads.allFinite();
}

RowVec Gradients::source_row_grad(NodeId v, int dim) const {
    auto it = std::lower_bound(source_rows.begin(), source_rows.end(), v);
    if (it == source_rows.end() || *it != v) return RowVec::Zero(dim);
    return source_row_grads.row(it - source_rows.begin());
}

RowVec Gradients::target_row_grad(NodeId v, int dim) const {
    auto it = std::lower_bound(target_rows.begin(), target_rows.end(), v);
    if (it == target_rows.end() || *it != v) return RowVec::Zero(dim);
    return target_row_grads.row(it - target_rows.begin());
}

AdamState::AdamState(const ModelParams& params, AdamConfig cfg) : cfg_(cfg) {
    for (const Mat& w : params.source_weights) {
        ws_m_.push_back(Mat::Zero(w.rows(), w.cols()));
        ws_v_.push_back(Mat::Zero(w.rows(), w.cols()));
    }
    for (const Mat& w : params.target_weights) {
        wt_m_.push_back(Mat::Zero(w.rows(), w.cols()));
        wt_v_.push_back(Mat::Zero(w.rows(), w.cols()));
    }
    s_m_ = Mat::Zero(params.source_init.rows(), params.source_init.cols());
    s_v_ = s_m_;
    t_m_ = Mat::Zero(params.target_init.rows(), params.target_init.cols());
    t_v_ = t_m_;
}

void AdamState::step(ModelParams& params, const Gradients& grads, double learning_rate,
                     double weight_decay) {
    if (!grads.is_finite()) throw Error("non-finite gradient; aborting optimizer step");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));

    auto dense_update = [&](Mat& param, Mat& m, Mat& v, const Mat& grad) {
        Mat g = grad;
        if (weight_decay > 0.0) g += weight_decay * param;
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        param.array() -=
            learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
    };
    for (std::size_t l = 0; l < params.source_weights.size(); ++l)
        dense_update(params.source_weights[l], ws_m_[l], ws_v_[l],
                     grads.source_weight_grads.at(l));
    for (std::size_t l = 0; l < params.target_weights.size(); ++l)
        dense_update(params.target_weights[l], wt_m_[l], wt_v_[l],
                     grads.target_weight_grads.at(l));

    if (params.tables_frozen) return;
    auto sparse_update = [&](Mat& table, Mat& m, Mat& v, const std::vector<NodeId>& rows,
                             const Mat& row_grads) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Eigen::Index r = rows[i];
            RowVec g = row_grads.row(static_cast<Eigen::Index>(i));
            if (weight_decay > 0.0) g += weight_decay * table.row(r);
            m.row(r) = cfg_.beta1 * m.row(r) + (1.0 - cfg_.beta1) * g;
            v.row(r) = cfg_.beta2 * v.row(r) + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            table.row(r).array() -=
                learning_rate * (m.row(r).array() / bc1) /
                ((v.row(r).array() / bc2).sqrt() + cfg_.eps);
        }
    };
    sparse_update(params.source_init, s_m_, s_v_, grads.source_rows, grads.source_row_grads);
    sparse_update(params.target_init, t_m_, t_v_, grads.target_rows, grads.target_row_grads);
}

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error("truncated checkpoint");
    return v;
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error("truncated checkpoint");
    return v;
}

void write_mat(std::ostream& out, const Mat& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    write_u64(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

Mat read_mat(std::istream& in) {
    const auto rows = static_cast<Eigen::Index>(read_u64(in));
    const auto cols = static_cast<Eigen::Index>(read_u64(in));
    Mat m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw Error("truncated checkpoint");
    return m;
}

constexpr std::uint64_t kCheckpointMagic = 0x434f424143503031ULL;  // "COBACP01"

}  // namespace

void AdamState::save(std::ostream& out) const {
    write_f64(out, cfg_.beta1);
    write_f64(out, cfg_.beta2);
    write_f64(out, cfg_.eps);
    write_u64(out, static_cast<std::uint64_t>(step_count_));
    write_u64(out, ws_m_.size());
    for (std::size_t l = 0; l < ws_m_.size(); ++l) {
        write_mat(out, ws_m_[l]);
        write_mat(out, ws_v_[l]);
        write_mat(out, wt_m_[l]);
        write_mat(out, wt_v_[l]);
    }
    write_mat(out, s_m_);
    write_mat(out, s_v_);
    write_mat(out, t_m_);
    write_mat(out, t_v_);
}

AdamState AdamState::load(std::istream& in, const ModelParams& params) {
    AdamConfig cfg;
    cfg.beta1 = read_f64(in);
    cfg.beta2 = read_f64(in);
    cfg.eps = read_f64(in);
    AdamState state(params, cfg);
    state.step_count_ = static_cast<std::int64_t>(read_u64(in));
    const std::uint64_t layers = read_u64(in);
    if (layers != state.ws_m_.size()) throw Error("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
        state.ws_m_[l] = read_mat(in);
        state.ws_v_[l] = read_mat(in);
        state.wt_m_[l] = read_mat(in);
        state.wt_v_[l] = read_mat(in);
    }
    state.s_m_ = read_mat(in);
    state.s_v_ = read_mat(in);
    state.t_m_ = read_mat(in);
    state.t_v_ = read_mat(in);
    return state;
}

void save_checkpoint(const std::filesystem::path& file, int epoch, const TrainConfig& cfg,
                     const ModelParams& params, const AdamState& adam) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + file.string());
    write_u64(out, kCheckpointMagic);
    const std::string cfg_json = config_to_json(cfg).dump();
    write_u64(out, cfg_json.size());
    out.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
    write_u64(out, static_cast<std::uint64_t>(epoch));
    write_u64(out, params.source_weights.size());
    for (std::size_t l = 0; l < params.source_weights.size(); ++l) {
        write_mat(out, params.source_weights[l]);
        write_mat(out, params.target_weights[l]);
    }
    write_mat(out, params.source_init);
    write_mat(out, params.target_init);
    adam.save(out);
    if (!out) throw Error("short write while saving checkpoint: " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + file.string());
    if (read_u64(in) != kCheckpointMagic)
        throw Error("not a checkpoint file: " + file.string());
    const std::uint64_t cfg_len = read_u64(in);
    std::string cfg_json(cfg_len, '\0');
    in.read(cfg_json.data(), static_cast<std::streamsize>(cfg_len));
    if (!in) throw Error("truncated checkpoint");
    const TrainConfig cfg = config_from_json(nlohmann::json::parse(cfg_json));

    const int epoch = static_cast<int>(read_u64(in));
    ModelParams params;
    params.activation = cfg.activation;
    params.tables_frozen = cfg.freeze_tables;
    const std::uint64_t layers = read_u64(in);
    for (std::uint64_t l = 0; l < layers; ++l) {
        params.source_weights.push_back(read_mat(in));
        params.target_weights.push_back(read_mat(in));
    }
    params.source_init = read_mat(in);
    params.target_init = read_mat(in);
    AdamState adam = AdamState::load(in, params);
    return Checkpoint{epoch, cfg, std::move(params), std::move(adam)};
}

TrainResult train(const DirectedGraph& train_graph, const TrainConfig& cfg,
                  const TrainOptions& opts) {
    cfg.validate();
    if (train_graph.num_nodes() == 0) throw Error("cannot train on an empty graph");
    const std::vector<Edge> all_edges = train_graph.edges();
    if (all_edges.empty()) throw Error("cannot train on a graph with no edges");
    const DegreeIndex idx = degree_index(train_graph);

    ModelParams params = init_model(train_graph.num_nodes(), cfg.dim, cfg.layers, cfg.mode,
                                    cfg.seed, cfg.activation, opts.features, cfg.freeze_tables);
    AdamState adam(params);
    ModelParams snapshot = params;  // end of last finished epoch

    TrainResult result;
    const std::size_t num_batches =
        (all_edges.size() + cfg.batch_size - 1) / cfg.batch_size;

    auto checkpoint_path = [&](int epoch) {
        char name[40];
        std::snprintf(name, sizeof name, "checkpoint_epoch%04d.bin", epoch);
        return opts.checkpoint_dir / name;
    };
    if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        RandomStream plan_rng = derive_stream(cfg.seed, "neighbor", static_cast<std::uint64_t>(epoch));
        const NeighborhoodPlan plan = sample_plan(train_graph, idx, cfg.mode,
                                                  cfg.neighbor_fan_out, cfg.layers, plan_rng);
        RandomStream neg_rng = derive_stream(cfg.seed, "negative", static_cast<std::uint64_t>(epoch));
        const NegativeBatch negs =
            sample_training_negatives(train_graph, cfg.negatives_per_node, neg_rng);
        std::vector<Edge> negatives = negs.source_side;
        negatives.insert(negatives.end(), negs.target_side.begin(), negs.target_side.end());

        RandomStream batch_rng = derive_stream(cfg.seed, "batch", static_cast<std::uint64_t>(epoch));
        std::vector<Edge> positives = all_edges;
        shuffle(positives, batch_rng);
        shuffle(negatives, batch_rng);
        RandomStream drop_rng = derive_stream(cfg.seed, "dropout", static_cast<std::uint64_t>(epoch));
        RandomStream* drop_ptr = cfg.dropout > 0.0 ? &drop_rng : nullptr;

        double pos_sum = 0.0, neg_sum = 0.0, grad_norm_sum = 0.0;
        std::size_t pos_count = 0, neg_count = 0;
        bool epoch_ok = true;

        for (std::size_t b = 0; b < num_batches; ++b) {
            EdgeBatch batch;
            const std::size_t p_lo = b * cfg.batch_size;
            const std::size_t p_hi = std::min(p_lo + cfg.batch_size, positives.size());
            batch.positives.assign(positives.begin() + static_cast<std::ptrdiff_t>(p_lo),
                                   positives.begin() + static_cast<std::ptrdiff_t>(p_hi));
            const std::size_t n_lo = b * negatives.size() / num_batches;
            const std::size_t n_hi = (b + 1) * negatives.size() / num_batches;
            batch.negatives.assign(negatives.begin() + static_cast<std::ptrdiff_t>(n_lo),
                                   negatives.begin() + static_cast<std::ptrdiff_t>(n_hi));

            const BatchForward fwd =
                forward_batch(params, plan, cfg.mode, batch, cfg.dropout, drop_ptr);
            if (!std::isfinite(fwd.loss)) {
                epoch_ok = false;
                break;
            }
            const Gradients grads = backward(params, plan, cfg.mode, batch, fwd);
            try {
                adam.step(params, grads, cfg.learning_rate, cfg.weight_decay);
            } catch (const Error&) {
                epoch_ok = false;
                break;
            }
            pos_sum += fwd.pos_term * static_cast<double>(batch.positives.size());
            neg_sum += fwd.neg_term * static_cast<double>(batch.negatives.size());
            pos_count += batch.positives.size();
            neg_count += batch.negatives.size();
            grad_norm_sum += std::sqrt(grads.squared_norm());
        }

        if (!epoch_ok) {
            params = snapshot;
            result.diverged = true;
            break;
        }

        LossReport report;
        report.epoch = epoch;
        report.pos_term = pos_count ? pos_sum / static_cast<double>(pos_count) : 0.0;
        report.neg_term = neg_count ? neg_sum / static_cast<double>(neg_count) : 0.0;
        report.mean_loss = report.pos_term + report.neg_term;
        report.grad_norm = grad_norm_sum / static_cast<double>(num_batches);
        result.reports.push_back(report);
        if (opts.on_epoch) opts.on_epoch(report);
        snapshot = params;
        result.completed_epochs = epoch;

        if (!opts.checkpoint_dir.empty() && opts.checkpoint_every > 0 &&
            epoch % opts.checkpoint_every == 0)
            save_checkpoint(checkpoint_path(epoch), epoch, cfg, params, adam);
    }

    if (!opts.checkpoint_dir.empty())
        save_checkpoint(checkpoint_path(result.completed_epochs), result.completed_epochs, cfg,
                        params, adam);

    const NeighborhoodPlan full_plan =
        full_neighborhood_plan(train_graph, idx, cfg.mode, cfg.layers);
    result.embedding = forward(params, full_plan, cfg.mode);
    result.params = std::move(params);
    return result;
}

}  // namespace coba

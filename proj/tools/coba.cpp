// Command-line driver: prepare / train / eval {lp,nc,gr} / ablate / sweep.
// Every command writes its run manifest before computing, so a directory
// holding a manifest but no results marks an interrupted run.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coba/eval.hpp"
#include "coba/manifest.hpp"
#include "coba/training.hpp"

namespace fs = std::filesystem;
using namespace coba;

namespace {

constexpr int kExitError = 2;
constexpr int kExitDiverged = 3;

// ---------------------------------------------------------------------------
// Config resolution: built-in defaults, overridden by --config key=value
// file, overridden by explicit flags.

struct ConfigFlags {
    std::string config_file;
    std::optional<int> dim, epochs, layers, fan_out, negatives, batch_size;
    std::optional<double> lr, weight_decay, dropout;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, activation;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool with_seed) {
    cmd->add_option("--config", f.config_file, "key=value config file");
    cmd->add_option("--dim", f.dim, "embedding dimension");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--layers", f.layers, "aggregation layers");
    cmd->add_option("--fan-out", f.fan_out, "sampled neighbors per node (0 = all)");
    cmd->add_option("--negatives", f.negatives, "training negatives per node and side");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--batch-size", f.batch_size, "positive edges per batch");
    cmd->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
    cmd->add_option("--dropout", f.dropout, "dropout on layer inputs");
    cmd->add_option("--mode", f.mode, "full | no-reverse | no-reverse-no-collab");
    cmd->add_option("--activation", f.activation, "relu | tanh | identity");
    if (with_seed) cmd->add_option("--seed", f.seed, "master random seed");
}

void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value,
                       const std::string& where) {
    try {
        if (key == "dim") cfg.dim = std::stoi(value);
        else if (key == "epochs") cfg.epochs = std::stoi(value);
        else if (key == "layers") cfg.layers = std::stoi(value);
        else if (key == "fan_out") cfg.neighbor_fan_out = std::stoul(value);
        else if (key == "negatives") cfg.negatives_per_node = std::stoul(value);
        else if (key == "lr") cfg.learning_rate = std::stod(value);
        else if (key == "batch_size") cfg.batch_size = std::stoul(value);
        else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
        else if (key == "dropout") cfg.dropout = std::stod(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "mode") cfg.mode = parse_mode(value);
        else if (key == "activation") cfg.activation = parse_activation(value);
        else throw Error("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw Error(where + ": bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw Error(where + ": value out of range for key '" + key + "'");
    }
}

void apply_config_file(TrainConfig& cfg, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw Error(where + ": expected key=value, got '" + line + "'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
}

TrainConfig resolve_config(const ConfigFlags& f) {
    TrainConfig cfg;
    if (!f.config_file.empty()) apply_config_file(cfg, f.config_file);
    if (f.dim) cfg.dim = *f.dim;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.layers) cfg.layers = *f.layers;
    if (f.fan_out) cfg.neighbor_fan_out = static_cast<std::size_t>(*f.fan_out);
    if (f.negatives) cfg.negatives_per_node = static_cast<std::size_t>(*f.negatives);
    if (f.batch_size) cfg.batch_size = static_cast<std::size_t>(*f.batch_size);
    if (f.lr) cfg.learning_rate = *f.lr;
    if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
    if (f.dropout) cfg.dropout = *f.dropout;
    if (f.seed) cfg.seed = *f.seed;
    if (f.mode) cfg.mode = parse_mode(*f.mode);
    if (f.activation) cfg.activation = parse_activation(*f.activation);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Shared IO helpers.

struct EmbeddingDir {
    DualEmbedding emb;
    std::vector<std::string> names;
};

EmbeddingDir load_embedding_dir(const fs::path& dir) {
    EmbeddingDir e;
    e.emb.source = read_embedding_matrix(dir / "S.emb");
    e.emb.target = read_embedding_matrix(dir / "T.emb");
    e.names = read_id_map(dir / "ids.map");
    if (e.emb.source.rows() != e.emb.target.rows() ||
        e.emb.source.cols() != e.emb.target.cols())
        throw Error("S.emb and T.emb disagree on shape");
    if (static_cast<std::size_t>(e.emb.source.rows()) != e.names.size())
        throw Error("ids.map lists " + std::to_string(e.names.size()) + " nodes but embeddings have " +
                    std::to_string(e.emb.source.rows()) + " rows");
    return e;
}

nlohmann::ordered_json hash_inputs(const std::vector<fs::path>& paths) {
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    for (const fs::path& p : paths) inputs[p.string()] = file_hash_hex(p);
    return inputs;
}

std::string neg_file_name(const SplitBundle& bundle, std::size_t i) {
    if (bundle.mix_ratios.size() == 1) return "test_neg.edges";
    return "test_neg_" + mix_ratio_label(bundle.mix_ratios[i]) + ".edges";
}

void emit_metrics(const MetricReport& report, const std::string& dataset, std::uint64_t seed,
                  const std::string& config_hash, const fs::path& out) {
    const nlohmann::ordered_json doc = metric_to_json(report, dataset, seed, config_hash);
    write_json(doc, out);
    std::cout << doc.dump(2) << "\n";
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
    std::string edge_file, out_dir;
    double test_fraction = 0.3;
    std::vector<double> mix_ratios{0.0, 0.5, 1.0};
    std::uint64_t seed = 1;
};

int cmd_prepare(const PrepareArgs& a) {
    const DirectedGraph g = load_edge_list(a.edge_file);
    fs::create_directories(a.out_dir);

    SplitBundle bundle;
    bundle.mix_ratios = a.mix_ratios;

    nlohmann::ordered_json config = {{"test_fraction", a.test_fraction},
                                     {"mix_ratios", a.mix_ratios},
                                     {"seed", a.seed}};
    std::vector<std::string> outputs{"ids.map", "train.edges", "test_pos.edges", "split.json"};
    for (std::size_t i = 0; i < a.mix_ratios.size(); ++i)
        outputs.push_back(neg_file_name(bundle, i));
    RunManifest manifest =
        make_manifest("prepare", config, hash_inputs({a.edge_file}), a.seed, outputs);
    manifest.write(fs::path(a.out_dir) / "manifest.json");

    bundle.base = split_edges(g, a.test_fraction, a.seed);
    for (double ratio : a.mix_ratios) {
        EvalSplit s = build_eval_negatives(bundle.base, g, ratio, a.seed);
        bundle.negatives.push_back(std::move(s.test_neg));
    }
    save_split_dir(a.out_dir, g, bundle);

    std::cout << "split " << g.num_edges() << " edges: " << bundle.base.train_graph.num_edges()
              << " train, " << bundle.base.test_pos.size() << " test positives, "
              << a.mix_ratios.size() << " negative sets -> " << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string split_dir, edge_file, out_dir;
    ConfigFlags cfg_flags;
    int checkpoint_every = 0;
};

int cmd_train(const TrainArgs& a) {
    if (a.split_dir.empty() && a.edge_file.empty())
        throw Error("train needs --split-dir or --edges");
    const TrainConfig cfg = resolve_config(a.cfg_flags);

    DirectedGraph graph;
    std::vector<fs::path> input_files;
    if (!a.split_dir.empty()) {
        SplitBundle bundle = load_split_dir(a.split_dir);
        graph = std::move(bundle.base.train_graph);
        input_files = {fs::path(a.split_dir) / "train.edges", fs::path(a.split_dir) / "ids.map"};
    } else {
        graph = load_edge_list(a.edge_file);
        input_files = {a.edge_file};
    }

    fs::create_directories(a.out_dir);
    const fs::path out_dir(a.out_dir);
    RunManifest manifest = make_manifest(
        "train", config_to_json(cfg), hash_inputs(input_files), cfg.seed,
        {"S.emb", "T.emb", "ids.map", "loss.jsonl", "checkpoints/"});
    manifest.write(out_dir / "manifest.json");

    std::ofstream loss_log(out_dir / "loss.jsonl");
    if (!loss_log) throw Error("cannot write loss.jsonl in " + a.out_dir);

    TrainOptions opts;
    opts.checkpoint_dir = out_dir / "checkpoints";
    opts.checkpoint_every = a.checkpoint_every;
    opts.on_epoch = [&](const LossReport& r) {
        const nlohmann::ordered_json line = {{"epoch", r.epoch},
                                             {"mean_loss", r.mean_loss},
                                             {"pos_term", r.pos_term},
                                             {"neg_term", r.neg_term},
                                             {"grad_norm", r.grad_norm}};
        loss_log << line.dump() << "\n" << std::flush;
    };

    const TrainResult result = train(graph, cfg, opts);

    write_embedding_matrix(result.embedding.source, out_dir / "S.emb");
    write_embedding_matrix(result.embedding.target, out_dir / "T.emb");
    write_id_map(graph, out_dir / "ids.map");

    if (result.diverged) {
        std::cerr << "error: training diverged after epoch " << result.completed_epochs
                  << "; embeddings reflect the last finished epoch\n";
        return kExitDiverged;
    }
    std::cout << "trained " << cfg.epochs << " epochs on " << graph.num_nodes() << " nodes ("
              << graph.num_edges() << " edges); final loss "
              << (result.reports.empty() ? 0.0 : result.reports.back().mean_loss) << " -> "
              << a.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval lp / nc / gr

struct EvalLpArgs {
    std::string emb_dir, split_dir, out, dataset;
    double mix = 0.0;
};

int cmd_eval_lp(const EvalLpArgs& a) {
    const EmbeddingDir e = load_embedding_dir(a.emb_dir);
    const SplitBundle bundle = load_split_dir(a.split_dir);
    if (e.names != bundle.base.train_graph.node_names())
        throw Error("embeddings and split directory use different node universes");
    const EvalSplit split = bundle.select(a.mix);

    const std::string dataset =
        a.dataset.empty() ? fs::path(a.split_dir).filename().string() : a.dataset;
    const fs::path out = a.out.empty()
                             ? fs::path(a.emb_dir) / ("lp_" + mix_ratio_label(a.mix) + "_metrics.json")
                             : fs::path(a.out);

    const nlohmann::ordered_json config = {{"task", "link_prediction"},
                                           {"mix_ratio", split.mix_ratio},
                                           {"dataset", dataset}};
    RunManifest manifest = make_manifest(
        "eval-lp", config,
        hash_inputs({fs::path(a.emb_dir) / "S.emb", fs::path(a.emb_dir) / "T.emb"}), split.seed,
        {out.string()});
    manifest.write(out.string() + ".manifest.json");

    const MetricReport report = eval_link_prediction(e.emb, split);
    emit_metrics(report, dataset, split.seed, json_config_hash(config), out);
    return 0;
}

struct EvalNcArgs {
    std::string emb_dir, labels_file, out, dataset;
    double train_fraction = 0.7;
    std::uint64_t seed = 1;
};

int cmd_eval_nc(const EvalNcArgs& a) {
    const EmbeddingDir e = load_embedding_dir(a.emb_dir);
    const DirectedGraph universe = DirectedGraph::build(e.names, {});
    const NodeLabels labels = load_labels(a.labels_file, universe);

    const std::string dataset =
        a.dataset.empty() ? fs::path(a.labels_file).stem().string() : a.dataset;
    const fs::path out =
        a.out.empty() ? fs::path(a.emb_dir) / "nc_metrics.json" : fs::path(a.out);

    const nlohmann::ordered_json config = {{"task", "node_classification"},
                                           {"train_fraction", a.train_fraction},
                                           {"dataset", dataset}};
    RunManifest manifest = make_manifest(
        "eval-nc", config,
        hash_inputs({fs::path(a.emb_dir) / "S.emb", fs::path(a.emb_dir) / "T.emb", a.labels_file}),
        a.seed, {out.string()});
    manifest.write(out.string() + ".manifest.json");

    const MetricReport report = train_linear_probe(e.emb, labels, a.train_fraction, a.seed);
    emit_metrics(report, dataset, a.seed, json_config_hash(config), out);
    return 0;
}

struct EvalGrArgs {
    std::string emb_dir, edge_file, out, dataset;
    double node_fraction = 0.1;
    std::vector<std::size_t> ks{10, 50, 100, 200};
    std::uint64_t seed = 1;
};

int cmd_eval_gr(const EvalGrArgs& a) {
    const EmbeddingDir e = load_embedding_dir(a.emb_dir);
    const DirectedGraph g = load_edge_list(a.edge_file, e.names);

    const std::string dataset =
        a.dataset.empty() ? fs::path(a.edge_file).stem().string() : a.dataset;
    const fs::path out =
        a.out.empty() ? fs::path(a.emb_dir) / "gr_metrics.json" : fs::path(a.out);

    const nlohmann::ordered_json config = {{"task", "graph_reconstruction"},
                                           {"node_sample_fraction", a.node_fraction},
                                           {"ks", a.ks},
                                           {"dataset", dataset}};
    RunManifest manifest = make_manifest(
        "eval-gr", config,
        hash_inputs({fs::path(a.emb_dir) / "S.emb", fs::path(a.emb_dir) / "T.emb", a.edge_file}),
        a.seed, {out.string()});
    manifest.write(out.string() + ".manifest.json");

    const MetricReport report = precision_at_k(e.emb, g, a.node_fraction, a.ks, a.seed);
    emit_metrics(report, dataset, a.seed, json_config_hash(config), out);
    return 0;
}

// ---------------------------------------------------------------------------
// ablate / sweep: train per (configuration, seed), evaluate at every stored
// mix ratio, aggregate across seeds. A failed run is logged and skipped.

struct GridArgs {
    std::string split_dir, out_dir;
    ConfigFlags cfg_flags;
    std::vector<std::uint64_t> seeds{1};
    std::string param;            // sweep only
    std::vector<int> values;      // sweep only
};

struct GridRow {
    std::string label;
    double mix_ratio;
    MetricReport aggregated;
};

// Trains one model per seed under `make_cfg(seed)` and collects AUC reports
// for every stored mix ratio. Returns one aggregated row per ratio.
std::vector<GridRow> run_grid_point(const SplitBundle& bundle, const std::string& label,
                                    const std::function<TrainConfig(std::uint64_t)>& make_cfg,
                                    std::span<const std::uint64_t> seeds, std::ostream& failures,
                                    std::size_t& failure_count) {
    std::vector<std::vector<MetricReport>> per_ratio(bundle.mix_ratios.size());
    for (std::uint64_t seed : seeds) {
        try {
            const TrainConfig cfg = make_cfg(seed);
            const TrainResult result = train(bundle.base.train_graph, cfg);
            if (result.diverged) throw Error("training diverged");
            for (std::size_t i = 0; i < bundle.mix_ratios.size(); ++i) {
                const EvalSplit split = bundle.select(bundle.mix_ratios[i]);
                per_ratio[i].push_back(eval_link_prediction(result.embedding, split));
            }
        } catch (const Error& err) {
            ++failure_count;
            failures << label << " seed=" << seed << ": " << err.what() << "\n" << std::flush;
            std::cerr << "warning: run failed (" << label << " seed=" << seed
                      << "): " << err.what() << "\n";
        }
    }
    std::vector<GridRow> rows;
    for (std::size_t i = 0; i < bundle.mix_ratios.size(); ++i) {
        GridRow row{label, bundle.mix_ratios[i], {}};
        if (!per_ratio[i].empty()) row.aggregated = aggregate_reports(per_ratio[i]);
        row.aggregated.runs = per_ratio[i].size();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_grid_csv(const fs::path& path, const std::string& label_column,
                    const std::vector<GridRow>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << label_column << ",mix_ratio,runs,auc_mean,auc_stddev\n";
    for (const GridRow& row : rows) {
        out << row.label << "," << fmt(row.mix_ratio) << "," << row.aggregated.runs << ",";
        if (row.aggregated.runs > 0)
            out << fmt(row.aggregated.metrics.at("auc")) << ","
                << fmt(row.aggregated.stddevs.at("auc"));
        else
            out << ",";
        out << "\n";
    }
}

int finish_grid(const std::vector<GridRow>& rows, std::size_t failures, const fs::path& csv) {
    std::size_t ok = 0;
    for (const GridRow& r : rows) ok += r.aggregated.runs;
    std::cout << "wrote " << csv.string() << " (" << rows.size() << " rows, " << failures
              << " failed runs)\n";
    if (ok == 0) {
        std::cerr << "error: every run failed\n";
        return kExitError;
    }
    return 0;
}

int cmd_ablate(const GridArgs& a) {
    const SplitBundle bundle = load_split_dir(a.split_dir);
    const TrainConfig base = resolve_config(a.cfg_flags);
    fs::create_directories(a.out_dir);
    const fs::path out_dir(a.out_dir);
    const fs::path csv = out_dir / "ablation.csv";

    nlohmann::ordered_json config = config_to_json(base);
    config["seeds"] = a.seeds;
    config["modes"] = {"full", "no-reverse", "no-reverse-no-collab"};
    RunManifest manifest = make_manifest(
        "ablate", config, hash_inputs({fs::path(a.split_dir) / "train.edges"}),
        a.seeds.empty() ? 0 : a.seeds.front(), {csv.string()});
    manifest.write(out_dir / "manifest.json");

    std::ofstream failures(out_dir / "failures.log");
    std::size_t failure_count = 0;
    std::vector<GridRow> rows;
    for (auto mode : {AggregationMode::Full, AggregationMode::NoReverse,
                      AggregationMode::NoReverseNoCollab}) {
        auto make_cfg = [&](std::uint64_t seed) {
            TrainConfig cfg = base;
            cfg.mode = mode;
            cfg.seed = seed;
            return cfg;
        };
        auto mode_rows = run_grid_point(bundle, to_string(mode), make_cfg, a.seeds, failures,
                                        failure_count);
        rows.insert(rows.end(), mode_rows.begin(), mode_rows.end());
    }
    write_grid_csv(csv, "mode", rows);
    return finish_grid(rows, failure_count, csv);
}

int cmd_sweep(const GridArgs& a) {
    const SplitBundle bundle = load_split_dir(a.split_dir);
    const TrainConfig base = resolve_config(a.cfg_flags);
    fs::create_directories(a.out_dir);
    const fs::path out_dir(a.out_dir);
    const fs::path csv = out_dir / ("sweep_" + a.param + ".csv");

    nlohmann::ordered_json config = config_to_json(base);
    config["seeds"] = a.seeds;
    config["param"] = a.param;
    config["values"] = a.values;
    RunManifest manifest = make_manifest(
        "sweep", config, hash_inputs({fs::path(a.split_dir) / "train.edges"}),
        a.seeds.empty() ? 0 : a.seeds.front(), {csv.string()});
    manifest.write(out_dir / "manifest.json");

    std::ofstream failures(out_dir / "failures.log");
    std::size_t failure_count = 0;
    std::vector<GridRow> rows;
    for (int value : a.values) {
        auto make_cfg = [&](std::uint64_t seed) {
            TrainConfig cfg = base;
            if (a.param == "d") cfg.dim = value;
            else if (a.param == "n") cfg.negatives_per_node = static_cast<std::size_t>(value);
            else if (a.param == "layers") cfg.layers = value;
            else throw Error("unknown sweep parameter '" + a.param + "'");
            cfg.seed = seed;
            return cfg;
        };
        auto value_rows = run_grid_point(bundle, a.param + "=" + std::to_string(value), make_cfg,
                                         a.seeds, failures, failure_count);
        rows.insert(rows.end(), value_rows.begin(), value_rows.end());
    }
    write_grid_csv(csv, "setting", rows);
    return finish_grid(rows, failure_count, csv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-embedding trainer and evaluator for directed graphs"};
    app.require_subcommand(1);

    PrepareArgs prep;
    CLI::App* prepare = app.add_subcommand("prepare", "split an edge list for evaluation");
    prepare->add_option("edges", prep.edge_file, "edge list file")->required();
    prepare->add_option("--test-fraction", prep.test_fraction, "held-out edge fraction");
    prepare->add_option("--mix-ratios", prep.mix_ratios, "reversed-negative ratios")
        ->delimiter(',');
    prepare->add_option("--seed", prep.seed, "master random seed");
    prepare->add_option("--out-dir", prep.out_dir, "split directory to create")->required();

    TrainArgs tra;
    CLI::App* train_cmd = app.add_subcommand("train", "train dual embeddings");
    auto* opt_split = train_cmd->add_option("--split-dir", tra.split_dir,
                                            "train on a prepared split's train graph");
    train_cmd->add_option("--edges", tra.edge_file, "train on a full edge list")
        ->excludes(opt_split);
    train_cmd->add_option("--out-dir", tra.out_dir, "output directory")->required();
    train_cmd->add_option("--checkpoint-every", tra.checkpoint_every,
                          "checkpoint period in epochs (0 = final only)");
    add_config_flags(train_cmd, tra.cfg_flags, /*with_seed=*/true);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate trained embeddings");
    eval_cmd->require_subcommand(1);

    EvalLpArgs lp;
    CLI::App* eval_lp = eval_cmd->add_subcommand("lp", "link prediction AUC");
    eval_lp->add_option("--emb-dir", lp.emb_dir, "directory with S.emb/T.emb/ids.map")->required();
    eval_lp->add_option("--split-dir", lp.split_dir, "prepared split directory")->required();
    eval_lp->add_option("--mix", lp.mix, "reversed-negative ratio to evaluate")->required();
    eval_lp->add_option("--out", lp.out, "metrics JSON path");
    eval_lp->add_option("--dataset", lp.dataset, "dataset name for the report");

    EvalNcArgs nc;
    CLI::App* eval_nc = eval_cmd->add_subcommand("nc", "node classification F1");
    eval_nc->add_option("--emb-dir", nc.emb_dir, "directory with S.emb/T.emb/ids.map")->required();
    eval_nc->add_option("--labels", nc.labels_file, "node label file")->required();
    eval_nc->add_option("--train-fraction", nc.train_fraction, "probe train fraction");
    eval_nc->add_option("--seed", nc.seed, "probe split seed");
    eval_nc->add_option("--out", nc.out, "metrics JSON path");
    eval_nc->add_option("--dataset", nc.dataset, "dataset name for the report");

    EvalGrArgs gr;
    CLI::App* eval_gr = eval_cmd->add_subcommand("gr", "graph reconstruction precision@k");
    eval_gr->add_option("--emb-dir", gr.emb_dir, "directory with S.emb/T.emb/ids.map")->required();
    eval_gr->add_option("--edges", gr.edge_file, "full edge list to reconstruct")->required();
    eval_gr->add_option("--node-fraction", gr.node_fraction, "fraction of nodes to sample");
    eval_gr->add_option("--ks", gr.ks, "ascending k values")->delimiter(',');
    eval_gr->add_option("--seed", gr.seed, "node sample seed");
    eval_gr->add_option("--out", gr.out, "metrics JSON path");
    eval_gr->add_option("--dataset", gr.dataset, "dataset name for the report");

    GridArgs abl;
    CLI::App* ablate = app.add_subcommand("ablate", "compare aggregation modes");
    ablate->add_option("--split-dir", abl.split_dir, "prepared split directory")->required();
    ablate->add_option("--out-dir", abl.out_dir, "output directory")->required();
    ablate->add_option("--seeds", abl.seeds, "seeds to train with")->delimiter(',');
    add_config_flags(ablate, abl.cfg_flags, /*with_seed=*/false);

    GridArgs swp;
    CLI::App* sweep = app.add_subcommand("sweep", "sweep one hyperparameter");
    sweep->add_option("--split-dir", swp.split_dir, "prepared split directory")->required();
    sweep->add_option("--out-dir", swp.out_dir, "output directory")->required();
    sweep->add_option("--param", swp.param, "d | n | layers")
        ->required()
        ->check(CLI::IsMember({"d", "n", "layers"}));
    sweep->add_option("--values", swp.values, "values to sweep")->required()->delimiter(',');
    sweep->add_option("--seeds", swp.seeds, "seeds to train with")->delimiter(',');
    add_config_flags(sweep, swp.cfg_flags, /*with_seed=*/false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) return cmd_prepare(prep);
        if (train_cmd->parsed()) return cmd_train(tra);
        if (eval_lp->parsed()) return cmd_eval_lp(lp);
        if (eval_nc->parsed()) return cmd_eval_nc(nc);
        if (eval_gr->parsed()) return cmd_eval_gr(gr);
        if (ablate->parsed()) return cmd_ablate(abl);
        if (sweep->parsed()) return cmd_sweep(swp);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

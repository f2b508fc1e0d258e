#include <doctest.h>

#include <cstdlib>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "coba/manifest.hpp"
#include "test_util.hpp"

using nlohmann::json;
using coba::testutil::TempDir;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args, const std::filesystem::path& cwd) {
    const auto capture = cwd / ".cli_capture";
    const std::string cmd = "cd '" + cwd.string() + "' && '" + COBA_CLI_PATH + "' " + args +
                            " > '" + capture.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = coba::testutil::read_file(capture);
    return r;
}

// Minimal draft-07 interpreter covering the constructs the shipped schema
// uses: type, enum, pattern, minimum, minProperties, required, properties,
// additionalProperties. Independent of any JSON-schema library.
void validate_schema(const json& doc, const json& schema, const std::string& where,
                     std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const std::string t = schema["type"];
        const bool ok = (t == "object" && doc.is_object()) || (t == "array" && doc.is_array()) ||
                        (t == "string" && doc.is_string()) ||
                        (t == "integer" && (doc.is_number_integer() || doc.is_number_unsigned())) ||
                        (t == "number" && doc.is_number()) || (t == "boolean" && doc.is_boolean());
        if (!ok) {
            errors.push_back(where + ": expected type " + t);
            return;
        }
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const json& option : schema["enum"]) hit = hit || option == doc;
        if (!hit) errors.push_back(where + ": value not in enum");
    }
    if (schema.contains("pattern") && doc.is_string()) {
        const std::regex re(schema["pattern"].get<std::string>());
        if (!std::regex_search(doc.get<std::string>(), re))
            errors.push_back(where + ": pattern mismatch");
    }
    if (schema.contains("minimum") && doc.is_number() &&
        doc.get<double>() < schema["minimum"].get<double>())
        errors.push_back(where + ": below minimum");
    if (schema.contains("minProperties") && doc.is_object() &&
        doc.size() < schema["minProperties"].get<std::size_t>())
        errors.push_back(where + ": too few properties");
    if (schema.contains("required"))
        for (const json& key : schema["required"])
            if (!doc.contains(key.get<std::string>()))
                errors.push_back(where + ": missing required key " + key.get<std::string>());
    if (doc.is_object()) {
        const json props = schema.value("properties", json::object());
        for (const auto& [key, value] : doc.items()) {
            if (props.contains(key)) {
                validate_schema(value, props[key], where + "." + key, errors);
            } else if (schema.contains("additionalProperties")) {
                const json& extra = schema["additionalProperties"];
                if (extra.is_boolean() && !extra.get<bool>())
                    errors.push_back(where + ": unexpected key " + key);
                else if (extra.is_object())
                    validate_schema(value, extra, where + "." + key, errors);
            }
        }
    }
}

std::vector<std::string> schema_errors(const json& doc) {
    const json schema = json::parse(coba::testutil::read_file(COBA_SCHEMA_PATH));
    std::vector<std::string> errors;
    validate_schema(doc, schema, "$", errors);
    return errors;
}

// 40-node upper-triangular digraph: deterministic, no reciprocal edges, so
// every negative mix ratio up to 1.0 is buildable.
void write_toy_graph(const std::filesystem::path& dir) {
    std::string edges, labels;
    for (int u = 0; u < 40; ++u) {
        labels += "v" + std::to_string(u) + (u % 2 ? " odd\n" : " even\n");
        for (int v = u + 1; v < 40; ++v)
            if ((u * 31 + v * 17) % 9 < 2)
                edges += "v" + std::to_string(u) + " v" + std::to_string(v) + "\n";
    }
    coba::testutil::write_file(dir / "toy.edges", edges);
    coba::testutil::write_file(dir / "toy.labels", labels);
}

}  // namespace

TEST_CASE("cli runs the full workflow end to end") {
    TempDir tmp;
    write_toy_graph(tmp.path());

    auto prep = run_cli("prepare toy.edges --test-fraction 0.3 --mix-ratios 0,0.5,1 --seed 5 "
                        "--out-dir split", tmp.path());
    CAPTURE(prep.output);
    REQUIRE(prep.exit_code == 0);
    for (const char* f : {"ids.map", "train.edges", "test_pos.edges", "test_neg_0.edges",
                          "test_neg_50.edges", "test_neg_100.edges", "split.json", "manifest.json"})
        CHECK(std::filesystem::exists(tmp.file("split") / f));

    auto train = run_cli("train --split-dir split --out-dir run --dim 8 --epochs 4 --seed 2",
                         tmp.path());
    CAPTURE(train.output);
    REQUIRE(train.exit_code == 0);
    for (const char* f : {"S.emb", "T.emb", "ids.map", "loss.jsonl", "manifest.json"})
        CHECK(std::filesystem::exists(tmp.file("run") / f));

    // One loss line per epoch, each a strict JSON object.
    std::istringstream loss(coba::testutil::read_file(tmp.file("run") / "loss.jsonl"));
    std::string line;
    int lines = 0;
    while (std::getline(loss, line)) {
        const json j = json::parse(line);
        CHECK(j["epoch"] == ++lines);
        CHECK(j["mean_loss"].is_number());
    }
    CHECK(lines == 4);

    for (const std::string mix : {"0", "0.5", "1"}) {
        auto lp = run_cli("eval lp --emb-dir run --split-dir split --mix " + mix, tmp.path());
        CAPTURE(lp.output);
        REQUIRE(lp.exit_code == 0);
        const json doc = json::parse(lp.output);  // stdout carries the document
        CHECK(schema_errors(doc).empty());
        CHECK(doc["task"] == "link_prediction");
        CHECK(doc["metrics"]["auc"].is_number());
    }
    CHECK(std::filesystem::exists(tmp.file("run") / "lp_50_metrics.json"));
    CHECK(std::filesystem::exists(tmp.file("run") / "lp_50_metrics.json.manifest.json"));

    auto nc = run_cli("eval nc --emb-dir run --labels toy.labels --train-fraction 0.7 --seed 3",
                      tmp.path());
    CAPTURE(nc.output);
    REQUIRE(nc.exit_code == 0);
    const json nc_doc = json::parse(nc.output);
    CHECK(schema_errors(nc_doc).empty());
    CHECK(nc_doc["metrics"].contains("micro_f1"));
    CHECK(nc_doc["metrics"].contains("macro_f1"));

    auto gr = run_cli("eval gr --emb-dir run --edges toy.edges --node-fraction 0.5 --ks 1,5,10 "
                      "--seed 3", tmp.path());
    CAPTURE(gr.output);
    REQUIRE(gr.exit_code == 0);
    const json gr_doc = json::parse(gr.output);
    CHECK(schema_errors(gr_doc).empty());
    CHECK(gr_doc["metrics"].contains("precision@5"));
}

TEST_CASE("schema validator accepts aggregates and rejects malformed documents") {
    coba::MetricReport report;
    report.task = coba::EvalTask::LinkPrediction;
    report.setting = {{"mix_ratio", 0.5}};
    report.metrics["auc"] = 0.9;
    report.runs = 3;
    report.stddevs["auc"] = 0.01;
    const json agg = json::parse(
        coba::metric_to_json(report, "toy", 1, "0123456789abcdef").dump());
    CHECK(schema_errors(agg).empty());

    json bad = agg;
    bad["config_hash"] = "not-a-hash";
    CHECK(!schema_errors(bad).empty());
    bad = agg;
    bad["task"] = "levitation";
    CHECK(!schema_errors(bad).empty());
    bad = agg;
    bad.erase("seed");
    CHECK(!schema_errors(bad).empty());
    bad = agg;
    bad["surprise"] = 1;
    CHECK(!schema_errors(bad).empty());
    bad = agg;
    bad["metrics"]["auc"] = "high";
    CHECK(!schema_errors(bad).empty());
}

TEST_CASE("a failed command leaves its manifest as the crash marker") {
    TempDir tmp;
    std::string edges;  // 10 edges: a 0.99 test fraction empties the train side
    for (int i = 0; i < 10; ++i)
        edges += "a" + std::to_string(i) + " a" + std::to_string(i + 1) + "\n";
    coba::testutil::write_file(tmp.file("tiny.edges"), edges);
    auto r = run_cli("prepare tiny.edges --test-fraction 0.99 --seed 1 --out-dir split",
                     tmp.path());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("error") != std::string::npos);
    CHECK(std::filesystem::exists(tmp.file("split") / "manifest.json"));
    CHECK(!std::filesystem::exists(tmp.file("split") / "train.edges"));
}

TEST_CASE("flags beat the config file which beats defaults") {
    TempDir tmp;
    write_toy_graph(tmp.path());
    coba::testutil::write_file(tmp.file("run.cfg"),
                               "# comment\ndim = 12\nepochs = 3\nactivation = tanh\n");
    auto r = run_cli("train --edges toy.edges --out-dir run --config run.cfg --dim 6", tmp.path());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    const json manifest = json::parse(coba::testutil::read_file(tmp.file("run") / "manifest.json"));
    CHECK(manifest["config"]["dim"] == 6);              // flag wins
    CHECK(manifest["config"]["epochs"] == 3);           // file beats default
    CHECK(manifest["config"]["activation"] == "tanh");  // file beats default
    CHECK(manifest["config"]["layers"] == 1);           // untouched default
    CHECK(manifest["config_hash"].is_string());

    auto bad = run_cli("train --edges toy.edges --out-dir run2 --config toy.labels", tmp.path());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("key=value") != std::string::npos);
}

TEST_CASE("identical runs produce byte-identical artifacts") {
    TempDir tmp;
    write_toy_graph(tmp.path());
    REQUIRE(run_cli("prepare toy.edges --seed 9 --out-dir s1", tmp.path()).exit_code == 0);
    REQUIRE(run_cli("prepare toy.edges --seed 9 --out-dir s2", tmp.path()).exit_code == 0);
    for (const char* f : {"train.edges", "test_pos.edges", "test_neg_0.edges", "ids.map"})
        CHECK(coba::testutil::read_file(tmp.file("s1") / f) ==
              coba::testutil::read_file(tmp.file("s2") / f));

    const std::string train_args = "--split-dir s1 --dim 8 --epochs 3 --seed 4";
    REQUIRE(run_cli("train " + train_args + " --out-dir r1", tmp.path()).exit_code == 0);
    REQUIRE(run_cli("train " + train_args + " --out-dir r2", tmp.path()).exit_code == 0);
    CHECK(coba::testutil::read_file(tmp.file("r1") / "S.emb") ==
          coba::testutil::read_file(tmp.file("r2") / "S.emb"));
    CHECK(coba::testutil::read_file(tmp.file("r1") / "T.emb") ==
          coba::testutil::read_file(tmp.file("r2") / "T.emb"));

    const std::string lp_args = "eval lp --emb-dir r1 --split-dir s1 --mix 0";
    REQUIRE(run_cli(lp_args + " --out a.json", tmp.path()).exit_code == 0);
    REQUIRE(run_cli(lp_args + " --out b.json", tmp.path()).exit_code == 0);
    CHECK(coba::testutil::read_file(tmp.file("a.json")) ==
          coba::testutil::read_file(tmp.file("b.json")));
    CHECK(!coba::testutil::read_file(tmp.file("a.json")).empty());
}

TEST_CASE("usage errors exit nonzero") {
    TempDir tmp;
    write_toy_graph(tmp.path());
    CHECK(run_cli("train --out-dir x", tmp.path()).exit_code == 2);  // no input source
    CHECK(run_cli("eval lp --emb-dir nowhere --split-dir nowhere --mix 0", tmp.path()).exit_code ==
          2);
    CHECK(run_cli("--frobnicate", tmp.path()).exit_code != 0);  // parser error
    CHECK(run_cli("sweep --split-dir s --out-dir o --param q --values 1", tmp.path()).exit_code !=
          0);  // rejected by the param whitelist
}

TEST_CASE("ablation csv covers every mode and ratio") {
    TempDir tmp;
    write_toy_graph(tmp.path());
    REQUIRE(run_cli("prepare toy.edges --seed 3 --mix-ratios 0,1 --out-dir split", tmp.path())
                .exit_code == 0);
    auto r = run_cli("ablate --split-dir split --out-dir abl --dim 6 --epochs 2 --seeds 1,2",
                     tmp.path());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    const std::string csv = coba::testutil::read_file(tmp.file("abl") / "ablation.csv");
    CHECK(csv.find("mode,mix_ratio,runs,auc_mean,auc_stddev") == 0);
    for (const char* mode : {"full", "no-reverse", "no-reverse-no-collab"})
        CHECK(csv.find(mode) != std::string::npos);
    // 1 header + 3 modes x 2 ratios
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.find(",2,") != std::string::npos);  // both seeds aggregated
    CHECK(std::filesystem::exists(tmp.file("abl") / "manifest.json"));
}

TEST_CASE("sweep csv tracks the swept values") {
    TempDir tmp;
    write_toy_graph(tmp.path());
    REQUIRE(run_cli("prepare toy.edges --seed 3 --mix-ratios 0 --out-dir split", tmp.path())
                .exit_code == 0);
    auto r = run_cli("sweep --split-dir split --out-dir swp --param layers --values 1,2 "
                     "--epochs 2 --dim 6 --seeds 1", tmp.path());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    const std::string csv = coba::testutil::read_file(tmp.file("swp") / "sweep_layers.csv");
    CHECK(csv.find("setting,mix_ratio,runs,auc_mean,auc_stddev") == 0);
    CHECK(csv.find("layers=1") != std::string::npos);
    CHECK(csv.find("layers=2") != std::string::npos);
}

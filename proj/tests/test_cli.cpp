#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = WEBNAV_CLI_PATH;
const std::string kCorpus = std::string(WEBNAV_TEST_DATA_DIR) + "/corpus";
const std::string kPredictions = std::string(WEBNAV_TEST_DATA_DIR) + "/predictions";
const std::string kGolden = std::string(WEBNAV_TEST_DATA_DIR) + "/golden";

struct CliResult {
    int exit_code = -1;
    std::string output; // stdout and stderr interleaved
};

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

CliResult run_cli(const std::vector<std::string>& args, const std::string& cwd = "") {
    std::string cmd;
    if (!cwd.empty()) cmd += "cd " + shell_quote(cwd) + " && ";
    cmd += shell_quote(kCli);
    for (const std::string& arg : args) cmd += " " + shell_quote(arg);
    cmd += " 2>&1";

    CliResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "webnav_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::istringstream in(slurp(path));
    std::vector<json> rows;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(json::parse(line));
    return rows;
}

} // namespace

TEST_CASE("validate accepts the bundled corpus") {
    CliResult r = run_cli({"validate", "--data-root", kCorpus});
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("3 demonstration(s)") != std::string::npos);
    CHECK(r.output.find("0 issue(s)") != std::string::npos);
}

TEST_CASE("validate lists violations and exits 1") {
    fs::path root = fresh_dir("bad_root");
    spit(root / "demo_x" / "metadata.json", "{}\n");
    spit(root / "demo_x" / "turns.json", R"([{"index": 1, "kind": "browser"}])");
    CliResult r = run_cli({"validate", "--data-root", root.string()});
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("BROWSER_TURN_WITHOUT_ACTION") != std::string::npos);
    CHECK(r.output.find("MISSING_DOM_REF") != std::string::npos);
}

TEST_CASE("bad invocations exit 2") {
    CHECK(run_cli({"validate", "--data-root", "/definitely/not/here"}).exit_code == 2);
    CHECK(run_cli({"validate", "--data-root", kCorpus, "--split", "holdout"}).exit_code == 2);
    CHECK(run_cli({"rank", "--data-root", kCorpus, "--no-such-flag"}).exit_code == 2);
    CHECK(run_cli({"rank", "--data-root", kCorpus, "--k", "0"}).exit_code == 2);
    CHECK(run_cli({"report", "--run", "/definitely/not/here"}).exit_code == 2);
    CHECK(run_cli({"score", "--data-root", kCorpus, "--predictions", "/nope.jsonl"}).exit_code ==
          2);
    CHECK(run_cli({"train-dmr", "--examples", "/nope.jsonl"}).exit_code == 2);
    CHECK(run_cli({}).exit_code == 2);

    fs::path dir = fresh_dir("bad_config");
    spit(dir / "config.json", R"({"mystery": 1})");
    CliResult r = run_cli({"validate", "--config", (dir / "config.json").string()});
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("mystery") != std::string::npos);
}

TEST_CASE("rank writes ordered results and a recall summary") {
    fs::path out = fresh_dir("rank_out");
    CliResult r = run_cli({"rank", "--data-root", kCorpus, "--out", out.string()});
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("skipped") != std::string::npos); // chat turns have no dom

    std::vector<json> rows = read_jsonl(out / "ranks.jsonl");
    REQUIRE(rows.size() == 7);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto key = [](const json& row) {
            return std::pair(row["demo_id"].get<std::string>(), row["turn_index"].get<int>());
        };
        CHECK(key(rows[i - 1]) < key(rows[i]));
    }
    for (const json& row : rows) {
        const json& topk = row["topk"];
        REQUIRE(topk.is_array());
        CHECK(topk.size() <= 10);
        for (std::size_t i = 1; i < topk.size(); ++i)
            CHECK(topk[i - 1]["score"].get<double>() >= topk[i]["score"].get<double>());
    }

    json summary = json::parse(slurp(out / "rank_summary.json"));
    CHECK(summary["n_ranked"] == 7);
    CHECK(summary["n_gold"] == 6);
    CHECK(summary["recall@10"].get<double>() == doctest::Approx(1.0));

    fs::path out2 = fresh_dir("rank_out2");
    CHECK(run_cli({"rank", "--data-root", kCorpus, "--out", out2.string()}).exit_code == 0);
    CHECK(slurp(out / "ranks.jsonl") == slurp(out2 / "ranks.jsonl"));
    CHECK(slurp(out / "rank_summary.json") == slurp(out2 / "rank_summary.json"));
}

TEST_CASE("k flag overrides config file values") {
    fs::path dir = fresh_dir("config_k");
    spit(dir / "config.json",
         json{{"data_root", kCorpus}, {"k", 3}, {"demos", {"demo_big"}}}.dump());
    fs::path out = dir / "k3";
    CHECK(run_cli({"rank", "--config", (dir / "config.json").string(), "--out", out.string()})
              .exit_code == 0);
    std::vector<json> rows = read_jsonl(out / "ranks.jsonl");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["topk"].size() == 3);

    fs::path out7 = dir / "k7";
    CHECK(run_cli({"rank", "--config", (dir / "config.json").string(), "--k", "7", "--out",
                   out7.string()})
              .exit_code == 0);
    rows = read_jsonl(out7 / "ranks.jsonl");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["topk"].size() == 7);
}

TEST_CASE("default run directory is named by the config hash") {
    fs::path cwd = fresh_dir("hash_cwd");
    CliResult r = run_cli({"rank", "--data-root", kCorpus, "--demo", "demo_hotels"}, cwd.string());
    CHECK(r.exit_code == 0);
    REQUIRE(fs::is_directory(cwd / "runs"));
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(cwd / "runs")) dirs.push_back(entry.path());
    REQUIRE(dirs.size() == 1);
    CHECK(dirs[0].filename().string().size() == 16);
    CHECK(fs::is_regular_file(dirs[0] / "ranks.jsonl"));

    CHECK(run_cli({"rank", "--data-root", kCorpus, "--demo", "demo_hotels", "--k", "4"},
                  cwd.string())
              .exit_code == 0);
    dirs.clear();
    for (const auto& entry : fs::directory_iterator(cwd / "runs")) dirs.push_back(entry.path());
    CHECK(dirs.size() == 2); // different config, different hash
}

TEST_CASE("build-input stays within budgets and is reproducible") {
    fs::path out = fresh_dir("build_out");
    REQUIRE(run_cli({"rank", "--data-root", kCorpus, "--out", out.string()}).exit_code == 0);
    CliResult r = run_cli({"build-input", "--data-root", kCorpus, "--out", out.string()});
    CHECK(r.exit_code == 0);

    std::vector<json> rows = read_jsonl(out / "inputs.jsonl");
    REQUIRE(rows.size() == 7);
    for (const json& row : rows) {
        const json& counts = row["token_counts"];
        CHECK(counts["total"].get<int>() <= 2048);
        CHECK(counts["html"].get<int>() <= 700);
        const json& sections = row["sections"];
        for (const char* name : {"html", "viewport", "utterances", "candidates", "actions"})
            CHECK(sections.contains(name));
        CHECK(sections["viewport"].get<std::string>() == "viewport 1280x720");
    }

    fs::path out2 = fresh_dir("build_out2");
    REQUIRE(run_cli({"rank", "--data-root", kCorpus, "--out", out2.string()}).exit_code == 0);
    REQUIRE(run_cli({"build-input", "--data-root", kCorpus, "--out", out2.string()}).exit_code ==
            0);
    CHECK(slurp(out / "inputs.jsonl") == slurp(out2 / "inputs.jsonl"));

    CliResult missing = run_cli({"build-input", "--data-root", kCorpus, "--out",
                                 fresh_dir("no_ranks").string()});
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.find("rank") != std::string::npos);
}

TEST_CASE("score reproduces references perfectly") {
    fs::path out = fresh_dir("score_ref");
    CliResult r = run_cli({"score", "--data-root", kCorpus, "--predictions",
                           kPredictions + "/reference.jsonl", "--out", out.string()});
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("overall,1.0,11") != std::string::npos);
    json report = json::parse(slurp(out / "report.json"));
    CHECK(report["overall"].get<double>() == 1.0);
    CHECK(report["im"].get<double>() == 1.0);
    CHECK(report["n_turns"] == 11);
}

TEST_CASE("score matches the committed golden report byte for byte") {
    fs::path out = fresh_dir("score_pert");
    CliResult r = run_cli({"score", "--data-root", kCorpus, "--predictions",
                           kPredictions + "/perturbed.jsonl", "--out", out.string()});
    CHECK(r.exit_code == 0);
    CHECK(slurp(out / "report.json") == slurp(kGolden + "/report.json"));
    CHECK(slurp(out / "report.csv") == slurp(kGolden + "/report.csv"));
    std::vector<json> turns = read_jsonl(out / "turns.jsonl");
    CHECK(turns.size() == 11);
}

TEST_CASE("report re-renders a stored report") {
    fs::path out = fresh_dir("report_rerender");
    REQUIRE(run_cli({"score", "--data-root", kCorpus, "--predictions",
                     kPredictions + "/perturbed.jsonl", "--out", out.string()})
                .exit_code == 0);
    CliResult r = run_cli({"report", "--run", out.string()});
    CHECK(r.exit_code == 0);
    CHECK(r.output == slurp(kGolden + "/report.csv"));
}

TEST_CASE("train-dmr is seeded and deterministic") {
    fs::path dir = fresh_dir("train");
    std::string examples;
    const char* words[] = {"flights", "hotels", "settings", "profile"};
    for (const char* w : words) {
        json pos = {{"query", std::string("user: open the ") + w + " page"},
                    {"candidate", {{"uid", "gold"}, {"text", std::string("a ") + w + " link"}}},
                    {"label", 1}};
        examples += pos.dump() + "\n";
        for (int j = 0; j < 3; ++j) {
            json neg = {{"query", std::string("user: open the ") + w + " page"},
                        {"candidate",
                         {{"uid", "junk" + std::to_string(j)},
                          {"text", "div wrapper chrome item" + std::to_string(j)}}},
                        {"label", 0}};
            examples += neg.dump() + "\n";
        }
    }
    spit(dir / "examples.jsonl", examples);

    fs::path out1 = dir / "run1";
    fs::path out2 = dir / "run2";
    for (const fs::path& out : {out1, out2}) {
        CliResult r = run_cli({"train-dmr", "--examples", (dir / "examples.jsonl").string(),
                               "--steps", "50", "--batch", "8", "--seed", "9", "--out",
                               out.string()});
        CHECK(r.exit_code == 0);
    }
    CHECK(slurp(out1 / "model.bin") == slurp(out2 / "model.bin"));
    CHECK(slurp(out1 / "loss_curve.csv") == slurp(out2 / "loss_curve.csv"));
    std::string curve = slurp(out1 / "loss_curve.csv");
    CHECK(curve.rfind("step,loss\n", 0) == 0);

    spit(dir / "allpos.jsonl",
         R"({"query": "q", "candidate": {"uid": "u", "text": "t"}, "label": 1})" "\n");
    CliResult degenerate =
        run_cli({"train-dmr", "--examples", (dir / "allpos.jsonl").string(), "--out",
                 (dir / "bad").string()});
    CHECK(degenerate.exit_code == 1);

    spit(dir / "badlabel.jsonl",
         R"({"query": "q", "candidate": {"uid": "u", "text": "t"}, "label": 2})" "\n");
    CHECK(run_cli({"train-dmr", "--examples", (dir / "badlabel.jsonl").string(), "--out",
                   (dir / "bad2").string()})
              .exit_code == 1);
}

TEST_CASE("trained projection and external vectors drive ranking") {
    fs::path dir = fresh_dir("embedders");
    std::string examples;
    const char* words[] = {"flights", "hotels", "settings", "profile", "billing", "search"};
    for (const char* w : words) {
        examples += json{{"query", std::string("user: open the ") + w + " page"},
                         {"candidate",
                          {{"uid", "gold"},
                           {"text", std::string("a href=\"/") + w + "\" " + w + " page link"}}},
                         {"label", 1}}
                        .dump() +
                    "\n";
        for (int j = 0; j < 4; ++j)
            examples += json{{"query", std::string("user: open the ") + w + " page"},
                             {"candidate",
                              {{"uid", "junk" + std::to_string(j)},
                               {"text", "div wrapper chrome item" + std::to_string(j)}}},
                             {"label", 0}}
                            .dump() +
                        "\n";
    }
    spit(dir / "examples.jsonl", examples);
    fs::path model_run = dir / "model_run";
    REQUIRE(run_cli({"train-dmr", "--examples", (dir / "examples.jsonl").string(), "--steps",
                     "120", "--batch", "8", "--seed", "3", "--out", model_run.string()})
                .exit_code == 0);

    fs::path proj_out = dir / "proj";
    CliResult proj = run_cli({"rank", "--data-root", kCorpus, "--demo", "demo_hotels",
                              "--embedder", "projection:" + (model_run / "model.bin").string(),
                              "--out", proj_out.string()});
    CHECK(proj.exit_code == 0);
    CHECK(read_jsonl(proj_out / "ranks.jsonl").size() == 2);

    // external vectors: the gold candidate gets the query's unit vector
    std::string vectors = json{{"dim", 4}}.dump() + "\n";
    auto add = [&vectors](const std::string& id, std::initializer_list<double> v) {
        vectors += json{{"id", id}, {"vector", v}}.dump() + "\n";
    };
    const char* turn2[] = {"h", "b", "hd", "nav_flights", "nav_hotels", "nav_support", "mn",
                           "title"};
    const char* turn3[] = {"h", "b", "mn", "title", "city_input", "find_btn"};
    add("demo_hotels/2", {1, 0, 0, 0});
    for (const char* uid : turn2)
        add(std::string("demo_hotels/2/") + uid,
            std::string(uid) == "nav_hotels" ? std::initializer_list<double>{1, 0, 0, 0}
                                             : std::initializer_list<double>{0, 1, 0, 0});
    add("demo_hotels/3", {0, 0, 1, 0});
    for (const char* uid : turn3)
        add(std::string("demo_hotels/3/") + uid,
            std::string(uid) == "city_input" ? std::initializer_list<double>{0, 0, 1, 0}
                                             : std::initializer_list<double>{0, 1, 0, 0});
    spit(dir / "vectors.jsonl", vectors);

    fs::path ext_out = dir / "ext";
    CliResult ext = run_cli({"rank", "--data-root", kCorpus, "--demo", "demo_hotels",
                             "--embedder", "external:" + (dir / "vectors.jsonl").string(),
                             "--out", ext_out.string()});
    CHECK(ext.exit_code == 0);
    json summary = json::parse(slurp(ext_out / "rank_summary.json"));
    CHECK(summary["recall@1"].get<double>() == doctest::Approx(1.0));

    // dropping one candidate vector makes the store incomplete
    spit(dir / "vectors_short.jsonl",
         json{{"dim", 4}}.dump() + "\n" + json{{"id", "demo_hotels/2"}, {"vector", {1, 0, 0, 0}}}.dump() +
             "\n");
    CliResult incomplete = run_cli({"rank", "--data-root", kCorpus, "--demo", "demo_hotels",
                                    "--embedder",
                                    "external:" + (dir / "vectors_short.jsonl").string(), "--out",
                                    (dir / "ext_bad").string()});
    CHECK(incomplete.exit_code == 1);
    CHECK(incomplete.output.find("missing") != std::string::npos);

    CHECK(run_cli({"rank", "--data-root", kCorpus, "--embedder", "projection:/nope.bin"})
              .exit_code == 2);
    CHECK(run_cli({"rank", "--data-root", kCorpus, "--embedder", "sorcery"}).exit_code == 2);
}

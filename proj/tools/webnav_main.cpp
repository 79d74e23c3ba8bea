#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "webnav/action.hpp"
#include "webnav/demo.hpp"
#include "webnav/dmr.hpp"
#include "webnav/dom.hpp"
#include "webnav/errors.hpp"
#include "webnav/metrics.hpp"
#include "webnav/otr.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace webnav;

namespace {

// Bad flags, bad config keys, missing input files: exit 2. Everything the
// data can get wrong at runtime stays a webnav::Error and exits 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FlagValues {
    std::optional<std::string> config;
    std::optional<std::string> data_root;
    std::optional<std::string> split;
    std::vector<std::string> demos;
    std::optional<int> k, w;
    std::optional<int> budget_total, budget_dom, budget_utterance, budget_action,
        budget_candidate;
    std::optional<std::string> embedder;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<double> lr;
    std::optional<int> steps, batch, negatives_per_positive;
    // per-command inputs
    std::optional<std::string> ranks_path;
    std::optional<std::string> predictions_path;
    std::optional<std::string> examples_path;
    std::optional<std::string> run_dir;
};

struct RunConfig {
    std::string data_root;
    std::string split;
    std::vector<std::string> demos;
    int k = 10;
    int w = 5;
    otr::TokenBudget budget;
    std::string embedder = "hashing";
    std::uint64_t seed = dmr::kDefaultSeed;
    std::string out_dir; // empty: runs/<config-hash>
    dmr::TrainConfig train;
};

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("missing file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write: " + path.string());
    out << content;
    if (!out) throw Error("short write: " + path.string());
}

int require_positive(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<int>() < 1)
        throw UsageError("config key '" + key + "' must be a positive integer");
    return v.get<int>();
}

RunConfig build_config(const FlagValues& flags) {
    RunConfig cfg;
    cfg.train.seed = cfg.seed;

    if (const char* env = std::getenv("WEBNAV_DATA_ROOT")) cfg.data_root = env;

    if (flags.config) {
        json doc;
        try {
            doc = json::parse(read_text_file(*flags.config));
        } catch (const MissingFileError&) {
            throw UsageError("config file not found: " + *flags.config);
        } catch (const json::exception&) {
            throw UsageError("config file is not valid json: " + *flags.config);
        }
        if (!doc.is_object()) throw UsageError("config file must hold a json object");
        for (const auto& [key, value] : doc.items()) {
            if (key == "data_root") cfg.data_root = value.get<std::string>();
            else if (key == "split") cfg.split = value.get<std::string>();
            else if (key == "demos") cfg.demos = value.get<std::vector<std::string>>();
            else if (key == "k") cfg.k = require_positive(value, key);
            else if (key == "w") cfg.w = require_positive(value, key);
            else if (key == "budget_total") cfg.budget.total = require_positive(value, key);
            else if (key == "budget_dom") cfg.budget.dom = require_positive(value, key);
            else if (key == "budget_utterance")
                cfg.budget.per_utterance = require_positive(value, key);
            else if (key == "budget_action") cfg.budget.per_action = require_positive(value, key);
            else if (key == "budget_candidate")
                cfg.budget.per_candidate = require_positive(value, key);
            else if (key == "embedder") cfg.embedder = value.get<std::string>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
            else if (key == "lr") cfg.train.lr = value.get<double>();
            else if (key == "steps") cfg.train.steps = require_positive(value, key);
            else if (key == "batch") cfg.train.batch = require_positive(value, key);
            else if (key == "negatives_per_positive")
                cfg.train.negatives_per_positive = require_positive(value, key);
            else
                throw UsageError("unknown config key '" + key + "'");
        }
    }

    if (flags.data_root) cfg.data_root = *flags.data_root;
    if (flags.split) cfg.split = *flags.split;
    if (!flags.demos.empty()) cfg.demos = flags.demos;
    if (flags.k) cfg.k = *flags.k;
    if (flags.w) cfg.w = *flags.w;
    if (flags.budget_total) cfg.budget.total = *flags.budget_total;
    if (flags.budget_dom) cfg.budget.dom = *flags.budget_dom;
    if (flags.budget_utterance) cfg.budget.per_utterance = *flags.budget_utterance;
    if (flags.budget_action) cfg.budget.per_action = *flags.budget_action;
    if (flags.budget_candidate) cfg.budget.per_candidate = *flags.budget_candidate;
    if (flags.embedder) cfg.embedder = *flags.embedder;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.lr) cfg.train.lr = *flags.lr;
    if (flags.steps) cfg.train.steps = *flags.steps;
    if (flags.batch) cfg.train.batch = *flags.batch;
    if (flags.negatives_per_positive)
        cfg.train.negatives_per_positive = *flags.negatives_per_positive;
    cfg.train.seed = cfg.seed;

    if (cfg.k < 1) throw UsageError("k must be at least 1");
    if (cfg.w < 1) throw UsageError("w must be at least 1");
    if (cfg.budget.total < 1 || cfg.budget.dom < 1 || cfg.budget.per_utterance < 1 ||
        cfg.budget.per_action < 1 || cfg.budget.per_candidate < 1)
        throw UsageError("token budgets must be positive");
    if (cfg.train.lr <= 0) throw UsageError("lr must be positive");
    if (cfg.train.steps < 1) throw UsageError("steps must be at least 1");
    if (cfg.train.batch < 1) throw UsageError("batch must be at least 1");
    if (cfg.train.negatives_per_positive < 0)
        throw UsageError("negatives_per_positive must be non-negative");
    if (cfg.embedder != "hashing" && cfg.embedder.rfind("projection:", 0) != 0 &&
        cfg.embedder.rfind("external:", 0) != 0)
        throw UsageError("embedder must be hashing, projection:<model-file> or "
                         "external:<vectors-file>");
    return cfg;
}

std::string config_hash(const RunConfig& cfg) {
    json doc;
    doc["data_root"] = cfg.data_root;
    doc["split"] = cfg.split;
    doc["demos"] = cfg.demos;
    doc["k"] = cfg.k;
    doc["w"] = cfg.w;
    doc["budget"] = {cfg.budget.total, cfg.budget.dom, cfg.budget.per_utterance,
                     cfg.budget.per_action, cfg.budget.per_candidate};
    doc["embedder"] = cfg.embedder;
    doc["seed"] = cfg.seed;
    doc["train"] = {cfg.train.lr, cfg.train.steps, cfg.train.batch,
                    cfg.train.negatives_per_positive};
    std::string text = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fs::path run_directory(const RunConfig& cfg) {
    fs::path dir = cfg.out_dir.empty() ? fs::path("runs") / config_hash(cfg)
                                       : fs::path(cfg.out_dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> select_demo_ids(const RunConfig& cfg) {
    if (cfg.data_root.empty())
        throw UsageError("no data root given (flag --data-root, config data_root, or "
                         "WEBNAV_DATA_ROOT)");
    if (!fs::is_directory(cfg.data_root))
        throw UsageError("data root is not a directory: " + cfg.data_root);

    std::vector<std::string> ids;
    if (!cfg.demos.empty()) {
        ids = cfg.demos;
    } else if (!cfg.split.empty()) {
        demo::SplitManifest manifest =
            demo::load_splits((fs::path(cfg.data_root) / "splits.json").string());
        auto it = manifest.splits.find(cfg.split);
        if (it == manifest.splits.end())
            throw UsageError("split '" + cfg.split + "' not present in splits.json");
        ids = it->second;
    } else {
        for (const auto& entry : fs::directory_iterator(cfg.data_root)) {
            if (entry.is_directory() && fs::is_regular_file(entry.path() / "metadata.json"))
                ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) throw UsageError("no demonstrations selected under " + cfg.data_root);
    return ids;
}

std::optional<dom::DomSnapshot> load_state_snapshot(const demo::State& state) {
    if (!state.dom_path || !state.viewport) return std::nullopt;
    const dom::DomSnapshot parsed =
        dom::parse_snapshot(read_text_file(*state.dom_path), *state.viewport);
    return std::optional<dom::DomSnapshot>(std::in_place, parsed);
}

std::optional<std::string> gold_uid(const action::Action& ref, const dom::DomSnapshot& snap) {
    if (!metrics::in_element_group(ref.intent)) return std::nullopt;
    try {
        return action::resolve_element_arg(ref, snap);
    } catch (const Error&) {
        return std::nullopt;
    }
}

struct Embedder {
    enum class Kind { Hashing, Projection, External } kind = Kind::Hashing;
    std::optional<dmr::ProjectionModel> model;
    std::optional<dmr::ExternalVectorStore> store;
};

Embedder make_embedder(const RunConfig& cfg) {
    Embedder e;
    if (cfg.embedder == "hashing") return e;
    std::string path = cfg.embedder.substr(cfg.embedder.find(':') + 1);
    if (!fs::is_regular_file(path))
        throw UsageError("embedder file not found: " + path);
    if (cfg.embedder.rfind("projection:", 0) == 0) {
        e.kind = Embedder::Kind::Projection;
        e.model = dmr::load_model(path);
    } else {
        e.kind = Embedder::Kind::External;
        e.store = dmr::ExternalVectorStore::load(path);
    }
    return e;
}

dmr::RankResult rank_turn(const std::string& demo_id, int turn_index,
                          const demo::EvalTurn& eval, const dom::DomSnapshot& snap,
                          const Embedder& embedder, const RunConfig& cfg) {
    std::vector<dmr::CandidateDoc> docs;
    for (const dom::DomElement* el : snap.elements()) {
        if (!el->bbox) continue; // only rendered elements can be acted on
        docs.push_back(dmr::build_candidate_doc(*el, snap));
    }
    if (docs.empty())
        throw DegenerateDataError(demo_id + " turn " + std::to_string(turn_index) +
                                  ": no candidates with bounding boxes");
    std::size_t k = static_cast<std::size_t>(cfg.k);
    if (embedder.kind == Embedder::Kind::External) {
        const std::string turn_key = demo_id + "/" + std::to_string(turn_index);
        const dmr::EmbeddingVector* qv = embedder.store->find(turn_key);
        if (qv == nullptr)
            throw SchemaError("external vectors missing query entry " + turn_key);
        std::vector<std::pair<std::string, dmr::EmbeddingVector>> embedded;
        for (const dmr::CandidateDoc& doc : docs) {
            const dmr::EmbeddingVector* cv = embedder.store->find(turn_key + "/" + doc.uid);
            if (cv == nullptr)
                throw SchemaError("external vectors missing candidate entry " + turn_key + "/" +
                                  doc.uid);
            embedded.emplace_back(doc.uid, *cv);
        }
        return dmr::rank_from_embeddings(*qv, embedded, k);
    }
    dmr::Query query =
        dmr::build_query(eval.state.history, eval.state.utterance, eval.state.viewport);
    const dmr::ProjectionModel* model =
        embedder.kind == Embedder::Kind::Projection ? &*embedder.model : nullptr;
    return dmr::rank_candidates(query, docs, k, model);
}

std::string jsonl(const std::vector<json>& records) {
    std::string out;
    for (const json& rec : records) out += rec.dump() + "\n";
    return out;
}

// ---------------------------------------------------------------------------

int cmd_validate(const RunConfig& cfg) {
    std::vector<std::string> ids = select_demo_ids(cfg);
    demo::LoadOptions lenient;
    lenient.strict_assets = false;
    int issue_count = 0;
    for (const std::string& id : ids) {
        demo::Demonstration d;
        try {
            d = demo::load_demonstration(cfg.data_root, id, lenient);
        } catch (const Error& e) {
            std::printf("%s LOAD_FAILED %s\n", id.c_str(), e.what());
            ++issue_count;
            continue;
        }
        for (const demo::ValidationIssue& issue : demo::validate_demonstration(d)) {
            std::printf("%s turn %d %s %s\n", id.c_str(), issue.turn_index,
                        issue.rule.c_str(), issue.message.c_str());
            ++issue_count;
        }
    }
    std::printf("checked %zu demonstration(s): %d issue(s)\n", ids.size(), issue_count);
    return issue_count == 0 ? 0 : 1;
}

int cmd_rank(const RunConfig& cfg) {
    std::vector<std::string> ids = select_demo_ids(cfg);
    Embedder embedder = make_embedder(cfg);
    fs::path run_dir = run_directory(cfg);

    std::vector<json> records;
    std::vector<std::pair<dmr::RankResult, std::string>> gold_results;
    std::size_t ranked = 0;
    for (const std::string& id : ids) {
        demo::Demonstration d = demo::load_demonstration(cfg.data_root, id);
        for (const demo::EvalTurn& eval : demo::iter_eval_turns(d, cfg.w)) {
            std::optional<dom::DomSnapshot> snap = load_state_snapshot(eval.state);
            if (!snap) {
                std::printf("notice: %s turn %d has no dom snapshot, skipped\n", id.c_str(),
                            eval.turn_index);
                continue;
            }
            dmr::RankResult result = rank_turn(id, eval.turn_index, eval, *snap, embedder, cfg);
            json topk = json::array();
            for (const dmr::RankEntry& entry : result.topk)
                topk.push_back({{"uid", entry.uid}, {"score", entry.score}});
            records.push_back(
                {{"demo_id", id}, {"turn_index", eval.turn_index}, {"topk", topk}});
            ++ranked;
            if (auto gold = gold_uid(eval.ref, *snap))
                gold_results.emplace_back(std::move(result), *gold);
        }
    }
    std::sort(records.begin(), records.end(), [](const json& a, const json& b) {
        return std::pair(a["demo_id"].get<std::string>(), a["turn_index"].get<int>()) <
               std::pair(b["demo_id"].get<std::string>(), b["turn_index"].get<int>());
    });
    write_text_file(run_dir / "ranks.jsonl", jsonl(records));

    json summary;
    summary["n_ranked"] = ranked;
    summary["n_gold"] = gold_results.size();
    if (!gold_results.empty()) {
        for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
            if (k > static_cast<std::size_t>(cfg.k)) continue;
            double r = dmr::recall_at_k(gold_results, k);
            summary["recall@" + std::to_string(k)] = r;
            std::printf("recall@%zu = %s\n", k, json(r).dump().c_str());
        }
    }
    write_text_file(run_dir / "rank_summary.json", summary.dump(2) + "\n");
    std::printf("ranked %zu turn(s) -> %s\n", ranked, (run_dir / "ranks.jsonl").c_str());
    return 0;
}

int cmd_build_input(const RunConfig& cfg, const std::optional<std::string>& ranks_flag) {
    std::vector<std::string> ids = select_demo_ids(cfg);
    fs::path run_dir = run_directory(cfg);
    fs::path ranks_path = ranks_flag ? fs::path(*ranks_flag) : run_dir / "ranks.jsonl";
    if (!fs::is_regular_file(ranks_path))
        throw UsageError("rank file not found: " + ranks_path.string() +
                         " (run the rank command first or pass --ranks)");

    // (demo_id, turn_index) -> ordered candidate uids
    std::map<std::pair<std::string, int>, std::vector<std::string>> wanted;
    {
        std::istringstream in(read_text_file(ranks_path.string()));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded() || !rec.contains("demo_id") || !rec.contains("turn_index") ||
                !rec.contains("topk") || !rec["topk"].is_array())
                throw SchemaError(ranks_path.string() + ":" + std::to_string(line_no) +
                                  ": expected {demo_id, turn_index, topk} record");
            std::vector<std::string> uids;
            for (const json& entry : rec["topk"]) uids.push_back(entry.at("uid").get<std::string>());
            wanted[{rec["demo_id"].get<std::string>(), rec["turn_index"].get<int>()}] =
                std::move(uids);
        }
    }

    std::vector<json> records;
    for (const std::string& id : ids) {
        demo::Demonstration d = demo::load_demonstration(cfg.data_root, id);
        for (const demo::EvalTurn& eval : demo::iter_eval_turns(d, cfg.w)) {
            auto it = wanted.find({id, eval.turn_index});
            if (it == wanted.end()) continue;
            std::optional<dom::DomSnapshot> snap = load_state_snapshot(eval.state);
            if (!snap)
                throw Error(id + " turn " + std::to_string(eval.turn_index) +
                            ": ranked turn lost its dom snapshot");
            dom::DomSnapshot pruned = dom::prune_to_candidates(*snap, it->second);
            otr::OtrState state;
            state.dom = &pruned;
            state.viewport = eval.state.viewport;
            state.utterance = eval.state.utterance;
            otr::OtrInput input =
                otr::build_otr_input(state, eval.state.history, it->second, cfg.budget);

            std::size_t n_utt =
                eval.state.history.utterances.size() + (eval.state.utterance ? 1 : 0);
            const auto& counts = input.token_counts;
            bool ok =
                counts.at("html") <= static_cast<std::size_t>(cfg.budget.dom) &&
                counts.at("utterances") <=
                    static_cast<std::size_t>(cfg.budget.per_utterance) * n_utt &&
                counts.at("actions") <= static_cast<std::size_t>(cfg.budget.per_action) *
                                            eval.state.history.actions.size() &&
                counts.at("total") <= static_cast<std::size_t>(cfg.budget.total);
            if (!ok)
                throw Error(id + " turn " + std::to_string(eval.turn_index) +
                            ": token budget violated");

            json sections = {{"html", input.html},
                             {"viewport", input.viewport},
                             {"utterances", input.utterances},
                             {"candidates", input.candidates},
                             {"actions", input.actions}};
            json token_counts = json::object();
            for (const auto& [name, value] : counts) token_counts[name] = value;
            records.push_back({{"demo_id", id},
                               {"turn_index", eval.turn_index},
                               {"sections", sections},
                               {"token_counts", token_counts}});
        }
    }
    std::sort(records.begin(), records.end(), [](const json& a, const json& b) {
        return std::pair(a["demo_id"].get<std::string>(), a["turn_index"].get<int>()) <
               std::pair(b["demo_id"].get<std::string>(), b["turn_index"].get<int>());
    });
    write_text_file(run_dir / "inputs.jsonl", jsonl(records));
    std::printf("built %zu input(s) -> %s\n", records.size(),
                (run_dir / "inputs.jsonl").c_str());
    return 0;
}

int cmd_score(const RunConfig& cfg, const std::string& predictions_path) {
    if (!fs::is_regular_file(predictions_path))
        throw UsageError("predictions file not found: " + predictions_path);
    std::vector<std::string> ids = select_demo_ids(cfg);
    fs::path run_dir = run_directory(cfg);

    std::map<std::pair<std::string, int>, std::string> raw_outputs;
    {
        std::istringstream in(read_text_file(predictions_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded() || !rec.contains("demo_id") || !rec.contains("turn_index") ||
                !rec.contains("raw_output") || !rec["raw_output"].is_string())
                throw SchemaError(predictions_path + ":" + std::to_string(line_no) +
                                  ": expected {demo_id, turn_index, raw_output} record");
            raw_outputs[{rec["demo_id"].get<std::string>(), rec["turn_index"].get<int>()}] =
                rec["raw_output"].get<std::string>();
        }
    }

    std::vector<metrics::TurnScore> scores;
    std::vector<json> turn_records;
    for (const std::string& id : ids) {
        demo::Demonstration d = demo::load_demonstration(cfg.data_root, id);
        for (const demo::EvalTurn& eval : demo::iter_eval_turns(d, cfg.w)) {
            std::optional<action::Action> pred;
            auto it = raw_outputs.find({id, eval.turn_index});
            if (it != raw_outputs.end()) {
                try {
                    pred = action::parse_action_string(it->second);
                } catch (const NoParsableActionError&) {
                    pred = std::nullopt; // scores zero, stays in the denominator
                }
            }
            std::optional<dom::DomSnapshot> snap = load_state_snapshot(eval.state);
            metrics::TurnScore ts =
                metrics::turn_score(pred, eval.ref, snap ? &*snap : nullptr);
            scores.push_back(ts);
            turn_records.push_back(
                {{"demo_id", id},
                 {"turn_index", eval.turn_index},
                 {"intent", action::intent_name(ts.ref_intent)},
                 {"im", ts.im},
                 {"element", ts.element ? json(*ts.element) : json(nullptr)},
                 {"text", ts.text ? json(*ts.text) : json(nullptr)},
                 {"value", ts.value}});
        }
    }

    metrics::ScoreReport report = metrics::aggregate(scores);
    write_text_file(run_dir / "turns.jsonl", jsonl(turn_records));
    write_text_file(run_dir / "report.json", metrics::report_to_json(report));
    std::string csv = metrics::report_to_csv(report);
    write_text_file(run_dir / "report.csv", csv);
    std::fputs(csv.c_str(), stdout);
    std::printf("scored %zu turn(s) -> %s\n", scores.size(), run_dir.c_str());
    return 0;
}

int cmd_train_dmr(const RunConfig& cfg, const std::string& examples_path) {
    if (!fs::is_regular_file(examples_path))
        throw UsageError("examples file not found: " + examples_path);
    fs::path run_dir = run_directory(cfg);

    std::vector<dmr::TrainExample> examples;
    {
        std::istringstream in(read_text_file(examples_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded() || !rec.contains("query") || !rec["query"].is_string() ||
                !rec.contains("candidate") || !rec["candidate"].is_object() ||
                !rec["candidate"].contains("uid") || !rec["candidate"].contains("text") ||
                !rec.contains("label") || !rec["label"].is_number_integer())
                throw SchemaError(examples_path + ":" + std::to_string(line_no) +
                                  ": expected {query, candidate:{uid,text}, label} record");
            int label = rec["label"].get<int>();
            if (label != 0 && label != 1)
                throw SchemaError(examples_path + ":" + std::to_string(line_no) +
                                  ": label must be 0 or 1");
            examples.push_back({rec["query"].get<std::string>(),
                                {rec["candidate"]["uid"].get<std::string>(),
                                 rec["candidate"]["text"].get<std::string>()},
                                label});
        }
    }
    if (examples.empty()) throw SchemaError(examples_path + ": no training examples");

    dmr::TrainResult result = dmr::train_projection(examples, cfg.train);
    dmr::save_model(result.model, (run_dir / "model.bin").string());
    std::string curve = "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
        curve += std::to_string(i) + "," + json(result.loss_curve[i]).dump() + "\n";
    write_text_file(run_dir / "loss_curve.csv", curve);
    std::printf("trained %d step(s): loss %s -> %s\n", cfg.train.steps,
                json(result.loss_curve.back()).dump().c_str(), (run_dir / "model.bin").c_str());
    return 0;
}

int cmd_report(const std::string& run_dir) {
    fs::path path = fs::path(run_dir) / "report.json";
    if (!fs::is_regular_file(path))
        throw UsageError("no report.json under " + run_dir);
    json doc = json::parse(read_text_file(path.string()), nullptr, false);
    if (doc.is_discarded()) throw SchemaError(path.string() + ": invalid json");

    metrics::ScoreReport report;
    try {
        report.overall = doc.at("overall").get<double>();
        report.im = doc.at("im").get<double>();
        if (!doc.at("eg_iou").is_null()) report.eg_iou = doc["eg_iou"].get<double>();
        if (!doc.at("tg_f1").is_null()) report.tg_f1 = doc["tg_f1"].get<double>();
        report.n_turns = doc.at("n_turns").get<int>();
        report.n_eg = doc.at("n_eg").get<int>();
        report.n_tg = doc.at("n_tg").get<int>();
        for (const auto& [name, cell] : doc.at("per_intent").items()) {
            metrics::IntentCell parsed;
            parsed.n = cell.at("n").get<int>();
            if (!cell.at("metric").is_null()) parsed.value = cell["metric"].get<double>();
            report.per_intent[name] = parsed;
        }
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    std::fputs(metrics::report_to_csv(report).c_str(), stdout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conversational web navigation toolkit"};
    app.require_subcommand(1);
    FlagValues flags;

    auto add_common = [&flags](CLI::App* cmd) {
        cmd->add_option("--config", flags.config, "json config file; flags override its values");
        cmd->add_option("--data-root", flags.data_root, "directory holding demonstrations");
        cmd->add_option("--split", flags.split, "split name from splits.json");
        cmd->add_option("--demo", flags.demos, "demonstration id (repeatable)");
        cmd->add_option("--k", flags.k, "candidates kept per turn");
        cmd->add_option("--w", flags.w, "history window size");
        cmd->add_option("--budget-total", flags.budget_total, "total token budget");
        cmd->add_option("--budget-dom", flags.budget_dom, "html section token budget");
        cmd->add_option("--budget-utterance", flags.budget_utterance, "tokens per utterance");
        cmd->add_option("--budget-action", flags.budget_action, "tokens per action");
        cmd->add_option("--budget-candidate", flags.budget_candidate, "tokens per candidate");
        cmd->add_option("--embedder", flags.embedder,
                        "hashing | projection:<model-file> | external:<vectors-file>");
        cmd->add_option("--seed", flags.seed, "seed for training and sampling");
        cmd->add_option("--out", flags.out_dir, "run directory (default runs/<config-hash>)");
        cmd->add_option("--lr", flags.lr, "training learning rate");
        cmd->add_option("--steps", flags.steps, "training steps");
        cmd->add_option("--batch", flags.batch, "training batch size");
        cmd->add_option("--negatives-per-positive", flags.negatives_per_positive,
                        "negative samples kept per positive");
    };

    CLI::App* validate =
        app.add_subcommand("validate", "check demonstrations against the turn rules");
    add_common(validate);
    CLI::App* rank = app.add_subcommand("rank", "rank candidate elements for every eval turn");
    add_common(rank);
    CLI::App* build_input =
        app.add_subcommand("build-input", "assemble budgeted model inputs from rank output");
    add_common(build_input);
    build_input->add_option("--ranks", flags.ranks_path,
                            "rank jsonl (default <run-dir>/ranks.jsonl)");
    CLI::App* score = app.add_subcommand("score", "score predictions against references");
    add_common(score);
    score->add_option("--predictions", flags.predictions_path, "predictions jsonl")->required();
    CLI::App* train = app.add_subcommand("train-dmr", "train the ranking projection");
    add_common(train);
    train->add_option("--examples", flags.examples_path, "training examples jsonl")->required();
    CLI::App* report = app.add_subcommand("report", "re-render a saved score report");
    report->add_option("--run", flags.run_dir, "run directory holding report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (report->parsed()) return cmd_report(*flags.run_dir);
        RunConfig cfg = build_config(flags);
        if (validate->parsed()) return cmd_validate(cfg);
        if (rank->parsed()) return cmd_rank(cfg);
        if (build_input->parsed()) return cmd_build_input(cfg, flags.ranks_path);
        if (score->parsed()) return cmd_score(cfg, *flags.predictions_path);
        if (train->parsed()) return cmd_train_dmr(cfg, *flags.examples_path);
        std::fprintf(stderr, "usage error: no subcommand\n");
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

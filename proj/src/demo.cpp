#include "webnav/demo.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "webnav/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace webnav::demo {

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("missing file: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("invalid json: " + path.string());
    return doc;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw MissingFileError("cannot write: " + path.string());
    out << text;
}

StateRef state_from_json(const json& node, int index) {
    if (!node.is_object())
        throw SchemaError("turn " + std::to_string(index) + ": state must be an object");
    StateRef ref;
    if (node.contains("dom")) {
        if (!node["dom"].is_string())
            throw SchemaError("turn " + std::to_string(index) + ": state.dom must be a string");
        ref.dom_path = node["dom"].get<std::string>();
    }
    if (node.contains("screenshot")) {
        if (!node["screenshot"].is_string())
            throw SchemaError("turn " + std::to_string(index) +
                              ": state.screenshot must be a string");
        ref.screenshot_path = node["screenshot"].get<std::string>();
    }
    if (node.contains("viewport")) {
        const json& vp = node["viewport"];
        if (!vp.is_object() || !vp.contains("width") || !vp.contains("height") ||
            !vp["width"].is_number_integer() || !vp["height"].is_number_integer())
            throw SchemaError("turn " + std::to_string(index) +
                              ": viewport needs integer width and height");
        dom::Viewport v{vp["width"].get<int>(), vp["height"].get<int>()};
        if (v.width <= 0 || v.height <= 0)
            throw SchemaError("turn " + std::to_string(index) + ": viewport must be positive");
        ref.viewport = v;
    }
    if (node.contains("utterance")) {
        if (!node["utterance"].is_string())
            throw SchemaError("turn " + std::to_string(index) +
                              ": state.utterance must be a string");
        ref.utterance = node["utterance"].get<std::string>();
    }
    return ref;
}

json state_to_json(const StateRef& ref) {
    json node = json::object();
    if (ref.dom_path) node["dom"] = *ref.dom_path;
    if (ref.screenshot_path) node["screenshot"] = *ref.screenshot_path;
    if (ref.viewport)
        node["viewport"] = {{"width", ref.viewport->width}, {"height", ref.viewport->height}};
    if (ref.utterance) node["utterance"] = *ref.utterance;
    return node;
}

} // namespace

std::optional<std::string> Demonstration::resolve(const std::optional<std::string>& rel) const {
    if (!rel) return std::nullopt;
    fs::path p(*rel);
    if (p.is_absolute() || dir.empty()) return *rel;
    return (fs::path(dir) / p).string();
}

Demonstration load_demonstration(const std::string& root, const std::string& id,
                                 const LoadOptions& options) {
    fs::path dir = fs::path(root) / id;
    if (!fs::is_directory(dir))
        throw MissingFileError("no demonstration directory: " + dir.string());
    Demonstration d;
    d.id = id;
    d.dir = dir.string();
    d.metadata = read_json_file(dir / "metadata.json");
    if (!d.metadata.is_object())
        throw SchemaError(id + ": metadata.json must hold an object");

    json turns = read_json_file(dir / "turns.json");
    if (!turns.is_array()) throw SchemaError(id + ": turns.json must hold an array");
    std::set<int> seen;
    for (const json& node : turns) {
        if (!node.is_object()) throw SchemaError(id + ": every turn must be an object");
        Turn turn;
        if (!node.contains("index") || !node["index"].is_number_integer())
            throw SchemaError(id + ": turn needs an integer index");
        turn.index = node["index"].get<int>();
        if (turn.index < 1)
            throw SchemaError(id + ": turn indices are 1-based, got " +
                              std::to_string(turn.index));
        if (!seen.insert(turn.index).second)
            throw SchemaError(id + ": duplicate turn index " + std::to_string(turn.index));
        if (!node.contains("kind") || !node["kind"].is_string())
            throw SchemaError(id + ": turn " + std::to_string(turn.index) +
                              " needs a kind of chat or browser");
        std::string kind = node["kind"].get<std::string>();
        if (kind == "chat")
            turn.kind = TurnKind::Chat;
        else if (kind == "browser")
            turn.kind = TurnKind::Browser;
        else
            throw SchemaError(id + ": turn " + std::to_string(turn.index) + ": unknown kind '" +
                              kind + "'");
        if (node.contains("speaker")) {
            if (!node["speaker"].is_string())
                throw SchemaError(id + ": turn " + std::to_string(turn.index) +
                                  ": speaker must be a string");
            auto sp = action::speaker_from_name(node["speaker"].get<std::string>());
            if (!sp)
                throw SchemaError(id + ": turn " + std::to_string(turn.index) +
                                  ": unknown speaker");
            turn.speaker = sp;
        }
        if (node.contains("action")) {
            if (!node["action"].is_string())
                throw SchemaError(id + ": turn " + std::to_string(turn.index) +
                                  ": action must be a string");
            try {
                turn.act = action::parse_action_string(node["action"].get<std::string>());
            } catch (const NoParsableActionError&) {
                throw SchemaError(id + ": turn " + std::to_string(turn.index) +
                                  ": unparseable action");
            }
        }
        if (node.contains("state")) turn.state = state_from_json(node["state"], turn.index);
        d.turns.push_back(std::move(turn));
    }

    if (options.strict_assets) {
        for (const Turn& turn : d.turns) {
            if (!turn.state || !turn.state->dom_path) continue;
            auto resolved = d.resolve(turn.state->dom_path);
            if (!fs::is_regular_file(*resolved))
                throw DanglingAssetError(id + ": turn " + std::to_string(turn.index) +
                                         " references missing dom asset " + *resolved);
        }
    }
    return d;
}

void write_demonstration(const Demonstration& d, const std::string& root) {
    fs::path dir = fs::path(root) / d.id;
    fs::create_directories(dir);
    write_text_file(dir / "metadata.json", d.metadata.dump(2) + "\n");

    json turns = json::array();
    for (const Turn& turn : d.turns) {
        json node;
        node["index"] = turn.index;
        node["kind"] = turn.kind == TurnKind::Chat ? "chat" : "browser";
        if (turn.speaker) node["speaker"] = action::speaker_name(*turn.speaker);
        if (turn.act) node["action"] = action::serialize_action(*turn.act);
        if (turn.state) node["state"] = state_to_json(*turn.state);
        turns.push_back(node);
    }
    write_text_file(dir / "turns.json", turns.dump(2) + "\n");

    auto copy_asset = [&](const std::optional<std::string>& rel) {
        if (!rel) return;
        auto src = d.resolve(rel);
        if (!src || !fs::is_regular_file(*src)) return;
        fs::path dst = dir / *rel;
        fs::create_directories(dst.parent_path());
        fs::copy_file(*src, dst, fs::copy_options::overwrite_existing);
    };
    for (const Turn& turn : d.turns) {
        if (!turn.state) continue;
        copy_asset(turn.state->dom_path);
        copy_asset(turn.state->screenshot_path);
    }
}

SplitManifest load_splits(const std::string& path) {
    static const std::set<std::string> kKnown = {"train",    "valid",    "test_iid", "test_web",
                                                 "test_cat", "test_geo", "test_vis"};
    json doc = read_json_file(path);
    if (!doc.is_object()) throw SchemaError(path + ": splits manifest must be an object");
    SplitManifest manifest;
    for (const auto& [name, ids] : doc.items()) {
        if (kKnown.find(name) == kKnown.end())
            throw SchemaError(path + ": unknown split '" + name + "'");
        if (!ids.is_array()) throw SchemaError(path + ": split '" + name + "' must be an array");
        std::vector<std::string> list;
        for (const json& id : ids) {
            if (!id.is_string())
                throw SchemaError(path + ": split '" + name + "' holds non-string ids");
            list.push_back(id.get<std::string>());
        }
        manifest.splits[name] = std::move(list);
    }
    return manifest;
}

std::vector<ValidationIssue> validate_demonstration(const Demonstration& d) {
    std::vector<ValidationIssue> issues;
    auto flag = [&](int index, const char* rule, std::string message) {
        issues.push_back({index, rule, std::move(message)});
    };
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
        const Turn& turn = d.turns[i];
        int expect = static_cast<int>(i) + 1;
        if (turn.index != expect)
            flag(turn.index, "TURN_INDEX_NOT_CONTIGUOUS",
                 "expected index " + std::to_string(expect) + ", found " +
                     std::to_string(turn.index));
        if (turn.kind == TurnKind::Browser) {
            if (turn.speaker)
                flag(turn.index, "SPEAKER_ON_BROWSER_TURN",
                     "browser turns carry no speaker");
            if (!turn.act)
                flag(turn.index, "BROWSER_TURN_WITHOUT_ACTION",
                     "browser turns record an action");
            else if (turn.act->intent == action::Intent::Say)
                flag(turn.index, "BROWSER_TURN_WITH_SAY", "say belongs to chat turns");
            if (!turn.state || !turn.state->dom_path)
                flag(turn.index, "MISSING_DOM_REF",
                     "browser turns reference a dom snapshot");
            if (turn.state && !turn.state->viewport)
                flag(turn.index, "MISSING_VIEWPORT", "browser states record the viewport");
        } else {
            if (!turn.speaker)
                flag(turn.index, "MISSING_SPEAKER_ON_CHAT_TURN",
                     "chat turns name their speaker");
            if (turn.act && turn.act->intent != action::Intent::Say)
                flag(turn.index, "CHAT_ACTION_NOT_SAY",
                     "chat turns may only carry say actions");
            if (turn.speaker == action::Speaker::Instructor && turn.act)
                flag(turn.index, "INSTRUCTOR_TURN_WITH_ACTION",
                     "instructor turns carry no agent action");
            if (turn.speaker == action::Speaker::Navigator && turn.act &&
                turn.act->intent == action::Intent::Say &&
                turn.act->speaker != action::Speaker::Navigator)
                flag(turn.index, "SAY_SPEAKER_MISMATCH",
                     "say speaker must match the turn speaker");
        }
        if (turn.state && turn.state->dom_path && !d.dir.empty()) {
            auto resolved = d.resolve(turn.state->dom_path);
            if (!std::filesystem::is_regular_file(*resolved))
                flag(turn.index, "DANGLING_ASSET", "missing dom asset " + *resolved);
        }
    }
    return issues;
}

bool is_eval_intent(action::Intent intent) {
    using action::Intent;
    return intent == Intent::Click || intent == Intent::Load || intent == Intent::Say ||
           intent == Intent::Submit || intent == Intent::Textinput;
}

std::vector<EvalTurn> iter_eval_turns(const Demonstration& d, int w) {
    std::vector<EvalTurn> out;
    std::vector<action::Action> all_actions;
    std::vector<std::string> all_utterances;
    for (const Turn& turn : d.turns) {
        if (turn.kind == TurnKind::Chat && turn.speaker == action::Speaker::Instructor) {
            if (turn.state && turn.state->utterance)
                all_utterances.push_back(*turn.state->utterance);
            continue;
        }
        if (!turn.act) continue;
        if (is_eval_intent(turn.act->intent)) {
            EvalTurn eval;
            eval.turn_index = turn.index;
            eval.ref = *turn.act;
            if (turn.state) {
                eval.state.dom_path = d.resolve(turn.state->dom_path);
                eval.state.viewport = turn.state->viewport;
                eval.state.utterance = turn.state->utterance;
            }
            eval.state.history = otr::window_history(all_actions, all_utterances, w);
            out.push_back(std::move(eval));
        }
        all_actions.push_back(*turn.act);
    }
    return out;
}

} // namespace webnav::demo

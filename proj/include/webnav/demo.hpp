#ifndef WEBNAV_DEMO_HPP
#define WEBNAV_DEMO_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "webnav/action.hpp"
#include "webnav/dom.hpp"
#include "webnav/otr.hpp"

namespace webnav::demo {

enum class TurnKind { Chat, Browser };

// Per-turn state as recorded. Asset paths are kept relative to the
// demonstration directory.
struct StateRef {
    std::optional<std::string> dom_path;
    std::optional<std::string> screenshot_path; // opaque, never parsed
    std::optional<dom::Viewport> viewport;
    std::optional<std::string> utterance; // current instruction

    bool operator==(const StateRef&) const = default;
};

struct Turn {
    int index = 0; // 1-based, contiguous
    TurnKind kind = TurnKind::Chat;
    std::optional<action::Speaker> speaker;  // chat turns
    std::optional<action::Action> act;       // browser and navigator-say turns
    std::optional<StateRef> state;

    bool operator==(const Turn&) const = default;
};

struct Demonstration {
    std::string id;
    std::vector<Turn> turns;
    nlohmann::json metadata; // free-form object
    std::string dir;         // where it was loaded from; not part of equality

    bool operator==(const Demonstration& o) const {
        return id == o.id && turns == o.turns && metadata == o.metadata;
    }

    std::optional<std::string> resolve(const std::optional<std::string>& rel) const;
};

struct SplitManifest {
    // split name -> demo ids, e.g. train, valid, test_iid, test_web,
    // test_cat, test_geo, test_vis.
    std::map<std::string, std::vector<std::string>> splits;
};

struct LoadOptions {
    // When set, a state referencing a missing dom file is fatal
    // (DanglingAssetError). cmd_validate loads leniently so the issue shows
    // up in the validation report instead.
    bool strict_assets = true;
};

// Reads <root>/<id>/{metadata.json, turns.json}. Missing files raise
// MissingFileError, malformed content SchemaError.
Demonstration load_demonstration(const std::string& root, const std::string& id,
                                 const LoadOptions& options = {});

// Writes metadata.json + turns.json under <root>/<id>/ and copies the
// referenced dom/screenshot assets so the result reloads to an equal value.
void write_demonstration(const Demonstration& d, const std::string& root);

SplitManifest load_splits(const std::string& path);

struct ValidationIssue {
    int turn_index = 0; // 0 = demonstration level
    std::string rule;
    std::string message;
};

// Non-fatal invariant checks: contiguous 1-based indices, instructor
// speakers only on chat turns, chat actions only say, browser turns with an
// action and an existing dom asset, say speaker matching the turn speaker.
std::vector<ValidationIssue> validate_demonstration(const Demonstration& d);

// Reconstructed model-facing state of one evaluated turn.
struct State {
    std::optional<std::string> dom_path; // resolved absolute path
    std::optional<dom::Viewport> viewport;
    std::optional<std::string> utterance; // current instruction
    otr::HistoryWindow history;           // windowed prior actions/utterances
};

struct EvalTurn {
    int turn_index = 0;
    action::Action ref; // reference action
    State state;
};

// Navigator turns whose intent is click, load, say, submit or textinput, in
// order. change/scroll and instructor turns never surface, but their
// actions/utterances stay visible inside the history window.
std::vector<EvalTurn> iter_eval_turns(const Demonstration& d, int w = 5);

bool is_eval_intent(action::Intent intent);

} // namespace webnav::demo

#endif

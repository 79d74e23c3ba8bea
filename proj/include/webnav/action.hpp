#ifndef WEBNAV_ACTION_HPP
#define WEBNAV_ACTION_HPP

#include <optional>
#include <string>
#include <vector>

namespace webnav::dom {
class DomSnapshot;
}

namespace webnav::action {

enum class Intent {
    Say,
    Click,
    Hover,
    Textinput,
    Change,
    Load,
    Submit,
    Scroll,
    Copy,
    Paste,
    TabCreate,
    TabRemove,
    TabSwitch,
};

inline constexpr int kIntentCount = 13;

enum class Speaker { Instructor, Navigator };

const std::string& intent_name(Intent intent);
std::optional<Intent> intent_from_name(const std::string& name);
const std::string& speaker_name(Speaker speaker);
std::optional<Speaker> speaker_from_name(const std::string& name);

// One action from the grammar. Exactly the arguments of the action's intent
// are set; everything else stays nullopt. click/hover carry either uid or
// x/y, never both.
struct Action {
    Intent intent = Intent::Say;
    std::optional<std::string> uid;
    std::optional<int> x;
    std::optional<int> y;
    std::optional<std::string> value;     // textinput / change
    std::optional<std::string> text;      // copy / paste
    std::optional<std::string> url;       // load
    std::optional<Speaker> speaker;       // say
    std::optional<std::string> utterance; // say
    std::optional<int> origin;            // tabswitch
    std::optional<int> target;            // tabremove / tabswitch

    bool operator==(const Action&) const = default;
};

// True when the argument set matches the intent's signature. An agent say
// must have speaker = navigator.
bool action_is_valid(const Action& a);

// Scans raw model output left to right and returns the first substring of
// the form intent(key=value, ...) that names a known intent with a valid
// argument set. String values may use single or double quotes with
// backslash escapes; integers are unquoted. Throws NoParsableActionError
// when nothing parses.
Action parse_action_string(const std::string& raw);

// Canonical form: lowercase intent, arguments in fixed order,
// comma-separated without spaces, strings double-quoted with escapes.
// parse_action_string(serialize_action(a)) == a for every valid action.
std::string serialize_action(const Action& a);

struct UrlSegments {
    std::string netloc;                     // lowercased host, no leading www.
    std::vector<std::string> path_segments; // "" never appears

    bool operator==(const UrlSegments&) const = default;
};

// Splits a URL into netloc plus path segments. Scheme is dropped, one
// leading "www." is stripped, empty path segments vanish, and a non-empty
// query/fragment each survive as one trailing segment ("?a=1", "#top").
// Strings that do not look like URLs degrade to netloc-only.
UrlSegments segment_url(const std::string& url);

// The uid an element action refers to: a uid argument is checked against
// the snapshot (UnknownUidError if absent), coordinates go through
// element_at_point. Actions without an element argument raise Error.
std::string resolve_element_arg(const Action& a, const dom::DomSnapshot& snap);

} // namespace webnav::action

#endif

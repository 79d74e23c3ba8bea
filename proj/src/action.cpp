#include "webnav/action.hpp"

#include <array>
#include <cctype>
#include <map>
#include <sstream>

#include "webnav/dom.hpp"
#include "webnav/errors.hpp"

namespace webnav::action {

namespace {

const std::array<std::string, kIntentCount> kIntentNames = {
    "say",    "click", "hover", "textinput", "change",    "load",     "submit",
    "scroll", "copy",  "paste", "tabcreate", "tabremove", "tabswitch",
};

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

} // namespace

const std::string& intent_name(Intent intent) {
    return kIntentNames[static_cast<std::size_t>(intent)];
}

std::optional<Intent> intent_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kIntentNames.size(); ++i)
        if (kIntentNames[i] == name) return static_cast<Intent>(i);
    return std::nullopt;
}

const std::string& speaker_name(Speaker speaker) {
    static const std::string instructor = "instructor", navigator = "navigator";
    return speaker == Speaker::Instructor ? instructor : navigator;
}

std::optional<Speaker> speaker_from_name(const std::string& name) {
    if (name == "instructor") return Speaker::Instructor;
    if (name == "navigator") return Speaker::Navigator;
    return std::nullopt;
}

namespace {

struct ArgValue {
    bool is_int = false;
    std::string str;
    int num = 0;
};

using ArgMap = std::map<std::string, ArgValue>;

bool want_str(const ArgMap& args, const std::string& key, std::optional<std::string>& out) {
    auto it = args.find(key);
    if (it == args.end() || it->second.is_int) return false;
    out = it->second.str;
    return true;
}

bool want_int(const ArgMap& args, const std::string& key, std::optional<int>& out) {
    auto it = args.find(key);
    if (it == args.end() || !it->second.is_int) return false;
    out = it->second.num;
    return true;
}

// Builds the typed action when the parsed key set matches the intent's
// signature exactly; nullopt otherwise.
std::optional<Action> typed_action(Intent intent, const ArgMap& args) {
    Action a;
    a.intent = intent;
    auto keys_are = [&](std::initializer_list<const char*> names) {
        if (args.size() != names.size()) return false;
        for (const char* n : names)
            if (args.find(n) == args.end()) return false;
        return true;
    };
    switch (intent) {
    case Intent::Say: {
        if (!keys_are({"speaker", "utterance"})) return std::nullopt;
        std::optional<std::string> speaker;
        if (!want_str(args, "speaker", speaker) || !want_str(args, "utterance", a.utterance))
            return std::nullopt;
        auto sp = speaker_from_name(*speaker);
        if (!sp || *sp != Speaker::Navigator) return std::nullopt;
        a.speaker = sp;
        return a;
    }
    case Intent::Click:
    case Intent::Hover:
        if (keys_are({"uid"})) {
            if (!want_str(args, "uid", a.uid)) return std::nullopt;
            return a;
        }
        if (keys_are({"x", "y"})) {
            if (!want_int(args, "x", a.x) || !want_int(args, "y", a.y)) return std::nullopt;
            return a;
        }
        return std::nullopt;
    case Intent::Textinput:
    case Intent::Change:
        if (!keys_are({"uid", "value"})) return std::nullopt;
        if (!want_str(args, "uid", a.uid) || !want_str(args, "value", a.value))
            return std::nullopt;
        return a;
    case Intent::Load:
        if (!keys_are({"url"})) return std::nullopt;
        if (!want_str(args, "url", a.url)) return std::nullopt;
        return a;
    case Intent::Submit:
        if (!keys_are({"uid"})) return std::nullopt;
        if (!want_str(args, "uid", a.uid)) return std::nullopt;
        return a;
    case Intent::Scroll:
        if (!keys_are({"x", "y"})) return std::nullopt;
        if (!want_int(args, "x", a.x) || !want_int(args, "y", a.y)) return std::nullopt;
        return a;
    case Intent::Copy:
    case Intent::Paste:
        if (!keys_are({"uid", "text"})) return std::nullopt;
        if (!want_str(args, "uid", a.uid) || !want_str(args, "text", a.text))
            return std::nullopt;
        return a;
    case Intent::TabCreate:
        if (!args.empty()) return std::nullopt;
        return a;
    case Intent::TabRemove:
        if (!keys_are({"target"})) return std::nullopt;
        if (!want_int(args, "target", a.target)) return std::nullopt;
        return a;
    case Intent::TabSwitch:
        if (!keys_are({"origin", "target"})) return std::nullopt;
        if (!want_int(args, "origin", a.origin) || !want_int(args, "target", a.target))
            return std::nullopt;
        return a;
    }
    return std::nullopt;
}

// Parses "key=value, key=value)" starting just past the opening paren.
// Returns the args and advances pos past the closing paren, or nullopt on
// any syntax error.
std::optional<ArgMap> parse_args(const std::string& s, std::size_t& pos) {
    ArgMap args;
    auto skip_ws = [&] {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    };
    skip_ws();
    if (pos < s.size() && s[pos] == ')') {
        ++pos;
        return args;
    }
    while (true) {
        skip_ws();
        std::size_t key_start = pos;
        while (pos < s.size() && is_word_char(s[pos])) ++pos;
        if (pos == key_start) return std::nullopt;
        std::string key = s.substr(key_start, pos - key_start);
        skip_ws();
        if (pos >= s.size() || s[pos] != '=') return std::nullopt;
        ++pos;
        skip_ws();
        if (pos >= s.size()) return std::nullopt;
        ArgValue value;
        char c = s[pos];
        if (c == '"' || c == '\'') {
            char quote = c;
            ++pos;
            std::string out;
            while (pos < s.size() && s[pos] != quote) {
                if (s[pos] == '\\' && pos + 1 < s.size()) {
                    ++pos;
                    char e = s[pos];
                    if (e == 'n') out.push_back('\n');
                    else if (e == 't') out.push_back('\t');
                    else out.push_back(e);
                } else {
                    out.push_back(s[pos]);
                }
                ++pos;
            }
            if (pos >= s.size()) return std::nullopt;
            ++pos; // closing quote
            value.str = out;
        } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c)) != 0) {
            std::size_t num_start = pos;
            if (c == '-') ++pos;
            std::size_t digits = 0;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
                ++pos;
                ++digits;
            }
            if (digits == 0) return std::nullopt;
            value.is_int = true;
            try {
                value.num = std::stoi(s.substr(num_start, pos - num_start));
            } catch (const std::exception&) {
                return std::nullopt;
            }
        } else {
            return std::nullopt;
        }
        if (!args.emplace(key, value).second) return std::nullopt;
        skip_ws();
        if (pos < s.size() && s[pos] == ',') {
            ++pos;
            continue;
        }
        if (pos < s.size() && s[pos] == ')') {
            ++pos;
            return args;
        }
        return std::nullopt;
    }
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace

bool action_is_valid(const Action& a) {
    auto only = [&](bool uid, bool xy, bool value, bool text, bool url, bool say,
                    bool origin, bool target) {
        return a.uid.has_value() == uid && a.x.has_value() == xy && a.y.has_value() == xy &&
               a.value.has_value() == value && a.text.has_value() == text &&
               a.url.has_value() == url && a.speaker.has_value() == say &&
               a.utterance.has_value() == say && a.origin.has_value() == origin &&
               a.target.has_value() == target;
    };
    switch (a.intent) {
    case Intent::Say:
        return only(false, false, false, false, false, true, false, false) &&
               a.speaker == Speaker::Navigator;
    case Intent::Click:
    case Intent::Hover:
        return only(true, false, false, false, false, false, false, false) ||
               only(false, true, false, false, false, false, false, false);
    case Intent::Textinput:
    case Intent::Change:
        return only(true, false, true, false, false, false, false, false);
    case Intent::Load:
        return only(false, false, false, false, true, false, false, false);
    case Intent::Submit:
        return only(true, false, false, false, false, false, false, false);
    case Intent::Scroll:
        return only(false, true, false, false, false, false, false, false);
    case Intent::Copy:
    case Intent::Paste:
        return only(true, false, false, true, false, false, false, false);
    case Intent::TabCreate:
        return only(false, false, false, false, false, false, false, false);
    case Intent::TabRemove:
        return only(false, false, false, false, false, false, false, true);
    case Intent::TabSwitch:
        return only(false, false, false, false, false, false, true, true);
    }
    return false;
}

Action parse_action_string(const std::string& raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!std::isalpha(static_cast<unsigned char>(raw[i]))) continue;
        if (i > 0 && is_word_char(raw[i - 1])) continue;
        std::size_t end = i;
        while (end < raw.size() && is_word_char(raw[end])) ++end;
        auto intent = intent_from_name(raw.substr(i, end - i));
        if (!intent) continue;
        std::size_t pos = end;
        while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
        if (pos >= raw.size() || raw[pos] != '(') continue;
        ++pos;
        auto args = parse_args(raw, pos);
        if (!args) continue;
        auto action = typed_action(*intent, *args);
        if (action) return *action;
    }
    throw NoParsableActionError("no parsable action in: " + raw);
}

std::string serialize_action(const Action& a) {
    std::ostringstream out;
    out << intent_name(a.intent) << '(';
    switch (a.intent) {
    case Intent::Say:
        out << "speaker=" << quote(speaker_name(*a.speaker))
            << ",utterance=" << quote(*a.utterance);
        break;
    case Intent::Click:
    case Intent::Hover:
        if (a.uid)
            out << "uid=" << quote(*a.uid);
        else
            out << "x=" << *a.x << ",y=" << *a.y;
        break;
    case Intent::Textinput:
    case Intent::Change:
        out << "uid=" << quote(*a.uid) << ",value=" << quote(*a.value);
        break;
    case Intent::Load:
        out << "url=" << quote(*a.url);
        break;
    case Intent::Submit:
        out << "uid=" << quote(*a.uid);
        break;
    case Intent::Scroll:
        out << "x=" << *a.x << ",y=" << *a.y;
        break;
    case Intent::Copy:
    case Intent::Paste:
        out << "uid=" << quote(*a.uid) << ",text=" << quote(*a.text);
        break;
    case Intent::TabCreate:
        break;
    case Intent::TabRemove:
        out << "target=" << *a.target;
        break;
    case Intent::TabSwitch:
        out << "origin=" << *a.origin << ",target=" << *a.target;
        break;
    }
    out << ')';
    return out.str();
}

std::string resolve_element_arg(const Action& a, const dom::DomSnapshot& snap) {
    if (a.uid) {
        if (!snap.has_uid(*a.uid)) throw UnknownUidError("unknown uid: " + *a.uid);
        return *a.uid;
    }
    if (a.x && a.y && (a.intent == Intent::Click || a.intent == Intent::Hover))
        return dom::element_at_point(snap, *a.x, *a.y).uid;
    throw Error("action " + intent_name(a.intent) + " has no element argument");
}

UrlSegments segment_url(const std::string& url) {
    UrlSegments seg;
    std::size_t pos = 0;
    // scheme
    std::size_t colon = url.find(':');
    if (colon != std::string::npos && colon > 0) {
        bool scheme_ok = std::isalpha(static_cast<unsigned char>(url[0])) != 0;
        for (std::size_t i = 1; i < colon && scheme_ok; ++i) {
            char c = url[i];
            scheme_ok = std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '+' ||
                        c == '-' || c == '.';
        }
        if (scheme_ok) pos = colon + 1;
    }
    if (url.compare(pos, 2, "//") == 0) pos += 2;
    std::size_t netloc_end = url.find_first_of("/?#", pos);
    if (netloc_end == std::string::npos) netloc_end = url.size();
    std::string netloc = url.substr(pos, netloc_end - pos);
    for (char& c : netloc) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (netloc.rfind("www.", 0) == 0) netloc = netloc.substr(4);
    seg.netloc = netloc;
    pos = netloc_end;

    std::size_t path_end = url.find_first_of("?#", pos);
    if (path_end == std::string::npos) path_end = url.size();
    std::string path = url.substr(pos, path_end - pos);
    std::string piece;
    for (char c : path) {
        if (c == '/') {
            if (!piece.empty()) seg.path_segments.push_back(piece);
            piece.clear();
        } else {
            piece.push_back(c);
        }
    }
    if (!piece.empty()) seg.path_segments.push_back(piece);

    if (path_end < url.size() && url[path_end] == '?') {
        std::size_t frag = url.find('#', path_end);
        std::string query = url.substr(path_end, (frag == std::string::npos ? url.size() : frag) -
                                                     path_end);
        if (query.size() > 1) seg.path_segments.push_back(query);
        path_end = frag == std::string::npos ? url.size() : frag;
    }
    if (path_end < url.size() && url[path_end] == '#') {
        std::string fragment = url.substr(path_end);
        if (fragment.size() > 1) seg.path_segments.push_back(fragment);
    }
    return seg;
}

} // namespace webnav::action

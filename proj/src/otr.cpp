#include "webnav/otr.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "webnav/errors.hpp"

namespace webnav::otr {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t count_default(std::string_view text) {
    std::size_t n = 0, i = 0;
    while (i < text.size()) {
        if (is_space(text[i])) {
            ++i;
        } else if (is_alnum(text[i])) {
            ++n;
            while (i < text.size() && is_alnum(text[i])) ++i;
        } else {
            ++n;
            ++i;
        }
    }
    return n;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// Joins the non-empty pieces with single spaces, which keeps the default
// counter additive: count(join) == sum(count(piece)).
std::string join_pieces(const std::vector<std::string>& pieces) {
    std::string out;
    for (const std::string& p : pieces) {
        if (p.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out += p;
    }
    return out;
}

} // namespace

const TokenCounter& default_token_counter() {
    static const TokenCounter counter{"default", " ", count_default};
    return counter;
}

std::string cut_to_tokens(const std::string& text, std::size_t max_tokens,
                          const TokenCounter& counter) {
    if (counter.count(text) <= max_tokens) return text;
    std::size_t lo = 0, hi = text.size();
    while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        if (counter.count(std::string_view(text).substr(0, mid)) <= max_tokens)
            lo = mid;
        else
            hi = mid - 1;
    }
    std::string out = text.substr(0, lo);
    while (!out.empty() && is_space(out.back())) out.pop_back();
    return out;
}

std::vector<std::size_t> truncate_to_budget(const std::vector<std::size_t>& lengths,
                                            std::size_t limit) {
    std::size_t total = 0, max_len = 0;
    for (std::size_t l : lengths) {
        total += l;
        max_len = std::max(max_len, l);
    }
    if (total <= limit) return lengths;

    auto capped_sum = [&](std::size_t t) {
        std::size_t s = 0;
        for (std::size_t l : lengths) s += std::min(l, t);
        return s;
    };
    std::size_t lo = 0, hi = max_len;
    while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        if (capped_sum(mid) <= limit)
            lo = mid;
        else
            hi = mid - 1;
    }
    const std::size_t threshold = lo;

    std::vector<std::size_t> allowed(lengths.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        allowed[i] = std::min(lengths[i], threshold);
        used += allowed[i];
    }
    std::size_t leftover = limit - used;
    for (std::size_t i = 0; i < allowed.size() && leftover > 0; ++i) {
        if (lengths[i] > threshold) {
            ++allowed[i];
            --leftover;
        }
    }
    return allowed;
}

HistoryWindow window_history(const std::vector<action::Action>& all_actions,
                             const std::vector<std::string>& all_utterances, int w) {
    if (w < 1) throw Error("history window must be at least 1");
    HistoryWindow window;
    window.w = w;
    const std::size_t uw = static_cast<std::size_t>(w);

    std::size_t a_start = all_actions.size() > uw ? all_actions.size() - uw : 0;
    window.actions.assign(all_actions.begin() + static_cast<std::ptrdiff_t>(a_start),
                          all_actions.end());

    if (all_utterances.size() <= uw) {
        window.utterances = all_utterances;
    } else {
        window.utterances.push_back(all_utterances.front());
        std::size_t u_start = all_utterances.size() - (uw - 1);
        window.utterances.insert(window.utterances.end(),
                                 all_utterances.begin() + static_cast<std::ptrdiff_t>(u_start),
                                 all_utterances.end());
    }
    return window;
}

namespace {

// One candidate line split into protected skeleton and the three
// truncatable slots (xpath, text, attributes).
struct CandidateParts {
    std::string uid;
    std::string tag;
    std::string bbox; // "x=.. y=.. width=.. height=.."
    std::string xpath;
    std::string text;
    std::string attributes;
};

CandidateParts candidate_parts(const dom::DomElement& el, const dom::DomSnapshot& snap) {
    if (!el.bbox)
        throw MissingBBoxError("candidate " + el.uid + " has no bounding box");
    CandidateParts parts;
    parts.uid = el.uid;
    parts.tag = el.tag;
    const dom::BoundingBox& b = *el.bbox;
    parts.bbox = "x=" + format_number(b.x) + " y=" + format_number(b.y) +
                 " width=" + format_number(b.width) + " height=" + format_number(b.height);
    parts.xpath = dom::xpath_of(snap, el.uid);
    parts.text = el.text;
    std::vector<std::string> attrs;
    for (const auto& [k, v] : el.attributes) attrs.push_back(k + "=\"" + v + "\"");
    parts.attributes = join_pieces(attrs);
    return parts;
}

std::string assemble_candidate(const CandidateParts& parts, const std::string& xpath,
                               const std::string& text, const std::string& attributes) {
    std::vector<std::string> pieces = {"(uid = " + parts.uid + ")",
                                       "[[tag]]",
                                       parts.tag,
                                       "[[xpath]]",
                                       xpath,
                                       "[[text]]",
                                       text,
                                       "[[bbox]]",
                                       parts.bbox,
                                       "[[attributes]]",
                                       attributes};
    return join_pieces(pieces);
}

std::size_t candidate_protected_tokens(const CandidateParts& parts, const TokenCounter& counter) {
    return counter.count(assemble_candidate(parts, "", "", ""));
}

// Flattened truncatable slots of the html rendering, in document order.
struct HtmlSlots {
    // Per element: attribute values first (attribute order), then own text.
    std::vector<std::string> values;
};

void collect_html_slots(const dom::DomElement& el, HtmlSlots& slots) {
    for (const auto& [k, v] : el.attributes) {
        (void)k;
        slots.values.push_back(v);
    }
    slots.values.push_back(el.text);
    for (const dom::DomElement& child : el.children) collect_html_slots(child, slots);
}

// Renders the pruned tree with each attribute value / text slot replaced by
// the entry at *next, advancing it. Passing the original slots reproduces
// the untruncated section.
std::string render_html(const dom::DomElement& el, const std::vector<std::string>& slot_values,
                        std::size_t* next) {
    std::vector<std::string> pieces;
    pieces.push_back(el.tag);
    for (const auto& [k, v] : el.attributes) {
        (void)v;
        pieces.push_back(k + "=\"" + slot_values[(*next)++] + "\"");
    }
    const std::string& text = slot_values[(*next)++];
    if (!text.empty()) pieces.push_back(text);
    if (!el.children.empty()) {
        pieces.push_back("(");
        for (const dom::DomElement& child : el.children)
            pieces.push_back(render_html(child, slot_values, next));
        pieces.push_back(")");
    }
    return join_pieces(pieces);
}

std::string truncate_section(const std::string& rendered, std::size_t limit,
                             const TokenCounter& counter) {
    if (counter.count(rendered) <= limit) return rendered;
    return cut_to_tokens(rendered, limit, counter);
}

} // namespace

std::string render_candidate_line(const dom::DomElement& el, const dom::DomSnapshot& snap,
                                  std::size_t budget_tokens, const TokenCounter& counter) {
    CandidateParts parts = candidate_parts(el, snap);
    std::size_t protected_tokens = candidate_protected_tokens(parts, counter);
    std::size_t avail = budget_tokens > protected_tokens ? budget_tokens - protected_tokens : 0;
    std::vector<std::size_t> lens = {counter.count(parts.xpath), counter.count(parts.text),
                                     counter.count(parts.attributes)};
    std::vector<std::size_t> allowed = truncate_to_budget(lens, avail);
    return assemble_candidate(parts, cut_to_tokens(parts.xpath, allowed[0], counter),
                              cut_to_tokens(parts.text, allowed[1], counter),
                              cut_to_tokens(parts.attributes, allowed[2], counter));
}

OtrInput build_otr_input(const OtrState& state, const HistoryWindow& history,
                         const std::vector<std::string>& candidate_uids,
                         const TokenBudget& budget, const TokenCounter& counter) {
    OtrInput input;
    std::size_t savings = 0;

    // html, truncated to the dom budget
    const std::size_t dom_limit = static_cast<std::size_t>(std::max(0, budget.dom));
    if (state.dom != nullptr) {
        HtmlSlots slots;
        collect_html_slots(state.dom->root(), slots);
        std::size_t probe = 0;
        std::string full = render_html(state.dom->root(), slots.values, &probe);
        std::size_t full_tokens = counter.count(full);
        if (full_tokens <= dom_limit) {
            input.html = full;
        } else {
            std::size_t skeleton = 0;
            {
                std::vector<std::string> empty(slots.values.size());
                std::size_t next = 0;
                skeleton = counter.count(render_html(state.dom->root(), empty, &next));
            }
            std::size_t avail = dom_limit > skeleton ? dom_limit - skeleton : 0;
            std::vector<std::size_t> lens;
            lens.reserve(slots.values.size());
            for (const std::string& v : slots.values) lens.push_back(counter.count(v));
            std::vector<std::size_t> allowed = truncate_to_budget(lens, avail);
            std::vector<std::string> cut(slots.values.size());
            for (std::size_t i = 0; i < slots.values.size(); ++i)
                cut[i] = cut_to_tokens(slots.values[i], allowed[i], counter);
            std::size_t next = 0;
            input.html = truncate_section(render_html(state.dom->root(), cut, &next), dom_limit,
                                          counter);
        }
    }
    std::size_t html_used = counter.count(input.html);
    savings += dom_limit > html_used ? dom_limit - html_used : 0;

    // viewport line, structural, not budgeted
    if (state.viewport)
        input.viewport = "viewport " + std::to_string(state.viewport->width) + "x" +
                         std::to_string(state.viewport->height);

    // utterances: windowed history plus the current instruction, one line each
    std::vector<std::string> utterances = history.utterances;
    if (state.utterance) utterances.push_back(*state.utterance);
    if (!utterances.empty()) {
        const std::size_t limit =
            static_cast<std::size_t>(std::max(0, budget.per_utterance)) * utterances.size();
        std::size_t prefix_tokens = 0;
        std::vector<std::size_t> lens;
        for (const std::string& u : utterances) {
            prefix_tokens += counter.count("user:");
            lens.push_back(counter.count(u));
        }
        std::size_t avail = limit > prefix_tokens ? limit - prefix_tokens : 0;
        std::vector<std::size_t> allowed = truncate_to_budget(lens, avail);
        std::vector<std::string> lines;
        for (std::size_t i = 0; i < utterances.size(); ++i) {
            std::string cut = cut_to_tokens(utterances[i], allowed[i], counter);
            lines.push_back(cut.empty() ? "user:" : "user: " + cut);
        }
        std::string joined;
        for (const std::string& line : lines) {
            if (!joined.empty()) joined.push_back('\n');
            joined += line;
        }
        input.utterances = truncate_section(joined, limit, counter);
        std::size_t used = counter.count(input.utterances);
        savings += limit > used ? limit - used : 0;
    }

    // actions: one serialized action per line
    if (!history.actions.empty()) {
        const std::size_t limit =
            static_cast<std::size_t>(std::max(0, budget.per_action)) * history.actions.size();
        std::vector<std::string> rendered;
        std::vector<std::size_t> lens;
        for (const action::Action& a : history.actions) {
            rendered.push_back(action::serialize_action(a));
            lens.push_back(counter.count(rendered.back()));
        }
        std::vector<std::size_t> allowed = truncate_to_budget(lens, limit);
        std::string joined;
        for (std::size_t i = 0; i < rendered.size(); ++i) {
            if (!joined.empty()) joined.push_back('\n');
            joined += cut_to_tokens(rendered[i], allowed[i], counter);
        }
        input.actions = truncate_section(joined, limit, counter);
        std::size_t used = counter.count(input.actions);
        savings += limit > used ? limit - used : 0;
    }

    // candidates, computed last so the saved budget lands here
    if (state.dom != nullptr && !candidate_uids.empty()) {
        std::size_t limit =
            static_cast<std::size_t>(std::max(0, budget.per_candidate)) * candidate_uids.size() +
            savings;
        const std::size_t others = counter.count(input.html) + counter.count(input.viewport) +
                                   counter.count(input.utterances) + counter.count(input.actions);
        const std::size_t total_limit = static_cast<std::size_t>(std::max(0, budget.total));
        limit = std::min(limit, total_limit > others ? total_limit - others : 0);
        std::vector<CandidateParts> parts;
        std::size_t protected_tokens = 0;
        std::vector<std::size_t> lens;
        for (const std::string& uid : candidate_uids) {
            parts.push_back(candidate_parts(state.dom->by_uid(uid), *state.dom));
            protected_tokens += candidate_protected_tokens(parts.back(), counter);
            lens.push_back(counter.count(parts.back().xpath));
            lens.push_back(counter.count(parts.back().text));
            lens.push_back(counter.count(parts.back().attributes));
        }
        std::size_t avail = limit > protected_tokens ? limit - protected_tokens : 0;
        std::vector<std::size_t> allowed = truncate_to_budget(lens, avail);
        std::string joined;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            std::string line = assemble_candidate(
                parts[i], cut_to_tokens(parts[i].xpath, allowed[3 * i], counter),
                cut_to_tokens(parts[i].text, allowed[3 * i + 1], counter),
                cut_to_tokens(parts[i].attributes, allowed[3 * i + 2], counter));
            if (!joined.empty()) joined.push_back('\n');
            joined += line;
        }
        input.candidates = truncate_section(joined, limit, counter);
    }

    input.token_counts["html"] = counter.count(input.html);
    input.token_counts["viewport"] = counter.count(input.viewport);
    input.token_counts["utterances"] = counter.count(input.utterances);
    input.token_counts["candidates"] = counter.count(input.candidates);
    input.token_counts["actions"] = counter.count(input.actions);
    input.token_counts["total"] = input.token_counts["html"] + input.token_counts["viewport"] +
                                  input.token_counts["utterances"] +
                                  input.token_counts["candidates"] +
                                  input.token_counts["actions"];
    return input;
}

} // namespace webnav::otr

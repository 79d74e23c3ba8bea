#ifndef WEBNAV_OTR_HPP
#define WEBNAV_OTR_HPP

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "webnav/action.hpp"
#include "webnav/dom.hpp"

namespace webnav::otr {

// Windowed view of the interaction history.
struct HistoryWindow {
    std::vector<action::Action> actions;  // chronological, size <= w
    std::vector<std::string> utterances;  // chronological, size <= w
    int w = 5;

    bool operator==(const HistoryWindow&) const = default;
};

// Keeps the last w actions and, for utterances, the first one plus the last
// w-1 (all of them when there are w or fewer).
HistoryWindow window_history(const std::vector<action::Action>& all_actions,
                             const std::vector<std::string>& all_utterances,
                             int w = 5);

struct TokenBudget {
    int total = 2048;
    int dom = 700;
    int per_utterance = 40;
    int per_action = 50;
    int per_candidate = 65;
};

// Pluggable token counting. count("") == 0 and counting is additive across
// concatenation with the separator.
struct TokenCounter {
    std::string name;
    std::string separator = " ";
    std::function<std::size_t(std::string_view)> count;
};

// Tokens are maximal alnum runs or single punctuation characters;
// whitespace only separates.
const TokenCounter& default_token_counter();

// Longest character prefix of text whose token count fits max_tokens,
// trailing whitespace trimmed.
std::string cut_to_tokens(const std::string& text, std::size_t max_tokens,
                          const TokenCounter& counter);

// Proportional truncation: when the lengths already fit the limit they come
// back unchanged; otherwise every length is capped at the maximal threshold
// T with sum(min(len, T)) <= limit and the leftover budget is handed out
// one token at a time to the capped entries in input order. The result sums
// to min(limit, sum(lengths)).
std::vector<std::size_t> truncate_to_budget(const std::vector<std::size_t>& lengths,
                                            std::size_t limit);

// One ranked element rendered as
//   (uid = ..) [[tag]] .. [[xpath]] .. [[text]] .. [[bbox]] x=.. y=..
//   width=.. height=.. [[attributes]] .. [[children]] ..
// with xpath, text, attributes and children truncated to fit budget_tokens;
// the uid prefix, tag, bbox numbers and bracketed keys are protected.
// Throws MissingBBoxError when the element has no box.
std::string render_candidate_line(const dom::DomElement& el, const dom::DomSnapshot& snap,
                                  std::size_t budget_tokens, const TokenCounter& counter);

// State fields the input assembler renders.
struct OtrState {
    const dom::DomSnapshot* dom = nullptr; // pruned snapshot, or null
    std::optional<dom::Viewport> viewport;
    std::optional<std::string> utterance;  // current instruction
};

struct OtrInput {
    // Section order is fixed: html, viewport, utterances, candidates, actions.
    std::string html;
    std::string viewport;
    std::string utterances;
    std::string candidates;
    std::string actions;
    std::map<std::string, std::size_t> token_counts; // per section + "total"

    std::size_t total_tokens() const { return token_counts.at("total"); }
};

// Assembles the model input. Components are truncated to their budgets
// (dom tokens for html; per_utterance/per_action/per_candidate times the
// item count for the list sections) and budget left over by the earlier
// sections is added to the candidate section, which is computed last.
// candidate_uids come from the ranker (top-k, document-order ties).
OtrInput build_otr_input(const OtrState& state, const HistoryWindow& history,
                         const std::vector<std::string>& candidate_uids,
                         const TokenBudget& budget = {},
                         const TokenCounter& counter = default_token_counter());

} // namespace webnav::otr

#endif

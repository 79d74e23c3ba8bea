#ifndef WEBNAV_METRICS_HPP
#define WEBNAV_METRICS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webnav/action.hpp"
#include "webnav/dom.hpp"

namespace webnav::metrics {

// Element group: scored by bounding-box overlap. Text group: scored by
// character/segment F1. textinput belongs to both.
bool in_element_group(action::Intent intent); // click, textinput, submit
bool in_text_group(action::Intent intent);    // load, say, textinput

// 1 when the predicted intent equals the reference intent, else 0. An
// unparseable prediction (nullopt) is 0.
int intent_match(const std::optional<action::Action>& pred, const action::Action& ref);

// Intersection over union of the two boxes; 0 when disjoint or when the
// union has zero area.
double iou(const dom::BoundingBox& a, const dom::BoundingBox& b);

// Intent match times the IoU of the predicted and reference element boxes.
// Unknown uids, unresolvable coordinates or missing boxes score 0.
double element_score(const std::optional<action::Action>& pred, const action::Action& ref,
                     const dom::DomSnapshot& snap);

// Character n-gram F-score, orders 1..6, whitespace stripped first. Orders
// where neither side has an n-gram are skipped; identical strings score 1
// (both empty included).
double chrf(const std::string& pred, const std::string& ref);

// Bag F1 over {netloc} + path segments of the two URLs (query/fragment ride
// along as trailing segments). Case-sensitive beyond netloc normalization.
double urlf(const std::string& pred_url, const std::string& ref_url);

// Intent match times chrF (say: utterances; textinput: values) or URLF
// (load: urls).
double text_score(const std::optional<action::Action>& pred, const action::Action& ref);

struct TurnScore {
    int im = 0;
    std::optional<double> element; // IM-scaled IoU, element-group turns only
    std::optional<double> text;    // IM-scaled chrF/URLF, text-group turns only
    double value = 0;              // micro-averaged into the overall score
    action::Intent ref_intent = action::Intent::Say;
};

// Applies the reference intent's scoring rule. textinput multiplies the
// intent match in exactly once: IM * IoU * chrF.
TurnScore turn_score(const std::optional<action::Action>& pred, const action::Action& ref,
                     const dom::DomSnapshot* snap);

struct IntentCell {
    double value = 0; // mean turn value for this intent
    int n = 0;
};

struct ScoreReport {
    double overall = 0;                   // micro-average of turn values
    double im = 0;                        // mean intent match
    std::optional<double> eg_iou;         // mean element component, EG turns
    std::optional<double> tg_f1;          // mean text component, TG turns
    std::map<std::string, IntentCell> per_intent;
    int n_turns = 0;
    int n_eg = 0;
    int n_tg = 0;
};

ScoreReport aggregate(const std::vector<TurnScore>& scores);

std::string report_to_json(const ScoreReport& report, int indent = 2);
std::string report_to_csv(const ScoreReport& report);

} // namespace webnav::metrics

#endif

#include "webnav/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>

#include <json.hpp>

#include "webnav/errors.hpp"

using json = nlohmann::json;

namespace webnav::metrics {

bool in_element_group(action::Intent intent) {
    using action::Intent;
    return intent == Intent::Click || intent == Intent::Textinput || intent == Intent::Submit;
}

bool in_text_group(action::Intent intent) {
    using action::Intent;
    return intent == Intent::Load || intent == Intent::Say || intent == Intent::Textinput;
}

int intent_match(const std::optional<action::Action>& pred, const action::Action& ref) {
    return pred && pred->intent == ref.intent ? 1 : 0;
}

double iou(const dom::BoundingBox& a, const dom::BoundingBox& b) {
    double ix = std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x);
    double iy = std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y);
    double inter = std::max(0.0, ix) * std::max(0.0, iy);
    double uni = a.width * a.height + b.width * b.height - inter;
    if (uni <= 0) return 0.0;
    return inter / uni;
}

namespace {

// Bounding box of an action's element argument; nullopt when the action has
// no element, the uid is unknown, the coordinates hit nothing, or the
// element has no box.
std::optional<dom::BoundingBox> element_box(const action::Action& a,
                                            const dom::DomSnapshot& snap) {
    try {
        const std::string uid = action::resolve_element_arg(a, snap);
        return snap.by_uid(uid).bbox;
    } catch (const Error&) {
        return std::nullopt;
    }
}

double raw_element_overlap(const action::Action& pred, const action::Action& ref,
                           const dom::DomSnapshot& snap) {
    auto pred_box = element_box(pred, snap);
    auto ref_box = element_box(ref, snap);
    if (!pred_box || !ref_box) return 0.0;
    return iou(*pred_box, *ref_box);
}

std::string strip_whitespace(const std::string& s) {
    std::string out;
    for (char c : s)
        if (std::isspace(static_cast<unsigned char>(c)) == 0) out.push_back(c);
    return out;
}

double raw_chrf(const std::string& pred_raw, const std::string& ref_raw) {
    const std::string pred = strip_whitespace(pred_raw);
    const std::string ref = strip_whitespace(ref_raw);
    if (pred.empty() && ref.empty()) return 1.0;
    double sum = 0;
    int orders = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        std::size_t n_pred = pred.size() >= n ? pred.size() - n + 1 : 0;
        std::size_t n_ref = ref.size() >= n ? ref.size() - n + 1 : 0;
        if (n_pred == 0 && n_ref == 0) continue;
        ++orders;
        std::unordered_map<std::string, std::size_t> ref_counts;
        for (std::size_t i = 0; i < n_ref; ++i) ++ref_counts[ref.substr(i, n)];
        std::size_t matches = 0;
        for (std::size_t i = 0; i < n_pred; ++i) {
            auto it = ref_counts.find(pred.substr(i, n));
            if (it != ref_counts.end() && it->second > 0) {
                ++matches;
                --it->second;
            }
        }
        double p = n_pred == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(n_pred);
        double r = n_ref == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(n_ref);
        if (p + r > 0) sum += 2.0 * p * r / (p + r);
    }
    return orders == 0 ? 0.0 : sum / orders;
}

double raw_urlf(const std::string& pred_url, const std::string& ref_url) {
    auto bag_of = [](const std::string& url) {
        action::UrlSegments seg = action::segment_url(url);
        std::vector<std::string> bag;
        if (!seg.netloc.empty()) bag.push_back(seg.netloc);
        for (const std::string& s : seg.path_segments) bag.push_back(s);
        return bag;
    };
    std::vector<std::string> pred = bag_of(pred_url), ref = bag_of(ref_url);
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;
    std::unordered_map<std::string, std::size_t> ref_counts;
    for (const std::string& s : ref) ++ref_counts[s];
    std::size_t matches = 0;
    for (const std::string& s : pred) {
        auto it = ref_counts.find(s);
        if (it != ref_counts.end() && it->second > 0) {
            ++matches;
            --it->second;
        }
    }
    double p = static_cast<double>(matches) / static_cast<double>(pred.size());
    double r = static_cast<double>(matches) / static_cast<double>(ref.size());
    if (p + r <= 0) return 0.0;
    return 2.0 * p * r / (p + r);
}

// The raw text component for matching intents; the intent gate is applied
// by the caller.
double raw_text_component(const action::Action& pred, const action::Action& ref) {
    switch (ref.intent) {
    case action::Intent::Say:
        return raw_chrf(pred.utterance.value_or(""), ref.utterance.value_or(""));
    case action::Intent::Textinput:
        return raw_chrf(pred.value.value_or(""), ref.value.value_or(""));
    case action::Intent::Load:
        return raw_urlf(pred.url.value_or(""), ref.url.value_or(""));
    default:
        throw Error("text score is defined for say, textinput and load");
    }
}

} // namespace

double chrf(const std::string& pred, const std::string& ref) { return raw_chrf(pred, ref); }

double urlf(const std::string& pred_url, const std::string& ref_url) {
    return raw_urlf(pred_url, ref_url);
}

double element_score(const std::optional<action::Action>& pred, const action::Action& ref,
                     const dom::DomSnapshot& snap) {
    if (intent_match(pred, ref) == 0) return 0.0;
    return raw_element_overlap(*pred, ref, snap);
}

double text_score(const std::optional<action::Action>& pred, const action::Action& ref) {
    if (intent_match(pred, ref) == 0) return 0.0;
    return raw_text_component(*pred, ref);
}

TurnScore turn_score(const std::optional<action::Action>& pred, const action::Action& ref,
                     const dom::DomSnapshot* snap) {
    TurnScore ts;
    ts.ref_intent = ref.intent;
    ts.im = intent_match(pred, ref);
    switch (ref.intent) {
    case action::Intent::Click:
    case action::Intent::Submit: {
        double overlap = ts.im != 0 && snap != nullptr
                             ? raw_element_overlap(*pred, ref, *snap)
                             : 0.0;
        ts.element = overlap;
        ts.value = overlap;
        break;
    }
    case action::Intent::Say:
    case action::Intent::Load: {
        double f1 = ts.im != 0 ? raw_text_component(*pred, ref) : 0.0;
        ts.text = f1;
        ts.value = f1;
        break;
    }
    case action::Intent::Textinput: {
        // one intent gate for the whole turn: IM * IoU * chrF
        double overlap = ts.im != 0 && snap != nullptr
                             ? raw_element_overlap(*pred, ref, *snap)
                             : 0.0;
        double f1 = ts.im != 0 ? raw_text_component(*pred, ref) : 0.0;
        ts.element = overlap;
        ts.text = f1;
        ts.value = overlap * f1;
        break;
    }
    default:
        throw Error("turn scoring covers click, load, say, submit and textinput");
    }
    return ts;
}

ScoreReport aggregate(const std::vector<TurnScore>& scores) {
    ScoreReport report;
    static const std::array<action::Intent, 5> kEvalIntents = {
        action::Intent::Click, action::Intent::Load, action::Intent::Say,
        action::Intent::Submit, action::Intent::Textinput};
    struct Cell {
        double sum = 0;
        int n = 0;
    };
    std::unordered_map<int, Cell> by_intent;
    double value_sum = 0, im_sum = 0, eg_sum = 0, tg_sum = 0;
    int n_eg = 0, n_tg = 0;
    for (const TurnScore& ts : scores) {
        value_sum += ts.value;
        im_sum += ts.im;
        if (in_element_group(ts.ref_intent)) {
            eg_sum += ts.element.value_or(0.0);
            ++n_eg;
        }
        if (in_text_group(ts.ref_intent)) {
            tg_sum += ts.text.value_or(0.0);
            ++n_tg;
        }
        Cell& cell = by_intent[static_cast<int>(ts.ref_intent)];
        cell.sum += ts.value;
        ++cell.n;
    }
    report.n_turns = static_cast<int>(scores.size());
    if (report.n_turns > 0) {
        report.overall = value_sum / report.n_turns;
        report.im = im_sum / report.n_turns;
    }
    if (n_eg > 0) report.eg_iou = eg_sum / n_eg;
    if (n_tg > 0) report.tg_f1 = tg_sum / n_tg;
    report.n_eg = n_eg;
    report.n_tg = n_tg;
    for (action::Intent intent : kEvalIntents) {
        IntentCell cell;
        auto it = by_intent.find(static_cast<int>(intent));
        if (it != by_intent.end()) {
            cell.n = it->second.n;
            cell.value = it->second.n > 0 ? it->second.sum / it->second.n : 0.0;
        }
        report.per_intent[action::intent_name(intent)] = cell;
    }
    return report;
}

std::string report_to_json(const ScoreReport& report, int indent) {
    json doc;
    doc["overall"] = report.overall;
    doc["im"] = report.im;
    doc["eg_iou"] = report.eg_iou ? json(*report.eg_iou) : json(nullptr);
    doc["tg_f1"] = report.tg_f1 ? json(*report.tg_f1) : json(nullptr);
    doc["n_turns"] = report.n_turns;
    doc["n_eg"] = report.n_eg;
    doc["n_tg"] = report.n_tg;
    doc["per_intent"] = json::object();
    for (const auto& [name, cell] : report.per_intent) {
        doc["per_intent"][name] = {{"metric", cell.n > 0 ? json(cell.value) : json(nullptr)},
                                   {"n", cell.n}};
    }
    return doc.dump(indent) + "\n";
}

std::string report_to_csv(const ScoreReport& report) {
    auto num = [](double v) { return json(v).dump(); };
    std::string out = "metric,value,n\n";
    out += "overall," + num(report.overall) + "," + std::to_string(report.n_turns) + "\n";
    out += "im," + num(report.im) + "," + std::to_string(report.n_turns) + "\n";
    out += "eg_iou," + (report.eg_iou ? num(*report.eg_iou) : "n/a") + "," +
           std::to_string(report.n_eg) + "\n";
    out += "tg_f1," + (report.tg_f1 ? num(*report.tg_f1) : "n/a") + "," +
           std::to_string(report.n_tg) + "\n";
    for (const auto& [name, cell] : report.per_intent)
        out += name + "," + (cell.n > 0 ? num(cell.value) : "n/a") + "," +
               std::to_string(cell.n) + "\n";
    return out;
}

} // namespace webnav::metrics

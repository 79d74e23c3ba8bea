#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "webnav/action.hpp"
#include "webnav/demo.hpp"
#include "webnav/dmr.hpp"
#include "webnav/dom.hpp"
#include "webnav/errors.hpp"
#include "webnav/metrics.hpp"
#include "webnav/otr.hpp"

namespace py = pybind11;
using namespace webnav;

namespace {

dom::BoundingBox box_from_tuple(const std::tuple<double, double, double, double>& t) {
    return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

py::object box_to_py(const std::optional<dom::BoundingBox>& box) {
    if (!box) return py::none();
    return py::make_tuple(box->x, box->y, box->width, box->height);
}

py::dict element_to_py(const dom::DomSnapshot& snap, const dom::DomElement& el) {
    py::dict out;
    out["uid"] = el.uid;
    out["tag"] = el.tag;
    out["text"] = el.text;
    out["attributes"] = el.attributes;
    out["bbox"] = box_to_py(el.bbox);
    out["xpath"] = dom::xpath_of(snap, el.uid);
    return out;
}

std::unique_ptr<dom::DomSnapshot> copy_snapshot(const dom::DomSnapshot& snap) {
    return std::make_unique<dom::DomSnapshot>(snap);
}

otr::HistoryWindow make_history(std::vector<action::Action> actions,
                                std::vector<std::string> utterances, int w) {
    otr::HistoryWindow history;
    history.actions = std::move(actions);
    history.utterances = std::move(utterances);
    history.w = w;
    return history;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "conversational web navigation core: action grammar, dom snapshots, "
              "token-budgeted inputs, element ranking and turn scoring";

    py::register_exception<Error>(m, "CoreError");

    // ------------------------------------------------------------- actions
    py::enum_<action::Intent>(m, "Intent")
        .value("SAY", action::Intent::Say)
        .value("CLICK", action::Intent::Click)
        .value("HOVER", action::Intent::Hover)
        .value("TEXTINPUT", action::Intent::Textinput)
        .value("CHANGE", action::Intent::Change)
        .value("LOAD", action::Intent::Load)
        .value("SUBMIT", action::Intent::Submit)
        .value("SCROLL", action::Intent::Scroll)
        .value("COPY", action::Intent::Copy)
        .value("PASTE", action::Intent::Paste)
        .value("TAB_CREATE", action::Intent::TabCreate)
        .value("TAB_REMOVE", action::Intent::TabRemove)
        .value("TAB_SWITCH", action::Intent::TabSwitch);

    py::enum_<action::Speaker>(m, "Speaker")
        .value("INSTRUCTOR", action::Speaker::Instructor)
        .value("NAVIGATOR", action::Speaker::Navigator);

    py::class_<action::Action>(m, "Action")
        .def(py::init<>())
        .def_readwrite("intent", &action::Action::intent)
        .def_readwrite("uid", &action::Action::uid)
        .def_readwrite("x", &action::Action::x)
        .def_readwrite("y", &action::Action::y)
        .def_readwrite("value", &action::Action::value)
        .def_readwrite("text", &action::Action::text)
        .def_readwrite("url", &action::Action::url)
        .def_readwrite("speaker", &action::Action::speaker)
        .def_readwrite("utterance", &action::Action::utterance)
        .def_readwrite("origin", &action::Action::origin)
        .def_readwrite("target", &action::Action::target)
        .def("__eq__",
             [](const action::Action& a, const action::Action& b) { return a == b; })
        .def("__repr__", [](const action::Action& a) {
            return "<Action " + action::serialize_action(a) + ">";
        });

    m.def("parse_action", &action::parse_action_string, py::arg("raw"),
          "First parseable action in a raw model output.");
    m.def("serialize_action", &action::serialize_action, py::arg("action"));
    m.def("action_is_valid", &action::action_is_valid, py::arg("action"));
    m.def("intent_name",
          [](action::Intent intent) { return action::intent_name(intent); });
    m.def("segment_url",
          [](const std::string& url) {
              action::UrlSegments segments = action::segment_url(url);
              py::dict out;
              out["netloc"] = segments.netloc;
              out["segments"] = segments.path_segments;
              return out;
          },
          py::arg("url"), "Normalized netloc and path segments used by the url metric.");

    // ----------------------------------------------------------------- dom
    py::class_<dom::DomSnapshot>(m, "DomSnapshot")
        .def_property_readonly("viewport",
                               [](const dom::DomSnapshot& s) {
                                   return py::make_tuple(s.viewport().width,
                                                         s.viewport().height);
                               })
        .def("__len__", &dom::DomSnapshot::size)
        .def("uids",
             [](const dom::DomSnapshot& s) {
                 std::vector<std::string> out;
                 for (const dom::DomElement* el : s.elements()) out.push_back(el->uid);
                 return out;
             },
             "All element uids in document order.")
        .def("has_uid", &dom::DomSnapshot::has_uid, py::arg("uid"))
        .def("element",
             [](const dom::DomSnapshot& s, const std::string& uid) {
                 return element_to_py(s, s.by_uid(uid));
             },
             py::arg("uid"))
        .def("xpath", [](const dom::DomSnapshot& s,
                         const std::string& uid) { return dom::xpath_of(s, uid); },
             py::arg("uid"))
        .def("element_at_point",
             [](const dom::DomSnapshot& s, double x, double y) {
                 return dom::element_at_point(s, x, y).uid;
             },
             py::arg("x"), py::arg("y"),
             "Uid of the smallest element containing the point.")
        .def("prune",
             [](const dom::DomSnapshot& s, const std::vector<std::string>& uids) {
                 const dom::DomSnapshot pruned = dom::prune_to_candidates(s, uids);
                 return copy_snapshot(pruned);
             },
             py::arg("uids"),
             "Snapshot keeping the uids, their ancestors, and child stubs.")
        .def("to_json",
             [](const dom::DomSnapshot& s) { return dom::snapshot_to_json(s.root()); })
        .def("candidate_doc",
             [](const dom::DomSnapshot& s, const std::string& uid) {
                 dmr::CandidateDoc doc = dmr::build_candidate_doc(s.by_uid(uid), s);
                 return py::make_tuple(doc.uid, doc.text);
             },
             py::arg("uid"), "(uid, text) pair fed to the ranker for this element.");

    m.def("parse_snapshot",
          [](const std::string& json_text, int width, int height) {
              const dom::DomSnapshot parsed =
                  dom::parse_snapshot(json_text, dom::Viewport{width, height});
              return copy_snapshot(parsed);
          },
          py::arg("json_text"), py::arg("width"), py::arg("height"));

    // --------------------------------------------------------------- inputs
    m.def("count_tokens",
          [](const std::string& text) { return otr::default_token_counter().count(text); },
          py::arg("text"));
    m.def("truncate_to_budget", &otr::truncate_to_budget, py::arg("lengths"),
          py::arg("limit"),
          "Per-item truncated lengths: maximal threshold, leftovers in input order.");
    m.def("window_history",
          [](const std::vector<action::Action>& actions,
             const std::vector<std::string>& utterances, int w) {
              otr::HistoryWindow windowed = otr::window_history(actions, utterances, w);
              return py::make_tuple(windowed.actions, windowed.utterances);
          },
          py::arg("actions"), py::arg("utterances"), py::arg("w") = 5,
          "Last w actions; first utterance plus the last w - 1.");
    m.def("build_otr_input",
          [](const dom::DomSnapshot& snap, std::optional<std::string> utterance,
             const std::vector<action::Action>& history_actions,
             const std::vector<std::string>& history_utterances,
             const std::vector<std::string>& candidates, int budget_total, int budget_dom,
             int budget_utterance, int budget_action, int budget_candidate) {
              otr::OtrState state;
              state.dom = &snap;
              state.viewport = snap.viewport();
              state.utterance = std::move(utterance);
              otr::HistoryWindow history =
                  make_history(history_actions, history_utterances, 5);
              otr::TokenBudget budget{budget_total, budget_dom, budget_utterance,
                                      budget_action, budget_candidate};
              otr::OtrInput input = otr::build_otr_input(state, history, candidates, budget);
              py::dict sections;
              sections["html"] = input.html;
              sections["viewport"] = input.viewport;
              sections["utterances"] = input.utterances;
              sections["candidates"] = input.candidates;
              sections["actions"] = input.actions;
              py::dict out;
              out["sections"] = sections;
              out["token_counts"] = input.token_counts;
              return out;
          },
          py::arg("snapshot"), py::arg("utterance") = std::nullopt,
          py::arg("history_actions") = std::vector<action::Action>{},
          py::arg("history_utterances") = std::vector<std::string>{},
          py::arg("candidates") = std::vector<std::string>{}, py::arg("budget_total") = 2048,
          py::arg("budget_dom") = 700, py::arg("budget_utterance") = 40,
          py::arg("budget_action") = 50, py::arg("budget_candidate") = 65,
          "Budgeted text rendering of a state: html, viewport, utterances, "
          "candidates, actions.");

    // -------------------------------------------------------------- ranking
    py::class_<dmr::ProjectionModel>(m, "ProjectionModel")
        .def_readonly("seed", &dmr::ProjectionModel::seed)
        .def_readonly("hash_dim", &dmr::ProjectionModel::hash_dim)
        .def_readonly("out_dim", &dmr::ProjectionModel::out_dim)
        .def_static("init", &dmr::ProjectionModel::init, py::arg("seed") = dmr::kDefaultSeed,
                    py::arg("hash_dim") = dmr::kHashDim, py::arg("out_dim") = dmr::kOutDim)
        .def("save",
             [](const dmr::ProjectionModel& model, const std::string& path) {
                 dmr::save_model(model, path);
             },
             py::arg("path"))
        .def("__eq__", [](const dmr::ProjectionModel& a, const dmr::ProjectionModel& b) {
            return a == b;
        });

    m.def("load_model", &dmr::load_model, py::arg("path"));
    m.def("embed",
          [](const std::string& text, const dmr::ProjectionModel* model) {
              return dmr::embed_hashed(text, model);
          },
          py::arg("text"), py::arg("model") = nullptr,
          "Unit-norm hashed character trigram embedding.");
    m.def("cosine", &dmr::cosine_sim, py::arg("a"), py::arg("b"));
    m.def("build_query",
          [](const std::vector<action::Action>& history_actions,
             const std::vector<std::string>& history_utterances,
             std::optional<std::string> utterance,
             std::optional<std::pair<int, int>> viewport) {
              otr::HistoryWindow history =
                  make_history(history_actions, history_utterances, 5);
              std::optional<dom::Viewport> vp;
              if (viewport) vp = dom::Viewport{viewport->first, viewport->second};
              return dmr::build_query(history, utterance, vp).text;
          },
          py::arg("history_actions") = std::vector<action::Action>{},
          py::arg("history_utterances") = std::vector<std::string>{},
          py::arg("utterance") = std::nullopt, py::arg("viewport") = std::nullopt);
    m.def("rank",
          [](const std::string& query,
             const std::vector<std::pair<std::string, std::string>>& docs, std::size_t k,
             const dmr::ProjectionModel* model) {
              std::vector<dmr::CandidateDoc> candidate_docs;
              for (const auto& [uid, text] : docs) candidate_docs.push_back({uid, text});
              dmr::RankResult result =
                  dmr::rank_candidates(dmr::Query{query}, candidate_docs, k, model);
              std::vector<std::pair<std::string, double>> out;
              for (const dmr::RankEntry& entry : result.topk)
                  out.emplace_back(entry.uid, entry.score);
              return out;
          },
          py::arg("query"), py::arg("docs"), py::arg("k") = 10,
          py::arg("model") = nullptr,
          "Top-k (uid, cosine) pairs, score descending, input order on ties.");
    m.def("train",
          [](const std::vector<std::tuple<std::string, std::string, std::string, int>>&
                 examples,
             double lr, int steps, int batch, int negatives_per_positive,
             std::uint64_t seed) {
              std::vector<dmr::TrainExample> train_examples;
              for (const auto& [query, uid, text, label] : examples)
                  train_examples.push_back({query, {uid, text}, label});
              dmr::TrainConfig config;
              config.lr = lr;
              config.steps = steps;
              config.batch = batch;
              config.negatives_per_positive = negatives_per_positive;
              config.seed = seed;
              dmr::TrainResult result = dmr::train_projection(train_examples, config);
              return py::make_tuple(result.model, result.loss_curve);
          },
          py::arg("examples"), py::arg("lr") = dmr::TrainConfig{}.lr,
          py::arg("steps") = dmr::TrainConfig{}.steps,
          py::arg("batch") = dmr::TrainConfig{}.batch,
          py::arg("negatives_per_positive") = dmr::TrainConfig{}.negatives_per_positive,
          py::arg("seed") = dmr::kDefaultSeed,
          "(model, loss_curve) from minibatch descent on (query, uid, text, label) rows.");

    // -------------------------------------------------------------- scoring
    m.def("iou",
          [](const std::tuple<double, double, double, double>& a,
             const std::tuple<double, double, double, double>& b) {
              return metrics::iou(box_from_tuple(a), box_from_tuple(b));
          },
          py::arg("a"), py::arg("b"), "Intersection over union of (x, y, w, h) boxes.");
    m.def("chrf", &metrics::chrf, py::arg("hyp"), py::arg("ref"),
          "Character n-gram F1, orders 1-6, whitespace stripped.");
    m.def("urlf", &metrics::urlf, py::arg("pred"), py::arg("ref"),
          "Segment-level F1 over normalized url parts.");
    m.def("turn_score",
          [](std::optional<action::Action> pred, const action::Action& ref,
             const dom::DomSnapshot* snap) {
              metrics::TurnScore score = metrics::turn_score(pred, ref, snap);
              py::dict out;
              out["im"] = score.im;
              out["element"] = score.element ? py::cast(*score.element) : py::none();
              out["text"] = score.text ? py::cast(*score.text) : py::none();
              out["value"] = score.value;
              out["intent"] = action::intent_name(score.ref_intent);
              return out;
          },
          py::arg("pred"), py::arg("ref"), py::arg("snapshot") = nullptr,
          "Intent match, gated element and text components, and the turn value.");

    // ------------------------------------------------------- demonstrations
    py::class_<demo::Demonstration>(m, "Demonstration")
        .def_readonly("id", &demo::Demonstration::id)
        .def_property_readonly(
            "n_turns", [](const demo::Demonstration& d) { return d.turns.size(); })
        .def("validate",
             [](const demo::Demonstration& d) {
                 std::vector<py::dict> out;
                 for (const demo::ValidationIssue& issue : demo::validate_demonstration(d)) {
                     py::dict row;
                     row["turn_index"] = issue.turn_index;
                     row["rule"] = issue.rule;
                     row["message"] = issue.message;
                     out.push_back(row);
                 }
                 return out;
             })
        .def("eval_turns",
             [](const demo::Demonstration& d, int w) {
                 std::vector<py::dict> out;
                 for (const demo::EvalTurn& turn : demo::iter_eval_turns(d, w)) {
                     py::dict row;
                     row["turn_index"] = turn.turn_index;
                     row["ref"] = turn.ref;
                     row["dom_path"] = turn.state.dom_path
                                           ? py::cast(*turn.state.dom_path)
                                           : py::none();
                     row["viewport"] =
                         turn.state.viewport
                             ? py::object(py::make_tuple(turn.state.viewport->width,
                                                         turn.state.viewport->height))
                             : py::object(py::none());
                     row["utterance"] = turn.state.utterance
                                            ? py::cast(*turn.state.utterance)
                                            : py::none();
                     row["history_actions"] = turn.state.history.actions;
                     row["history_utterances"] = turn.state.history.utterances;
                     out.push_back(row);
                 }
                 return out;
             },
             py::arg("w") = 5,
             "Scoreable turns with reference actions and windowed history.");

    m.def("load_demonstration",
          [](const std::string& root, const std::string& id, bool strict_assets) {
              demo::LoadOptions options;
              options.strict_assets = strict_assets;
              return demo::load_demonstration(root, id, options);
          },
          py::arg("root"), py::arg("id"), py::arg("strict_assets") = true);
    m.def("load_splits",
          [](const std::string& path) { return demo::load_splits(path).splits; },
          py::arg("path"));
}

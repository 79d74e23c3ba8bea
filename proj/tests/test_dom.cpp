#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "webnav/dom.hpp"
#include "webnav/errors.hpp"

using namespace webnav;
using dom::DomElement;
using dom::DomSnapshot;

namespace {

DomElement node(std::string uid, std::string tag,
                std::optional<dom::BoundingBox> bbox = std::nullopt,
                std::vector<DomElement> children = {}) {
    DomElement el;
    el.uid = std::move(uid);
    el.tag = std::move(tag);
    el.bbox = bbox;
    el.children = std::move(children);
    return el;
}

// page used by the xpath / prune cases:
// html > body > [div#d1 > (a,a,span), div#d2 > p]
DomSnapshot sample_page() {
    DomElement a1 = node("a1", "a", dom::BoundingBox{10, 10, 30, 10});
    DomElement a2 = node("a2", "a", dom::BoundingBox{10, 25, 30, 10});
    DomElement span = node("s1", "span");
    span.text = "hello";
    DomElement d1 = node("d1", "div", dom::BoundingBox{0, 0, 100, 50},
                         {a1, a2, span});
    d1.attributes = {{"class", "left"}};
    DomElement p = node("p1", "p");
    DomElement d2 = node("d2", "div", dom::BoundingBox{0, 50, 100, 50}, {p});
    DomElement body = node("b", "body", dom::BoundingBox{0, 0, 200, 100}, {d1, d2});
    DomElement html = node("h", "html", dom::BoundingBox{0, 0, 200, 100}, {body});
    return DomSnapshot(std::move(html), {200, 100});
}

struct FuzzTree {
    std::string json;
    std::vector<oracles::FlatBox> boxes;
};

void fuzz_node(oracles::SplitMix& rng, std::size_t depth, std::size_t& counter,
               std::size_t& order, std::string& json, std::vector<oracles::FlatBox>& boxes) {
    static const char* tags[] = {"div", "span", "a", "p", "button", "li"};
    std::string uid = "n" + std::to_string(counter++);
    oracles::FlatBox fb;
    fb.uid = uid;
    fb.depth = depth;
    fb.order = order++;
    json += "{\"uid\":\"" + uid + "\",\"tag\":\"" + tags[rng.below(6)] + "\"";
    if (rng.below(10) != 0) { // 10% of nodes go without a box
        fb.has_box = true;
        fb.x = static_cast<double>(rng.below(64));
        fb.y = static_cast<double>(rng.below(64));
        fb.w = static_cast<double>(rng.below(65));
        fb.h = static_cast<double>(rng.below(65));
        json += ",\"bbox\":{\"x\":" + std::to_string(static_cast<int>(fb.x)) +
                ",\"y\":" + std::to_string(static_cast<int>(fb.y)) +
                ",\"width\":" + std::to_string(static_cast<int>(fb.w)) +
                ",\"height\":" + std::to_string(static_cast<int>(fb.h)) + "}";
    }
    boxes.push_back(fb);
    std::size_t n_children = depth >= 4 ? 0 : rng.below(4);
    if (n_children > 0) {
        json += ",\"children\":[";
        for (std::size_t i = 0; i < n_children; ++i) {
            if (i > 0) json += ",";
            fuzz_node(rng, depth + 1, counter, order, json, boxes);
        }
        json += "]";
    }
    json += "}";
}

FuzzTree fuzz_tree(oracles::SplitMix& rng) {
    FuzzTree tree;
    std::size_t counter = 0, order = 0;
    fuzz_node(rng, 0, counter, order, tree.json, tree.boxes);
    return tree;
}

} // namespace

TEST_CASE("snapshot parsing and round trip") {
    const char* text = R"({
      "uid": "root", "tag": "HTML",
      "attributes": [["lang", "en"]],
      "children": [
        {"uid": "b", "tag": "body", "text": "hi",
         "bbox": {"x": 0, "y": 0, "width": 10, "height": 5}, "children": []}
      ]
    })";
    DomSnapshot snap = dom::parse_snapshot(text, {100, 100});
    CHECK(snap.root().tag == "html"); // lowercased
    CHECK(snap.root().attribute("lang") == "en");
    CHECK(snap.by_uid("b").text == "hi");
    CHECK(snap.size() == 2);

    DomSnapshot again = dom::parse_snapshot(dom::snapshot_to_json(snap.root()), {100, 100});
    CHECK(again == snap);
}

TEST_CASE("schema violations are fatal") {
    CHECK_THROWS_AS(dom::parse_snapshot("not json", {10, 10}), SchemaError);
    CHECK_THROWS_AS(dom::parse_snapshot(R"({"uid":"a"})", {10, 10}), SchemaError);
    CHECK_THROWS_AS(dom::parse_snapshot(R"({"uid":"a","tag":""})", {10, 10}), SchemaError);
    CHECK_THROWS_AS(
        dom::parse_snapshot(R"({"uid":"a","tag":"div","attributes":[["k","v"],["k","w"]]})",
                            {10, 10}),
        SchemaError);
    CHECK_THROWS_AS(
        dom::parse_snapshot(
            R"({"uid":"a","tag":"div","bbox":{"x":0,"y":0,"width":-1,"height":1}})", {10, 10}),
        SchemaError);
    CHECK_THROWS_AS(
        dom::parse_snapshot(
            R"({"uid":"a","tag":"div","children":[{"uid":"a","tag":"p"}]})", {10, 10}),
        DuplicateUidError);
    CHECK_THROWS_AS(dom::parse_snapshot(R"({"uid":"a","tag":"div"})", {0, 10}), SchemaError);
}

TEST_CASE("xpath ordinals count same-tag siblings only") {
    DomSnapshot snap = sample_page();
    CHECK(dom::xpath_of(snap, "h") == "/html");
    CHECK(dom::xpath_of(snap, "b") == "/html/body");
    CHECK(dom::xpath_of(snap, "d2") == "/html/body/div[2]");
    CHECK(dom::xpath_of(snap, "a1") == "/html/body/div[1]/a[1]");
    CHECK(dom::xpath_of(snap, "a2") == "/html/body/div[1]/a[2]");
    CHECK(dom::xpath_of(snap, "s1") == "/html/body/div[1]/span"); // lone span, no ordinal
    CHECK(dom::xpath_of(snap, "p1") == "/html/body/div[2]/p");
    CHECK_THROWS_AS(dom::xpath_of(snap, "ghost"), UnknownUidError);
}

TEST_CASE("element_at_point picks the smallest, deepest, latest") {
    DomSnapshot snap = sample_page();
    CHECK(dom::element_at_point(snap, 12, 12).uid == "a1");
    CHECK(dom::element_at_point(snap, 12, 27).uid == "a2");
    CHECK(dom::element_at_point(snap, 80, 10).uid == "d1");
    CHECK(dom::element_at_point(snap, 80, 60).uid == "d2");
    // right/bottom edges are exclusive, left/top inclusive
    CHECK(dom::element_at_point(snap, 10, 10).uid == "a1");
    CHECK(dom::element_at_point(snap, 40, 10).uid == "d1");
    CHECK(dom::element_at_point(snap, 150, 99).uid == "b");
    CHECK_THROWS_AS(dom::element_at_point(snap, 300, 5), NoElementAtPointError);
    CHECK_THROWS_AS(dom::element_at_point(snap, -1, 5), NoElementAtPointError);

    DomElement island = node("i", "div", dom::BoundingBox{0, 0, 10, 10});
    DomSnapshot gaps(std::move(island), {50, 50});
    CHECK(dom::element_at_point(gaps, 5, 5).uid == "i");
    CHECK_THROWS_AS(dom::element_at_point(gaps, 20, 20), NoElementAtPointError);
}

TEST_CASE("nested button beats its container") {
    DomElement button = node("btn", "button", dom::BoundingBox{20, 20, 40, 20});
    DomElement wrap = node("wrap", "div", dom::BoundingBox{20, 20, 40, 20}, {button});
    DomElement root = node("root", "html", dom::BoundingBox{0, 0, 100, 100}, {wrap});
    DomSnapshot snap(std::move(root), {100, 100});
    // same box: depth breaks the tie
    CHECK(dom::element_at_point(snap, 30, 30).uid == "btn");

    DomElement t1 = node("t1", "span", dom::BoundingBox{0, 0, 10, 10});
    DomElement t2 = node("t2", "span", dom::BoundingBox{0, 0, 10, 10});
    DomElement root2 = node("r", "html", dom::BoundingBox{0, 0, 100, 100}, {t1, t2});
    DomSnapshot snap2(std::move(root2), {100, 100});
    // same box and depth: later document order wins
    CHECK(dom::element_at_point(snap2, 5, 5).uid == "t2");
}

TEST_CASE("element_at_point agrees with the flat-scan oracle on fuzzed trees") {
    oracles::SplitMix rng(0xd0117ull);
    int checked = 0;
    for (int t = 0; t < 1100; ++t) {
        FuzzTree tree = fuzz_tree(rng);
        DomSnapshot snap = dom::parse_snapshot(tree.json, {64, 64});
        for (int q = 0; q < 3; ++q) {
            double px = static_cast<double>(rng.below(64));
            double py = static_cast<double>(rng.below(64));
            auto expect = oracles::brute_element_at(tree.boxes, px, py);
            if (expect) {
                CHECK(dom::element_at_point(snap, px, py).uid == *expect);
            } else {
                CHECK_THROWS_AS(dom::element_at_point(snap, px, py), NoElementAtPointError);
            }
            ++checked;
        }
    }
    CHECK(checked >= 3000);
}

TEST_CASE("prune keeps candidates, ancestors and child stubs") {
    DomSnapshot snap = sample_page();
    DomSnapshot pruned = dom::prune_to_candidates(snap, {"d1"});

    // kept: html > body > div#d1 with stub children; d2 subtree dropped
    CHECK(pruned.has_uid("h"));
    CHECK(pruned.has_uid("b"));
    CHECK(pruned.has_uid("d1"));
    CHECK(pruned.has_uid("a1"));
    CHECK(pruned.has_uid("s1"));
    CHECK_FALSE(pruned.has_uid("d2"));
    CHECK_FALSE(pruned.has_uid("p1"));

    // the candidate keeps its payload
    CHECK(pruned.by_uid("d1").attribute("class") == "left");
    // stubs are tag + uid only
    const DomElement& stub = pruned.by_uid("s1");
    CHECK(stub.tag == "span");
    CHECK(stub.text.empty());
    CHECK(stub.attributes.empty());
    CHECK_FALSE(stub.bbox.has_value());
    CHECK(stub.children.empty());

    // ancestors keep attributes but only the kept children
    CHECK(pruned.by_uid("b").children.size() == 1);

    SUBCASE("document order is preserved") {
        CHECK(pruned.document_order(pruned.by_uid("a1")) <
              pruned.document_order(pruned.by_uid("a2")));
        CHECK(pruned.document_order(pruned.by_uid("a2")) <
              pruned.document_order(pruned.by_uid("s1")));
    }

    SUBCASE("pruning is idempotent") {
        DomSnapshot twice = dom::prune_to_candidates(pruned, {"d1"});
        CHECK(twice == pruned);
    }

    SUBCASE("unknown candidates are rejected") {
        CHECK_THROWS_AS(dom::prune_to_candidates(snap, {"ghost"}), UnknownUidError);
    }
}

TEST_CASE("prune unions overlapping candidate sets") {
    DomSnapshot snap = sample_page();
    // d1 is a candidate and also an ancestor of a2: it stays full
    DomSnapshot pruned = dom::prune_to_candidates(snap, {"d1", "a2"});
    CHECK(pruned.by_uid("d1").attribute("class") == "left");
    CHECK(pruned.by_uid("a2").bbox.has_value()); // candidate, not a stub
    CHECK(pruned.by_uid("a1").attributes.empty() == snap.by_uid("a1").attributes.empty());

    DomSnapshot again = dom::prune_to_candidates(pruned, {"d1", "a2"});
    CHECK(again == pruned);
}

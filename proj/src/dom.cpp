#include "webnav/dom.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

#include <json.hpp>

#include "webnav/errors.hpp"

using json = nlohmann::json;

namespace webnav::dom {

std::optional<std::string> DomElement::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
        if (k == key) return v;
    return std::nullopt;
}

DomSnapshot::DomSnapshot(DomElement root, Viewport viewport)
    : root_(std::move(root)), viewport_(viewport) {
    if (viewport_.width <= 0 || viewport_.height <= 0)
        throw SchemaError("viewport dimensions must be positive");
    struct Frame {
        const DomElement* el;
        std::size_t parent;
        std::size_t depth;
    };
    std::vector<Frame> stack{{&root_, std::numeric_limits<std::size_t>::max(), 0}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        std::size_t ord = order_.size();
        order_.push_back(f.el);
        parent_.push_back(f.parent);
        depth_.push_back(f.depth);
        ord_index_[f.el] = ord;
        if (!uid_index_.emplace(f.el->uid, ord).second)
            throw DuplicateUidError("duplicate uid: " + f.el->uid);
        for (auto it = f.el->children.rbegin(); it != f.el->children.rend(); ++it)
            stack.push_back({&*it, ord, f.depth + 1});
    }
}

bool DomSnapshot::has_uid(const std::string& uid) const {
    return uid_index_.find(uid) != uid_index_.end();
}

const DomElement& DomSnapshot::by_uid(const std::string& uid) const {
    auto it = uid_index_.find(uid);
    if (it == uid_index_.end()) throw UnknownUidError("unknown uid: " + uid);
    return *order_[it->second];
}

std::size_t DomSnapshot::ordinal(const DomElement& el) const {
    auto it = ord_index_.find(&el);
    if (it == ord_index_.end()) throw UnknownUidError("element not part of this snapshot");
    return it->second;
}

const DomElement* DomSnapshot::parent_of(const DomElement& el) const {
    std::size_t p = parent_[ordinal(el)];
    return p == std::numeric_limits<std::size_t>::max() ? nullptr : order_[p];
}

std::size_t DomSnapshot::depth_of(const DomElement& el) const { return depth_[ordinal(el)]; }

std::size_t DomSnapshot::document_order(const DomElement& el) const { return ordinal(el); }

namespace {

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

DomElement element_from_json(const json& node) {
    if (!node.is_object()) throw SchemaError("dom node must be an object");
    DomElement el;
    if (!node.contains("uid") || !node["uid"].is_string())
        throw SchemaError("dom node needs a string uid");
    el.uid = node["uid"].get<std::string>();
    if (!node.contains("tag") || !node["tag"].is_string())
        throw SchemaError("dom node needs a string tag (uid " + el.uid + ")");
    el.tag = lowercase(node["tag"].get<std::string>());
    if (el.tag.empty()) throw SchemaError("empty tag (uid " + el.uid + ")");
    if (node.contains("attributes")) {
        const json& attrs = node["attributes"];
        if (!attrs.is_array()) throw SchemaError("attributes must be an array (uid " + el.uid + ")");
        std::set<std::string> seen;
        for (const json& pair : attrs) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
                !pair[1].is_string())
                throw SchemaError("attribute entries are [key, value] string pairs (uid " +
                                  el.uid + ")");
            std::string key = pair[0].get<std::string>();
            if (!seen.insert(key).second)
                throw SchemaError("duplicate attribute key '" + key + "' (uid " + el.uid + ")");
            el.attributes.emplace_back(key, pair[1].get<std::string>());
        }
    }
    if (node.contains("text")) {
        if (!node["text"].is_string()) throw SchemaError("text must be a string (uid " + el.uid + ")");
        el.text = node["text"].get<std::string>();
    }
    if (node.contains("bbox") && !node["bbox"].is_null()) {
        const json& b = node["bbox"];
        if (!b.is_object() || !b.contains("x") || !b.contains("y") || !b.contains("width") ||
            !b.contains("height") || !b["x"].is_number() || !b["y"].is_number() ||
            !b["width"].is_number() || !b["height"].is_number())
            throw SchemaError("bbox needs numeric x, y, width, height (uid " + el.uid + ")");
        BoundingBox box{b["x"].get<double>(), b["y"].get<double>(), b["width"].get<double>(),
                        b["height"].get<double>()};
        if (box.width < 0 || box.height < 0)
            throw SchemaError("bbox with negative extent (uid " + el.uid + ")");
        el.bbox = box;
    }
    if (node.contains("children")) {
        if (!node["children"].is_array())
            throw SchemaError("children must be an array (uid " + el.uid + ")");
        for (const json& child : node["children"]) el.children.push_back(element_from_json(child));
    }
    return el;
}

json element_to_json(const DomElement& el) {
    json node;
    node["uid"] = el.uid;
    node["tag"] = el.tag;
    node["attributes"] = json::array();
    for (const auto& [k, v] : el.attributes) node["attributes"].push_back(json::array({k, v}));
    node["text"] = el.text;
    if (el.bbox)
        node["bbox"] = {{"x", el.bbox->x},
                        {"y", el.bbox->y},
                        {"width", el.bbox->width},
                        {"height", el.bbox->height}};
    node["children"] = json::array();
    for (const DomElement& child : el.children) node["children"].push_back(element_to_json(child));
    return node;
}

} // namespace

DomSnapshot parse_snapshot(std::string_view json_text, Viewport viewport) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("dom snapshot is not valid json");
    return DomSnapshot(element_from_json(doc), viewport);
}

std::string snapshot_to_json(const DomElement& root, int indent) {
    return element_to_json(root).dump(indent);
}

std::string xpath_of(const DomSnapshot& snap, const std::string& uid) {
    const DomElement* el = &snap.by_uid(uid);
    std::vector<std::string> steps;
    while (el != nullptr) {
        const DomElement* parent = snap.parent_of(*el);
        std::string step = el->tag;
        if (parent != nullptr) {
            int same_tag = 0, ordinal = 0;
            for (const DomElement& sib : parent->children) {
                if (sib.tag != el->tag) continue;
                ++same_tag;
                if (&sib == el) ordinal = same_tag;
            }
            if (same_tag > 1) step += "[" + std::to_string(ordinal) + "]";
        }
        steps.push_back(step);
        el = parent;
    }
    std::string path;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) path += "/" + *it;
    return path;
}

const DomElement& element_at_point(const DomSnapshot& snap, double x, double y) {
    const Viewport& vp = snap.viewport();
    if (x < 0 || y < 0 || x >= vp.width || y >= vp.height)
        throw NoElementAtPointError("point (" + std::to_string(x) + ", " + std::to_string(y) +
                                    ") is outside the viewport");
    const DomElement* best = nullptr;
    double best_area = 0;
    std::size_t best_depth = 0, best_order = 0;
    for (const DomElement* el : snap.elements()) {
        if (!el->bbox) continue;
        const BoundingBox& b = *el->bbox;
        if (!(x >= b.x && x < b.x + b.width && y >= b.y && y < b.y + b.height)) continue;
        double area = b.width * b.height;
        std::size_t depth = snap.depth_of(*el), order = snap.document_order(*el);
        if (best == nullptr || area < best_area ||
            (area == best_area &&
             (depth > best_depth || (depth == best_depth && order > best_order)))) {
            best = el;
            best_area = area;
            best_depth = depth;
            best_order = order;
        }
    }
    if (best == nullptr)
        throw NoElementAtPointError("no element with a box contains (" + std::to_string(x) +
                                    ", " + std::to_string(y) + ")");
    return *best;
}

namespace {

enum class Keep { Drop, Stub, Full };

bool prune_walk(const DomSnapshot& snap, const DomElement& el,
                const std::unordered_map<const DomElement*, Keep>& marks, DomElement& out) {
    auto it = marks.find(&el);
    Keep keep = it == marks.end() ? Keep::Drop : it->second;
    if (keep == Keep::Drop) return false;
    out.uid = el.uid;
    out.tag = el.tag;
    if (keep == Keep::Full) {
        out.attributes = el.attributes;
        out.text = el.text;
        out.bbox = el.bbox;
        for (const DomElement& child : el.children) {
            DomElement kept;
            if (prune_walk(snap, child, marks, kept)) out.children.push_back(std::move(kept));
        }
    }
    return true;
}

} // namespace

DomSnapshot prune_to_candidates(const DomSnapshot& snap,
                                const std::vector<std::string>& candidates) {
    std::unordered_map<const DomElement*, Keep> marks;
    marks[&snap.root()] = Keep::Full;
    for (const std::string& uid : candidates) {
        const DomElement* el = &snap.by_uid(uid);
        for (const DomElement& child : el->children) {
            auto [it, inserted] = marks.emplace(&child, Keep::Stub);
            (void)it;
            (void)inserted;
        }
        while (el != nullptr) {
            marks[el] = Keep::Full;
            el = snap.parent_of(*el);
        }
    }
    DomElement pruned;
    prune_walk(snap, snap.root(), marks, pruned);
    return DomSnapshot(std::move(pruned), snap.viewport());
}

} // namespace webnav::dom

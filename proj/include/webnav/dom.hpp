#ifndef WEBNAV_DOM_HPP
#define WEBNAV_DOM_HPP

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace webnav::dom {

struct BoundingBox {
    double x = 0;
    double y = 0;
    double width = 0;  // >= 0
    double height = 0; // >= 0

    bool operator==(const BoundingBox&) const = default;
};

struct Viewport {
    int width = 0;  // pixels, > 0
    int height = 0; // pixels, > 0

    bool operator==(const Viewport&) const = default;
};

struct DomElement {
    std::string uid;
    std::string tag; // non-empty, lowercase
    std::vector<std::pair<std::string, std::string>> attributes; // unique keys
    std::string text; // own text, possibly empty
    std::optional<BoundingBox> bbox;
    std::vector<DomElement> children;

    bool operator==(const DomElement&) const = default;

    std::optional<std::string> attribute(std::string_view key) const;
};

// Immutable snapshot of a page. Safe for shared concurrent reads once
// constructed; uids are unique across the tree.
class DomSnapshot {
public:
    DomSnapshot(DomElement root, Viewport viewport);

    DomSnapshot(const DomSnapshot& other) : DomSnapshot(other.root_, other.viewport_) {}
    DomSnapshot& operator=(const DomSnapshot&) = delete;
    DomSnapshot(DomSnapshot&&) = delete;
    DomSnapshot& operator=(DomSnapshot&&) = delete;

    const DomElement& root() const { return root_; }
    const Viewport& viewport() const { return viewport_; }

    bool has_uid(const std::string& uid) const;
    // Throws UnknownUidError for absent uids.
    const DomElement& by_uid(const std::string& uid) const;
    const DomElement* parent_of(const DomElement& el) const;
    std::size_t depth_of(const DomElement& el) const;    // root is 0
    std::size_t document_order(const DomElement& el) const; // preorder index

    // All elements in document order (preorder).
    const std::vector<const DomElement*>& elements() const { return order_; }

    std::size_t size() const { return order_.size(); }

    bool operator==(const DomSnapshot& other) const {
        return root_ == other.root_ && viewport_ == other.viewport_;
    }

private:
    DomElement root_;
    Viewport viewport_;
    std::vector<const DomElement*> order_;
    std::vector<std::size_t> parent_;           // by preorder index, root -> npos
    std::vector<std::size_t> depth_;            // by preorder index
    std::unordered_map<std::string, std::size_t> uid_index_;
    std::unordered_map<const DomElement*, std::size_t> ord_index_;

    std::size_t ordinal(const DomElement& el) const;
};

// Parses the nested snapshot schema:
//   {uid, tag, attributes: [["k","v"], ...], text, bbox?, children: [...]}
// Tags are lowercased; duplicate uids raise DuplicateUidError, duplicate
// attribute keys or missing/empty fields raise SchemaError.
DomSnapshot parse_snapshot(std::string_view json_text, Viewport viewport);

// Absolute XPath with 1-based ordinals among same-tag siblings; the ordinal
// is omitted when the element has no same-tag sibling, e.g. /html/body/div[2]/a.
std::string xpath_of(const DomSnapshot& snap, const std::string& uid);

// Deepest, smallest element whose box contains (x, y). Containment is
// half-open: left/top edges inclusive, right/bottom exclusive. Ties on area
// go to the greater depth, then to the later document order. Elements
// without a bbox never match. Throws NoElementAtPointError when nothing
// contains the point (including points outside the viewport).
const DomElement& element_at_point(const DomSnapshot& snap, double x, double y);

// New snapshot keeping each candidate, every ancestor up to the root, and
// each candidate's direct children reduced to tag + uid stubs. Document
// order is preserved; pruning is idempotent for a fixed candidate set.
// Unknown candidate uids raise UnknownUidError.
DomSnapshot prune_to_candidates(const DomSnapshot& snap,
                                const std::vector<std::string>& candidates);

// Inverse of parse_snapshot for round trips and fixtures.
std::string snapshot_to_json(const DomElement& root, int indent = -1);

} // namespace webnav::dom

#endif

// Reference implementations used only by tests. Each one recomputes its
// quantity by the most literal route available (grids, exhaustive scans,
// naive counting) and never calls into the library.
#ifndef WEBNAV_TESTS_ORACLES_HPP
#define WEBNAV_TESTS_ORACLES_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracles {

// --- IoU by rasterizing integer boxes onto a unit grid ----------------------

struct IntBox {
    int x = 0, y = 0, w = 0, h = 0;
};

inline double grid_iou(const IntBox& a, const IntBox& b) {
    long long inter = 0, uni = 0;
    int lo_x = std::min(a.x, b.x), hi_x = std::max(a.x + a.w, b.x + b.w);
    int lo_y = std::min(a.y, b.y), hi_y = std::max(a.y + a.h, b.y + b.h);
    for (int i = lo_x; i < hi_x; ++i) {
        for (int j = lo_y; j < hi_y; ++j) {
            bool in_a = i >= a.x && i < a.x + a.w && j >= a.y && j < a.y + a.h;
            bool in_b = i >= b.x && i < b.x + b.w && j >= b.y && j < b.y + b.h;
            if (in_a && in_b) ++inter;
            if (in_a || in_b) ++uni;
        }
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// --- chrF by naive n-gram listing -------------------------------------------

inline std::vector<std::string> ngrams_of(const std::string& s, std::size_t n) {
    std::vector<std::string> out;
    if (s.size() >= n)
        for (std::size_t i = 0; i + n <= s.size(); ++i) out.push_back(s.substr(i, n));
    return out;
}

inline std::string strip_ws(const std::string& s) {
    std::string out;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
}

inline std::size_t multiset_overlap(std::vector<std::string> a, std::vector<std::string> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::string> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    return both.size();
}

inline double brute_chrf(const std::string& pred_raw, const std::string& ref_raw) {
    const std::string pred = strip_ws(pred_raw);
    const std::string ref = strip_ws(ref_raw);
    if (pred.empty() && ref.empty()) return 1.0;
    double sum = 0.0;
    int used = 0;
    for (std::size_t n = 1; n <= 6; ++n) {
        auto pg = ngrams_of(pred, n);
        auto rg = ngrams_of(ref, n);
        if (pg.empty() && rg.empty()) continue;
        ++used;
        double m = static_cast<double>(multiset_overlap(pg, rg));
        double p = pg.empty() ? 0.0 : m / static_cast<double>(pg.size());
        double r = rg.empty() ? 0.0 : m / static_cast<double>(rg.size());
        if (p + r > 0) sum += 2.0 * p * r / (p + r);
    }
    return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

// --- budget truncation by exhaustive threshold scan -------------------------

inline std::vector<std::size_t> exhaustive_truncate(const std::vector<std::size_t>& lengths,
                                                    std::size_t limit) {
    std::size_t total = 0, max_len = 0;
    for (auto l : lengths) {
        total += l;
        max_len = std::max(max_len, l);
    }
    if (total <= limit) return lengths;
    std::size_t best_t = 0;
    for (std::size_t t = 0; t <= max_len; ++t) {
        std::size_t s = 0;
        for (auto l : lengths) s += std::min(l, t);
        if (s <= limit) best_t = t;
    }
    std::vector<std::size_t> out;
    std::size_t used = 0;
    for (auto l : lengths) {
        out.push_back(std::min(l, best_t));
        used += out.back();
    }
    std::size_t leftover = limit - used;
    for (std::size_t i = 0; i < out.size() && leftover > 0; ++i) {
        if (lengths[i] > best_t) {
            ++out[i];
            --leftover;
        }
    }
    return out;
}

// --- ranking by full stable sort over manually computed cosines -------------

inline double manual_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::max(-1.0, std::min(1.0, dot));
}

// Returns indices of the top-k docs, score descending, input order on ties.
inline std::vector<std::size_t> stable_rank(const std::vector<double>& query_vec,
                                            const std::vector<std::vector<double>>& doc_vecs,
                                            std::size_t k) {
    std::vector<std::size_t> idx(doc_vecs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> score(doc_vecs.size());
    for (std::size_t i = 0; i < doc_vecs.size(); ++i)
        score[i] = manual_cosine(query_vec, doc_vecs[i]);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    if (idx.size() > k) idx.resize(k);
    return idx;
}

// --- point lookup on a flat element list ------------------------------------

struct FlatBox {
    std::string uid;
    bool has_box = false;
    double x = 0, y = 0, w = 0, h = 0;
    std::size_t depth = 0;
    std::size_t order = 0; // preorder position
};

// Minimal area, then greatest depth, then latest document order; half-open
// containment. Empty optional when nothing contains the point.
inline std::optional<std::string> brute_element_at(const std::vector<FlatBox>& boxes,
                                                   double px, double py) {
    const FlatBox* best = nullptr;
    for (const auto& b : boxes) {
        if (!b.has_box) continue;
        if (!(px >= b.x && px < b.x + b.w && py >= b.y && py < b.y + b.h)) continue;
        if (best == nullptr) {
            best = &b;
            continue;
        }
        double area = b.w * b.h, best_area = best->w * best->h;
        if (area < best_area ||
            (area == best_area &&
             (b.depth > best->depth || (b.depth == best->depth && b.order > best->order))))
            best = &b;
    }
    if (best == nullptr) return std::nullopt;
    return best->uid;
}

// --- deterministic rng for fuzz inputs ---------------------------------------

struct SplitMix {
    std::uint64_t state;
    explicit SplitMix(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // in [0, n)
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

} // namespace oracles

#endif

#include "webnav/dmr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "webnav/errors.hpp"

using json = nlohmann::json;

namespace webnav::dmr {

namespace {

std::uint64_t splitmix_at(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Bucket mapping for character n-grams. Fixed globally so that every model
// shares one hashed vocabulary; model seeds only shape the projection.
std::size_t gram_bucket(std::string_view gram, std::size_t hash_dim) {
    std::uint64_t h = 0xcbf29ce484222325ull ^ kDefaultSeed;
    for (unsigned char c : gram) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(splitmix_at(h, 0) % hash_dim);
}

// Counts per hashed bucket, kept sparse.
std::vector<std::pair<std::size_t, double>> hashed_counts(std::string_view text,
                                                          std::size_t hash_dim) {
    std::vector<std::size_t> buckets;
    if (text.size() >= 3) {
        for (std::size_t i = 0; i + 3 <= text.size(); ++i)
            buckets.push_back(gram_bucket(text.substr(i, 3), hash_dim));
    } else if (!text.empty()) {
        buckets.push_back(gram_bucket(text, hash_dim));
    }
    std::sort(buckets.begin(), buckets.end());
    std::vector<std::pair<std::size_t, double>> counts;
    for (std::size_t b : buckets) {
        if (!counts.empty() && counts.back().first == b)
            counts.back().second += 1.0;
        else
            counts.emplace_back(b, 1.0);
    }
    return counts;
}

const ProjectionModel& default_model() {
    static const ProjectionModel model = ProjectionModel::init();
    return model;
}

EmbeddingVector basis_vector(std::size_t dim) {
    EmbeddingVector v(dim, 0.0);
    if (dim > 0) v[0] = 1.0;
    return v;
}

// Wt * counts for sparse counts; empty when the result has zero norm.
bool project(const std::vector<std::pair<std::size_t, double>>& counts,
             const ProjectionModel& model, EmbeddingVector& out) {
    out.assign(model.out_dim, 0.0);
    for (const auto& [bucket, count] : counts) {
        const double* row = model.W.data() + bucket * model.out_dim;
        for (std::size_t j = 0; j < model.out_dim; ++j) out[j] += count * row[j];
    }
    double norm2 = 0;
    for (double v : out) norm2 += v * v;
    if (norm2 <= 0) return false;
    double inv = 1.0 / std::sqrt(norm2);
    for (double& v : out) v *= inv;
    return true;
}

} // namespace

ProjectionModel ProjectionModel::init(std::uint64_t seed, std::size_t hash_dim,
                                      std::size_t out_dim) {
    ProjectionModel model;
    model.seed = seed;
    model.hash_dim = hash_dim;
    model.out_dim = out_dim;
    model.W.resize(hash_dim * out_dim);
    for (std::size_t i = 0; i < model.W.size(); ++i)
        model.W[i] = (splitmix_at(seed, i) & 1ull) ? 1.0 : -1.0;
    return model;
}

EmbeddingVector embed_hashed(std::string_view text, const ProjectionModel* model) {
    const ProjectionModel& m = model != nullptr ? *model : default_model();
    auto counts = hashed_counts(text, m.hash_dim);
    if (counts.empty()) return basis_vector(m.out_dim);
    EmbeddingVector out;
    if (!project(counts, m, out)) return basis_vector(m.out_dim);
    return out;
}

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size()) throw Error("cosine over mismatched dimensions");
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot, -1.0, 1.0);
}

Query build_query(const otr::HistoryWindow& history, const std::optional<std::string>& utterance,
                  const std::optional<dom::Viewport>& viewport) {
    std::string text;
    auto add_line = [&](const std::string& line) {
        if (!text.empty()) text.push_back('\n');
        text += line;
    };
    for (const std::string& u : history.utterances) add_line("user: " + u);
    if (utterance) add_line("user: " + *utterance);
    for (const action::Action& a : history.actions) add_line(action::serialize_action(a));
    if (viewport)
        add_line("viewport " + std::to_string(viewport->width) + "x" +
                 std::to_string(viewport->height));
    return Query{text};
}

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string join_pieces(const std::vector<std::string>& pieces) {
    std::string out;
    for (const std::string& p : pieces) {
        if (p.empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out += p;
    }
    return out;
}

const char* kSalientAttrs[] = {"id",          "class", "name",  "role", "aria-label",
                               "placeholder", "href",  "value", "type", "title"};

} // namespace

CandidateDoc build_candidate_doc(const dom::DomElement& el, const dom::DomSnapshot& snap) {
    std::vector<std::string> pieces;
    pieces.push_back(el.tag);
    int kept = 0;
    for (const char* key : kSalientAttrs) {
        if (kept >= 5) break;
        if (auto v = el.attribute(key)) {
            pieces.push_back(std::string(key) + "=\"" + *v + "\"");
            ++kept;
        }
    }
    if (!el.text.empty()) pieces.push_back(el.text.substr(0, 64));
    std::string xpath = dom::xpath_of(snap, el.uid);
    std::vector<std::string> steps;
    std::string piece;
    for (char c : xpath) {
        if (c == '/') {
            if (!piece.empty()) steps.push_back(piece);
            piece.clear();
        } else {
            piece.push_back(c);
        }
    }
    if (!piece.empty()) steps.push_back(piece);
    std::size_t start = steps.size() > 3 ? steps.size() - 3 : 0;
    std::string tail;
    for (std::size_t i = start; i < steps.size(); ++i) tail += "/" + steps[i];
    pieces.push_back(tail);
    if (el.bbox)
        pieces.push_back("bbox x=" + format_number(el.bbox->x) + " y=" +
                         format_number(el.bbox->y) + " w=" + format_number(el.bbox->width) +
                         " h=" + format_number(el.bbox->height));
    return CandidateDoc{el.uid, join_pieces(pieces)};
}

RankResult rank_from_embeddings(const EmbeddingVector& query_vec,
                                const std::vector<std::pair<std::string, EmbeddingVector>>& docs,
                                std::size_t k) {
    if (docs.empty()) throw Error("ranking needs at least one candidate");
    if (k < 1) throw Error("ranking needs k >= 1");
    std::vector<double> scores(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i)
        scores[i] = cosine_sim(query_vec, docs[i].second);
    std::vector<std::size_t> idx(docs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t take = std::min(k, docs.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      better);
    RankResult result;
    result.k = k;
    for (std::size_t i = 0; i < take; ++i)
        result.topk.push_back({docs[idx[i]].first, scores[idx[i]]});
    return result;
}

RankResult rank_candidates(const Query& query, const std::vector<CandidateDoc>& docs,
                           std::size_t k, const ProjectionModel* model) {
    if (docs.empty()) throw Error("ranking needs at least one candidate");
    if (k < 1) throw Error("ranking needs k >= 1");
    EmbeddingVector qv = embed_hashed(query.text, model);
    std::vector<std::pair<std::string, EmbeddingVector>> embedded;
    embedded.reserve(docs.size());
    for (const CandidateDoc& doc : docs)
        embedded.emplace_back(doc.uid, embed_hashed(doc.text, model));
    return rank_from_embeddings(qv, embedded, k);
}

double recall_at_k(const std::vector<std::pair<RankResult, std::string>>& results,
                   std::size_t k) {
    if (results.empty()) throw Error("recall needs at least one ranked turn");
    if (k < 1) throw Error("recall needs k >= 1");
    std::size_t hits = 0;
    for (const auto& [result, gold] : results) {
        if (k > result.k) throw Error("recall cutoff exceeds the ranked depth");
        std::size_t take = std::min(k, result.topk.size());
        for (std::size_t i = 0; i < take; ++i) {
            if (result.topk[i].uid == gold) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

namespace {

struct EmbeddedSide {
    std::vector<std::pair<std::size_t, double>> counts;
    EmbeddingVector raw;  // W^T counts, before normalization
    double norm = 0;
    bool degenerate = false; // no features or zero norm: constant basis vector
    EmbeddingVector unit;
};

EmbeddedSide embed_side(const std::string& text, const ProjectionModel& model) {
    EmbeddedSide side;
    side.counts = hashed_counts(text, model.hash_dim);
    if (side.counts.empty()) {
        side.degenerate = true;
        side.unit = basis_vector(model.out_dim);
        return side;
    }
    side.raw.assign(model.out_dim, 0.0);
    for (const auto& [bucket, count] : side.counts) {
        const double* row = model.W.data() + bucket * model.out_dim;
        for (std::size_t j = 0; j < model.out_dim; ++j) side.raw[j] += count * row[j];
    }
    double norm2 = 0;
    for (double v : side.raw) norm2 += v * v;
    if (norm2 <= 0) {
        side.degenerate = true;
        side.unit = basis_vector(model.out_dim);
        return side;
    }
    side.norm = std::sqrt(norm2);
    side.unit = side.raw;
    for (double& v : side.unit) v /= side.norm;
    return side;
}

double pair_cosine(const EmbeddedSide& q, const EmbeddedSide& c) {
    double dot = 0;
    for (std::size_t j = 0; j < q.unit.size(); ++j) dot += q.unit[j] * c.unit[j];
    return std::clamp(dot, -1.0, 1.0);
}

// Adds this example's dL/dW to grad (row-major). Degenerate sides are
// constants and contribute nothing.
void accumulate_gradient(const TrainExample& ex, const ProjectionModel& model,
                         std::vector<double>& grad, double weight) {
    EmbeddedSide q = embed_side(ex.query, model);
    EmbeddedSide c = embed_side(ex.candidate.text, model);
    double cos = pair_cosine(q, c);
    double err = static_cast<double>(ex.label) - cos;
    double dl_dcos = -2.0 * err * weight;
    std::size_t d = model.out_dim;
    if (!q.degenerate) {
        // dcos/du = c_unit/|u| - cos * u_unit/|u|
        for (const auto& [bucket, count] : q.counts) {
            double* g = grad.data() + bucket * d;
            for (std::size_t j = 0; j < d; ++j) {
                double dcos_du = (c.unit[j] - cos * q.unit[j]) / q.norm;
                g[j] += dl_dcos * count * dcos_du;
            }
        }
    }
    if (!c.degenerate) {
        for (const auto& [bucket, count] : c.counts) {
            double* g = grad.data() + bucket * d;
            for (std::size_t j = 0; j < d; ++j) {
                double dcos_dv = (q.unit[j] - cos * c.unit[j]) / c.norm;
                g[j] += dl_dcos * count * dcos_dv;
            }
        }
    }
}

} // namespace

double pair_loss(const TrainExample& example, const ProjectionModel& model) {
    EmbeddedSide q = embed_side(example.query, model);
    EmbeddedSide c = embed_side(example.candidate.text, model);
    double err = static_cast<double>(example.label) - pair_cosine(q, c);
    return err * err;
}

std::vector<double> loss_gradient(const std::vector<TrainExample>& examples,
                                  const ProjectionModel& model) {
    if (examples.empty()) throw Error("gradient needs at least one example");
    std::vector<double> grad(model.W.size(), 0.0);
    double weight = 1.0 / static_cast<double>(examples.size());
    for (const TrainExample& ex : examples) accumulate_gradient(ex, model, grad, weight);
    return grad;
}

TrainResult train_projection(const std::vector<TrainExample>& examples,
                             const TrainConfig& config) {
    if (examples.empty()) throw Error("training needs examples");
    bool has_pos = false, has_neg = false;
    for (const TrainExample& ex : examples) (ex.label != 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DegenerateDataError("training needs both positive and negative labels");

    // group by query, first-appearance order
    std::vector<std::string> group_order;
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        auto [it, inserted] = groups.try_emplace(examples[i].query);
        if (inserted) group_order.push_back(examples[i].query);
        it->second.push_back(i);
    }

    // per positive keep at most negatives_per_positive negatives
    std::uint64_t sample_counter = 0;
    std::vector<std::size_t> pool;
    for (const std::string& q : group_order) {
        const std::vector<std::size_t>& members = groups[q];
        std::vector<std::size_t> positives, negatives;
        for (std::size_t i : members)
            (examples[i].label != 0 ? positives : negatives).push_back(i);
        std::size_t keep =
            positives.size() * static_cast<std::size_t>(std::max(0, config.negatives_per_positive));
        if (negatives.size() > keep) {
            // partial Fisher-Yates, seeded
            for (std::size_t i = 0; i < keep; ++i) {
                std::size_t j = i + static_cast<std::size_t>(
                                        splitmix_at(config.seed ^ 0xa5a5a5a5ull, sample_counter++) %
                                        (negatives.size() - i));
                std::swap(negatives[i], negatives[j]);
            }
            negatives.resize(keep);
            std::sort(negatives.begin(), negatives.end());
        }
        pool.insert(pool.end(), positives.begin(), positives.end());
        pool.insert(pool.end(), negatives.begin(), negatives.end());
    }
    if (pool.empty()) throw DegenerateDataError("no usable training pool");

    TrainResult result;
    result.model = ProjectionModel::init(config.seed);
    if (config.steps <= 0) return result;
    if (config.lr <= 0) throw Error("learning rate must be positive");
    const std::size_t batch =
        std::min(pool.size(), static_cast<std::size_t>(std::max(1, config.batch)));

    std::vector<std::size_t> order = pool;
    std::uint64_t shuffle_counter = 0;
    std::size_t cursor = order.size(); // forces a shuffle on first use
    std::vector<double> grad(result.model.W.size());
    for (int step = 0; step < config.steps; ++step) {
        std::vector<std::size_t> batch_idx;
        for (std::size_t j = 0; j < batch; ++j) {
            if (cursor >= order.size()) {
                for (std::size_t i = order.size(); i > 1; --i) {
                    std::size_t pick = static_cast<std::size_t>(
                        splitmix_at(config.seed ^ 0x5c5c5c5cull, shuffle_counter++) % i);
                    std::swap(order[i - 1], order[pick]);
                }
                cursor = 0;
            }
            batch_idx.push_back(order[cursor++]);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0;
        double weight = 1.0 / static_cast<double>(batch_idx.size());
        for (std::size_t i : batch_idx) {
            loss += weight * pair_loss(examples[i], result.model);
            accumulate_gradient(examples[i], result.model, grad, weight);
        }
        result.loss_curve.push_back(loss);
        for (std::size_t i = 0; i < grad.size(); ++i)
            if (grad[i] != 0) result.model.W[i] -= config.lr * grad[i];
    }
    return result;
}

namespace {
constexpr char kModelMagic[8] = {'W', 'N', 'D', 'M', 'R', '1', '\n', '\0'};
}

void save_model(const ProjectionModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingFileError("cannot write model file: " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    std::uint64_t seed = model.seed, hd = model.hash_dim, od = model.out_dim;
    out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
    out.write(reinterpret_cast<const char*>(&hd), sizeof(hd));
    out.write(reinterpret_cast<const char*>(&od), sizeof(od));
    out.write(reinterpret_cast<const char*>(model.W.data()),
              static_cast<std::streamsize>(model.W.size() * sizeof(double)));
    if (!out) throw Error("short write on model file: " + path);
}

ProjectionModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open model file: " + path);
    char magic[sizeof(kModelMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw SchemaError("not a projection model file: " + path);
    std::uint64_t seed = 0, hd = 0, od = 0;
    in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
    in.read(reinterpret_cast<char*>(&hd), sizeof(hd));
    in.read(reinterpret_cast<char*>(&od), sizeof(od));
    if (!in || hd == 0 || od == 0 || hd * od > (1ull << 28))
        throw SchemaError("corrupt model header: " + path);
    ProjectionModel model;
    model.seed = seed;
    model.hash_dim = static_cast<std::size_t>(hd);
    model.out_dim = static_cast<std::size_t>(od);
    model.W.resize(model.hash_dim * model.out_dim);
    in.read(reinterpret_cast<char*>(model.W.data()),
            static_cast<std::streamsize>(model.W.size() * sizeof(double)));
    if (!in) throw SchemaError("truncated model file: " + path);
    return model;
}

const EmbeddingVector* ExternalVectorStore::find(const std::string& id) const {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &it->second;
}

ExternalVectorStore ExternalVectorStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("cannot open vector file: " + path);
    ExternalVectorStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded())
            throw SchemaError(path + ":" + std::to_string(line_no) + ": invalid json");
        if (store.dim == 0 && doc.contains("dim")) {
            if (!doc["dim"].is_number_unsigned() || doc["dim"].get<std::size_t>() == 0)
                throw SchemaError(path + ": dim header must be a positive integer");
            store.dim = doc["dim"].get<std::size_t>();
            continue;
        }
        if (store.dim == 0)
            throw SchemaError(path + ": first line must be the {\"dim\": N} header");
        if (!doc.contains("id") || !doc["id"].is_string() || !doc.contains("vector") ||
            !doc["vector"].is_array())
            throw SchemaError(path + ":" + std::to_string(line_no) +
                              ": expected {id, vector} entry");
        EmbeddingVector vec;
        for (const json& v : doc["vector"]) {
            if (!v.is_number())
                throw SchemaError(path + ":" + std::to_string(line_no) + ": non-numeric vector");
            vec.push_back(v.get<double>());
        }
        if (vec.size() != store.dim)
            throw SchemaError(path + ":" + std::to_string(line_no) + ": expected dim " +
                              std::to_string(store.dim) + ", got " + std::to_string(vec.size()));
        double norm2 = 0;
        for (double v : vec) norm2 += v * v;
        if (norm2 <= 0)
            throw SchemaError(path + ":" + std::to_string(line_no) + ": zero vector");
        double inv = 1.0 / std::sqrt(norm2);
        for (double& v : vec) v *= inv;
        store.by_id[doc["id"].get<std::string>()] = std::move(vec);
    }
    if (store.dim == 0) throw SchemaError(path + ": missing {\"dim\": N} header");
    return store;
}

} // namespace webnav::dmr

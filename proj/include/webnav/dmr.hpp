#ifndef WEBNAV_DMR_HPP
#define WEBNAV_DMR_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "webnav/dom.hpp"
#include "webnav/otr.hpp"

namespace webnav::dmr {

inline constexpr std::size_t kHashDim = 4096;
inline constexpr std::size_t kOutDim = 256;
inline constexpr std::uint64_t kDefaultSeed = 0x5eed00c1u;

struct Query {
    std::string text;

    bool operator==(const Query&) const = default;
};

// Flattened rendering of the current state: one "user: " line per windowed
// utterance (current instruction last), one line per windowed action in
// canonical serialized form, then "viewport WxH" when known.
Query build_query(const otr::HistoryWindow& history,
                  const std::optional<std::string>& utterance,
                  const std::optional<dom::Viewport>& viewport);

struct CandidateDoc {
    std::string uid;
    std::string text;

    bool operator==(const CandidateDoc&) const = default;
};

// Simplified element text: tag, up to five salient attributes (id, class,
// name, role, aria-label, placeholder, href, value, type, title), own text
// clipped to 64 chars, the last three xpath steps, and the bounding box.
CandidateDoc build_candidate_doc(const dom::DomElement& el, const dom::DomSnapshot& snap);

using EmbeddingVector = std::vector<double>;

// Learned (or identity-seeded) projection from hashed n-gram counts to the
// embedding space. W is row-major hash_dim x out_dim.
struct ProjectionModel {
    std::uint64_t seed = kDefaultSeed;
    std::size_t hash_dim = kHashDim;
    std::size_t out_dim = kOutDim;
    std::vector<double> W;

    static ProjectionModel init(std::uint64_t seed = kDefaultSeed,
                                std::size_t hash_dim = kHashDim,
                                std::size_t out_dim = kOutDim);

    bool operator==(const ProjectionModel&) const = default;
};

// Deterministic text embedding: character 3-grams (whole string when
// shorter) hashed into hash_dim counts, projected by the model's W (or the
// fixed seeded sign matrix when absent), then L2-normalized. Empty or
// feature-free text maps to the first basis vector.
EmbeddingVector embed_hashed(std::string_view text,
                             const ProjectionModel* model = nullptr);

// Dot product of unit vectors, clamped to [-1, 1].
double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

struct RankEntry {
    std::string uid;
    double score = 0;

    bool operator==(const RankEntry&) const = default;
};

struct RankResult {
    std::vector<RankEntry> topk; // score descending, document order on ties
    std::size_t k = 0;           // requested cutoff
};

// Scores every candidate by cosine against the query embedding and returns
// the top min(k, n) with ties resolved by earlier input position.
RankResult rank_candidates(const Query& query, const std::vector<CandidateDoc>& docs,
                           std::size_t k, const ProjectionModel* model = nullptr);

// Same scoring over precomputed unit vectors (external embedder path).
RankResult rank_from_embeddings(const EmbeddingVector& query_vec,
                                const std::vector<std::pair<std::string, EmbeddingVector>>& docs,
                                std::size_t k);

// Fraction of (result, gold uid) pairs whose gold appears in the first k
// entries. A gold missing from the corpus is simply a miss.
double recall_at_k(const std::vector<std::pair<RankResult, std::string>>& results,
                   std::size_t k);

struct TrainExample {
    std::string query;
    CandidateDoc candidate;
    int label = 0; // 1 = clicked element, 0 = negative

    bool operator==(const TrainExample&) const = default;
};

// Squared error between the label and the cosine of the embedded pair,
// using the model's projection for both sides.
double pair_loss(const TrainExample& example, const ProjectionModel& model);

struct TrainConfig {
    // Gradients flow through L2-normalized embeddings and scale like
    // 1/norm, so useful step sizes are much larger than for raw features.
    double lr = 25.0;
    int steps = 200;
    int batch = 32;
    int negatives_per_positive = 15;
    std::uint64_t seed = kDefaultSeed;
};

struct TrainResult {
    ProjectionModel model;
    std::vector<double> loss_curve; // mean batch loss per step
};

// Minibatch gradient descent on the pairwise MSE. Examples are grouped by
// query text; per positive, at most negatives_per_positive negatives are
// kept (uniformly sampled with the config seed when there are more). Zero
// steps returns the seeded initialization unchanged. All labels identical
// raises DegenerateDataError.
TrainResult train_projection(const std::vector<TrainExample>& examples,
                             const TrainConfig& config = {});

// Full-batch analytic gradient of the mean pair loss w.r.t. W, same shape
// as model.W (row-major).
std::vector<double> loss_gradient(const std::vector<TrainExample>& examples,
                                  const ProjectionModel& model);

// Binary round trip for ProjectionModel, bit-exact.
void save_model(const ProjectionModel& model, const std::string& path);
ProjectionModel load_model(const std::string& path);

// Precomputed vectors keyed by caller-defined ids. File format: one JSONL
// header {"dim": N} then {"id": ..., "vector": [...]} lines; vectors are
// L2-normalized on load.
struct ExternalVectorStore {
    std::size_t dim = 0;
    std::unordered_map<std::string, EmbeddingVector> by_id;

    const EmbeddingVector* find(const std::string& id) const;
    static ExternalVectorStore load(const std::string& path);
};

} // namespace webnav::dmr

#endif

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "persona/dataset.hpp"
#include "persona/task.hpp"

namespace persona {

enum class RetrieverKind { BM25, Recency, Embedding, Selected };

std::string_view retriever_name(RetrieverKind kind);
RetrieverKind parse_retriever(std::string_view name);

struct ScoredEntry {
  int index = 0;        // position in the profile
  double score = 0.0;   // finite; ties broken by ascending index
  RetrieverKind kind = RetrieverKind::BM25;
};

struct RankedList {
  std::vector<ScoredEntry> entries;
  bool degenerate_query = false;  // query tokenized to nothing
};

// Okapi BM25 with the negative-IDF handling of the rank_bm25 reference
// implementation: idf = ln(N-df+0.5) - ln(df+0.5); terms with negative idf
// are floored to epsilon * mean(idf over all terms).
struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
  double epsilon = 0.25;
};

// Inverted index over one user's profile. Immutable after build.
struct ProfileIndex {
  std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings;
  std::vector<int> entry_lengths;
  double avg_entry_length = 0.0;
  int entry_count = 0;
  std::string tokenizer_config_id;  // "alnum-lower-v1"
  std::string owner;                // user id, for the privacy monitor
  Bm25Params params;
};

ProfileIndex build_index(std::span<const ProfileEntry> profile, TaskId task,
                         std::string owner = {});

RankedList retrieve_bm25(const ProfileIndex& index, std::string_view query, int k);

RankedList retrieve_recency(std::span<const ProfileEntry> profile, int k,
                            std::string_view owner = {});

// Deterministic text embedding boundary. Implementations must return the
// same vector for the same text and be safe for concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual size_t dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Test/reference embedder: each token hashes to a unit basis direction;
// token vectors are summed and L2-normalized. No tokens -> zero vector.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(size_t dimension = 64) : dimension_(dimension) {}
  size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  size_t dimension_;
};

RankedList retrieve_embedding(const EmbeddingProvider& provider,
                              std::span<const ProfileEntry> profile, TaskId task,
                              std::string_view query, int k,
                              std::string_view owner = {});

// Stand-in for a learned per-input retriever selector.
struct SelectionPolicy {
  enum class Mode { Fixed, Oracle, Heuristic };
  Mode mode = Mode::Fixed;
  RetrieverKind fixed_kind = RetrieverKind::BM25;
  size_t heuristic_profile_threshold = 50;
};

// fixed: returns its kind. oracle: argmax of dev_scores over candidates
// (tie -> candidate order). heuristic: Recency when every entry is dated
// and the profile is larger than the threshold, else BM25.
RetrieverKind select_retriever(
    const SelectionPolicy& policy, const UserRecord& input,
    std::span<const RetrieverKind> candidates,
    const std::optional<std::map<RetrieverKind, double>>& dev_scores = std::nullopt);

}  // namespace persona

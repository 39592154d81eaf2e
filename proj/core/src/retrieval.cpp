#include "persona/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "persona/errors.hpp"
#include "persona/privacy.hpp"
#include "persona/rng.hpp"
#include "persona/tokenize.hpp"

namespace persona {

std::string_view retriever_name(RetrieverKind kind) {
  switch (kind) {
    case RetrieverKind::BM25: return "bm25";
    case RetrieverKind::Recency: return "recency";
    case RetrieverKind::Embedding: return "embed";
    case RetrieverKind::Selected: return "select";
  }
  return "?";
}

RetrieverKind parse_retriever(std::string_view name) {
  if (name == "bm25") return RetrieverKind::BM25;
  if (name == "recency") return RetrieverKind::Recency;
  if (name == "embed" || name == "embedding" || name == "contriever") {
    return RetrieverKind::Embedding;
  }
  if (name == "select" || name == "selected" || name == "rspg") {
    return RetrieverKind::Selected;
  }
  throw ConfigError("unknown retriever: " + std::string(name));
}

namespace {

void sort_ranked(std::vector<ScoredEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ScoredEntry& a, const ScoredEntry& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.index < b.index;
                   });
}

void clamp_to_k(std::vector<ScoredEntry>& entries, int k) {
  if (k >= 0 && entries.size() > static_cast<size_t>(k)) {
    entries.resize(static_cast<size_t>(k));
  }
}

}  // namespace

ProfileIndex build_index(std::span<const ProfileEntry> profile, TaskId task,
                         std::string owner) {
  if (profile.empty()) throw DataError("cannot index an empty profile");
  ProfileIndex index;
  index.tokenizer_config_id = "alnum-lower-v1";
  index.owner = std::move(owner);
  index.entry_count = static_cast<int>(profile.size());
  index.entry_lengths.reserve(profile.size());

  size_t total_tokens = 0;
  for (size_t i = 0; i < profile.size(); ++i) {
    auto tokens = alnum_tokens(searchable_text(task, profile[i]));
    total_tokens += tokens.size();
    index.entry_lengths.push_back(static_cast<int>(tokens.size()));
    std::unordered_map<std::string, int> tf;
    for (auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) {
      index.postings[term].emplace_back(static_cast<int>(i), count);
    }
  }
  if (total_tokens == 0) {
    throw DataError("profile tokenizes to zero tokens; empty index");
  }
  index.avg_entry_length =
      static_cast<double>(total_tokens) / static_cast<double>(profile.size());
  // Keep postings in ascending entry order for deterministic iteration.
  for (auto& [term, posting] : index.postings) {
    std::sort(posting.begin(), posting.end());
  }
  return index;
}

RankedList retrieve_bm25(const ProfileIndex& index, std::string_view query, int k) {
  if (k < 1) throw ConfigError("retrieval k must be >= 1");
  privacy::on_access(index.owner);

  RankedList out;
  auto query_terms = alnum_tokens(query);
  const int n = index.entry_count;

  if (query_terms.empty()) {
    out.degenerate_query = true;
    for (int i = 0; i < n && i < k; ++i) {
      out.entries.push_back({i, 0.0, RetrieverKind::BM25});
    }
    return out;
  }

  // rank_bm25 convention: idf computed per distinct corpus term, mean taken
  // over all terms (negatives included), negative idfs floored to
  // epsilon * mean.
  double idf_sum = 0.0;
  std::unordered_map<std::string, double> idf;
  idf.reserve(index.postings.size());
  for (const auto& [term, posting] : index.postings) {
    double df = static_cast<double>(posting.size());
    double value = std::log(n - df + 0.5) - std::log(df + 0.5);
    idf.emplace(term, value);
    idf_sum += value;
  }
  double average_idf = idf_sum / static_cast<double>(idf.size());
  double floor = index.params.epsilon * average_idf;
  for (auto& [term, value] : idf) {
    if (value < 0.0) value = floor;
  }

  std::vector<double> scores(static_cast<size_t>(n), 0.0);
  const double k1 = index.params.k1;
  const double b = index.params.b;
  for (const auto& term : query_terms) {
    auto posting_it = index.postings.find(term);
    if (posting_it == index.postings.end()) continue;
    double term_idf = idf.at(term);
    for (const auto& [doc, tf] : posting_it->second) {
      double dl = static_cast<double>(index.entry_lengths[static_cast<size_t>(doc)]);
      double denom = tf + k1 * (1.0 - b + b * dl / index.avg_entry_length);
      scores[static_cast<size_t>(doc)] += term_idf * (tf * (k1 + 1.0)) / denom;
    }
  }

  out.entries.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.entries.push_back({i, scores[static_cast<size_t>(i)], RetrieverKind::BM25});
  }
  sort_ranked(out.entries);
  clamp_to_k(out.entries, k);
  return out;
}

RankedList retrieve_recency(std::span<const ProfileEntry> profile, int k,
                            std::string_view owner) {
  if (k < 1) throw ConfigError("retrieval k must be >= 1");
  if (!owner.empty()) privacy::on_access(owner);

  // Dated entries first, newest first. Undated entries follow in descending
  // profile order (later entries assumed newer). Scores encode the order so
  // the ranked list sorts like every other retriever.
  std::vector<ScoredEntry> dated;
  std::vector<ScoredEntry> undated;
  for (size_t i = 0; i < profile.size(); ++i) {
    if (profile[i].date) {
      dated.push_back({static_cast<int>(i),
                       static_cast<double>(profile[i].date->epoch_seconds),
                       RetrieverKind::Recency});
    } else {
      undated.push_back({static_cast<int>(i), 0.0, RetrieverKind::Recency});
    }
  }
  std::stable_sort(dated.begin(), dated.end(),
                   [](const ScoredEntry& a, const ScoredEntry& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.index < b.index;
                   });
  std::reverse(undated.begin(), undated.end());

  RankedList out;
  out.entries = std::move(dated);
  out.entries.insert(out.entries.end(), undated.begin(), undated.end());
  // Re-score by rank position: deterministic and comparable across mixes of
  // dated and undated entries.
  for (size_t rank = 0; rank < out.entries.size(); ++rank) {
    out.entries[rank].score = -static_cast<double>(rank);
  }
  clamp_to_k(out.entries, k);
  return out;
}

std::vector<double> HashEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  auto tokens = alnum_tokens(text);
  for (const auto& t : tokens) {
    v[fnv1a64(t) % dimension_] += 1.0;
  }
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq > 0.0) {
    double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
  }
  return v;
}

namespace {

double cosine_or_sentinel(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return -1.0;  // zero-norm vectors rank last
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

RankedList retrieve_embedding(const EmbeddingProvider& provider,
                              std::span<const ProfileEntry> profile, TaskId task,
                              std::string_view query, int k, std::string_view owner) {
  if (k < 1) throw ConfigError("retrieval k must be >= 1");
  if (provider.dimension() < 1) throw ConfigError("embedding dimension must be >= 1");
  if (!owner.empty()) privacy::on_access(owner);

  std::vector<double> query_vec;
  try {
    query_vec = provider.embed(query);
  } catch (const std::exception& e) {
    throw BackendError(std::string("embedding provider failed on query: ") + e.what());
  }

  RankedList out;
  out.entries.reserve(profile.size());
  for (size_t i = 0; i < profile.size(); ++i) {
    std::vector<double> entry_vec;
    try {
      entry_vec = provider.embed(searchable_text(task, profile[i]));
    } catch (const std::exception& e) {
      throw BackendError("embedding provider failed on entry " +
                         profile[i].entry_id + ": " + e.what());
    }
    double score = cosine_or_sentinel(query_vec, entry_vec);
    out.entries.push_back({static_cast<int>(i), score, RetrieverKind::Embedding});
  }
  sort_ranked(out.entries);
  clamp_to_k(out.entries, k);
  return out;
}

RetrieverKind select_retriever(
    const SelectionPolicy& policy, const UserRecord& input,
    std::span<const RetrieverKind> candidates,
    const std::optional<std::map<RetrieverKind, double>>& dev_scores) {
  if (candidates.empty()) throw ConfigError("retriever candidate list is empty");
  switch (policy.mode) {
    case SelectionPolicy::Mode::Fixed:
      return policy.fixed_kind;
    case SelectionPolicy::Mode::Oracle: {
      if (!dev_scores) {
        throw ConfigError("oracle selection policy requires per-retriever dev scores");
      }
      RetrieverKind best = candidates[0];
      double best_score = -std::numeric_limits<double>::infinity();
      for (RetrieverKind kind : candidates) {
        auto it = dev_scores->find(kind);
        if (it == dev_scores->end()) continue;
        if (it->second > best_score) {
          best_score = it->second;
          best = kind;
        }
      }
      return best;
    }
    case SelectionPolicy::Mode::Heuristic: {
      bool all_dated = !input.profile.empty();
      for (const auto& entry : input.profile) {
        if (!entry.date) {
          all_dated = false;
          break;
        }
      }
      if (all_dated && input.profile.size() > policy.heuristic_profile_threshold) {
        return RetrieverKind::Recency;
      }
      return RetrieverKind::BM25;
    }
  }
  throw ConfigError("unknown selection policy mode");
}

}  // namespace persona

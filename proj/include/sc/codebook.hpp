#pragma once

// Discrete codes and head scoring.
//
// Each (example, head) SAE activation vector is reduced to the index of its
// largest feature. Heads are then scored by
//   node:      |codes seen only on positives|  (optionally / |all codes seen|)
//   edge:      membership count among the top-k head pairs ranked by
//              positive-only code co-occurrences
//   entropy:   membership count among the top-k head pairs ranked by the
//              entropy of their positive co-occurrence distribution
//   norm_diff: || mean(positive) - mean(negative) || of the raw activations

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc/activation_store.hpp"
#include "sc/matrix.hpp"

namespace sc {

class CodeMatrix {
 public:
  CodeMatrix(std::size_t n_heads, std::size_t n_codes, std::vector<std::uint32_t> codes,
             std::vector<Label> labels, std::optional<std::uint32_t> sentinel = std::nullopt);

  std::size_t n_examples() const { return labels_.size(); }
  std::size_t n_heads() const { return n_heads_; }
  // Number of distinct code values, including the sentinel when present.
  std::size_t n_codes() const { return n_codes_; }
  std::uint32_t code(std::size_t e, std::size_t h) const { return codes_[e * n_heads_ + h]; }
  Label label(std::size_t e) const { return labels_[e]; }
  std::span<const Label> labels() const { return labels_; }
  std::span<const std::uint32_t> codes() const { return codes_; }
  // Reserved "no active feature" code, excluded from every set and pair.
  std::optional<std::uint32_t> sentinel() const { return sentinel_; }
  bool counts(std::uint32_t c) const { return !sentinel_ || c != *sentinel_; }

 private:
  std::size_t n_heads_;
  std::size_t n_codes_;
  std::vector<std::uint32_t> codes_;
  std::vector<Label> labels_;
  std::optional<std::uint32_t> sentinel_;
};

struct DiscretizeOptions {
  // Map all-zero activation rows to code d_bottleneck instead of 0.
  bool dead_code_sentinel = false;
};

// z rows are (example, head) pairs in [example][head] order; argmax with the
// lowest index winning ties.
CodeMatrix discretize(const Matrix& z, std::size_t n_heads, std::span<const Label> labels,
                      DiscretizeOptions options = {});

std::vector<double> node_scores(const CodeMatrix& cm, bool normalize);

enum class ScoreMethod { node, edge, entropy, norm_diff };
enum class SoftmaxMode { across_heads, per_layer };

std::string to_string(ScoreMethod m);
std::string to_string(SoftmaxMode m);
ScoreMethod parse_method(const std::string& s);
SoftmaxMode parse_softmax_mode(const std::string& s);

struct HeadScores {
  std::vector<double> raw;
  std::vector<double> normalized;
  ScoreMethod method = ScoreMethod::node;
  SoftmaxMode mode = SoftmaxMode::across_heads;
};

HeadScores softmax_scores(std::span<const double> raw, SoftmaxMode mode,
                          std::span<const HeadIndex> head_map,
                          ScoreMethod method = ScoreMethod::node);

nlohmann::json to_json(const HeadScores& s);
HeadScores head_scores_from_json(const nlohmann::json& j);

struct CoocKey {
  std::uint32_t h1, h2, c1, c2;
  auto operator<=>(const CoocKey&) const = default;
};

struct CoocCounts {
  std::size_t n_heads = 0;
  std::map<CoocKey, std::uint64_t> counts;

  std::uint64_t at(const CoocKey& k) const {
    auto it = counts.find(k);
    return it == counts.end() ? 0 : it->second;
  }
  std::uint64_t total() const;
};

CoocCounts build_cooccurrence(const CodeMatrix& cm, Label label);
void merge_into(CoocCounts& into, const CoocCounts& from);

nlohmann::json to_json(const CoocCounts& c);

std::size_t pair_count(std::size_t n_heads);
// Half the number of head pairs, at least 1.
std::size_t default_k(std::size_t n_heads);

struct EdgeScores {
  std::vector<double> u;                           // per-head membership count
  Matrix pair_score;                               // U(h1, h2), h1 < h2 filled
  std::vector<std::pair<std::size_t, std::size_t>> top_pairs;
  std::size_t k_used = 0;
  bool clamped = false;                            // requested k exceeded pairs
};

// U(h1, h2) = sum of positive counts over code pairs never seen on negatives
// (or the number of such code pairs with unique_pair_count).
EdgeScores edge_scores(const CoocCounts& cplus, const CoocCounts& cminus, std::size_t k,
                       std::size_t n_heads, bool unique_pair_count = false);

// H(h1, h2) = -sum p log2 p over the pair's co-occurrence distribution;
// symmetric, zero on the diagonal and for pairs with no counts.
Matrix entropy_edge_scores(const CoocCounts& cplus, std::size_t n_heads);

// Top-k membership counting over pairs ranked by descending H.
EdgeScores entropy_head_scores(const Matrix& entropy, std::size_t k);

std::vector<double> norm_diff_baseline(const ActivationSet& set);

}  // namespace sc

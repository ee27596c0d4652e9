#pragma once

// End-to-end flows shared by the CLI and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc/activation_store.hpp"
#include "sc/circuit_eval.hpp"
#include "sc/codebook.hpp"
#include "sc/sae.hpp"
#include "sc/toy_model.hpp"

namespace sc {

// Which examples feed the code counts after training.
enum class ScoreOn { all, train, eval };
ScoreOn parse_score_on(const std::string& s);
std::string to_string(ScoreOn s);

struct DiscoverOptions {
  ScoreMethod method = ScoreMethod::node;
  bool normalize = false;
  SoftmaxMode softmax = SoftmaxMode::across_heads;
  std::size_t k = 0;  // 0 selects default_k
  bool unique_pair_count = false;
  bool dead_code_sentinel = false;
  ScoreOn score_on = ScoreOn::all;
  SplitSpec split;
  SaeConfig sae;  // d_model is taken from the data
};

struct DiscoverResult {
  HeadScores scores;
  std::vector<std::size_t> train_indices;
  std::optional<SaeModel> model;
  std::optional<TrainReport> report;
  std::size_t k_used = 0;
  bool k_clamped = false;
};

// split -> train SAE (or use `pretrained`) -> discretize -> score -> softmax.
// norm_diff skips the SAE entirely.
DiscoverResult discover(const ActivationSet& set, const DiscoverOptions& options,
                        const SaeModel* pretrained = nullptr);

struct FaithfulnessOptions {
  ToyMetric metric = ToyMetric::kl;
  std::size_t n_random = 10;
  CorruptionSpec corruption;       // sequence i uses derive_seed(corruption.seed, i)
  std::uint64_t complement_seed = 0;
};

struct FaithfulnessRow {
  double theta = 0.0;
  std::size_t n_heads = 0;
  double metric = 0.0;
  double faithfulness = 0.0;
  double random_metric = 0.0;
  double random_faithfulness = 0.0;
};

struct FaithfulnessReport {
  double m_full = 0.0;
  double m_empty = 0.0;
  std::vector<FaithfulnessRow> rows;  // ascending theta
};

// Mean toy metric of the circuit `mask` over `sequences`.
double circuit_metric(const ToyTransformer& model,
                      const std::vector<std::vector<int>>& sequences,
                      const CircuitMask& mask, const FaithfulnessOptions& options);

FaithfulnessReport faithfulness_sweep(const ToyTransformer& model, const HeadScores& scores,
                                      const std::vector<std::vector<int>>& sequences,
                                      const FaithfulnessOptions& options);

nlohmann::json to_json(const FaithfulnessReport& r);
// Columns: theta,n_heads,metric,faithfulness,random_metric,random_faithfulness
std::string to_csv(const FaithfulnessReport& r);

}  // namespace sc

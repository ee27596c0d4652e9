#pragma once

// Attention-only toy transformers with a known set of active heads.
//
// Residual stream: x_0 = embed(tokens) [+ sinusoidal positions];
// every head of layer l reads x_l, and x_{l+1} = x_l + sum of the layer's head
// contributions, where a contribution is
//   softmax(causal((X W_Q)(X W_K)^T / sqrt(d_head))) (X W_V) W_O_head.
// Logits = x_L * unembed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc/activation_store.hpp"
#include "sc/circuit_eval.hpp"
#include "sc/matrix.hpp"

namespace sc {

struct ToyConfig {
  std::size_t vocab = 8;
  std::size_t d_model = 32;
  std::size_t d_head = 8;
  std::size_t n_layers = 2;
  std::size_t heads_per_layer = 8;
  std::size_t max_seq = 6;
  bool positional = false;
  std::uint64_t seed = 0;

  std::size_t n_heads() const { return n_layers * heads_per_layer; }
  bool operator==(const ToyConfig&) const = default;
};

nlohmann::json to_json(const ToyConfig& c);
ToyConfig toy_config_from_json(const nlohmann::json& j);

struct HeadWeights {
  Matrix W_Q;  // [d_model x d_head]
  Matrix W_K;
  Matrix W_V;
  Matrix W_O;  // [d_head x d_model]

  bool active() const {
    return !(W_Q.all_zero() && W_K.all_zero() && W_V.all_zero() && W_O.all_zero());
  }
  bool operator==(const HeadWeights&) const = default;
};

struct ToyTransformer {
  ToyConfig config;
  Matrix embed;    // [vocab x d_model]
  std::vector<HeadWeights> heads;  // layer-major
  Matrix unembed;  // [d_model x vocab]

  const HeadWeights& head(std::size_t layer, std::size_t h) const {
    return heads[layer * config.heads_per_layer + h];
  }
  std::vector<HeadIndex> head_map() const;
  bool operator==(const ToyTransformer&) const = default;
};

struct CorruptionSpec {
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

struct RunCache {
  std::vector<int> tokens;
  std::vector<Matrix> contributions;  // per head, [positions x d_model]
  Matrix logits;                      // [positions x vocab]
  Matrix aggregated;                  // [heads x d_model], position mean
};

// Causal single-head attention. X is [positions x d_model].
Matrix attention_head_forward(const Matrix& X, const Matrix& W_Q, const Matrix& W_K,
                              const Matrix& W_V, double d_k);

// softmax(causal(q k^T / sqrt(d_k))) v on precomputed projections.
Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, double d_k);

Matrix sinusoidal_positions(std::size_t positions, std::size_t d_model);

RunCache model_forward_with_cache(const ToyTransformer& model, std::span<const int> tokens);

// Per head and component: an all-zero weight matrix gets N(0, sigma^2) noise
// added to its projection; a nonzero one has its projection zeroed.
RunCache corrupt_forward(const ToyTransformer& model, std::span<const int> tokens,
                         const CorruptionSpec& spec);

// Heads in the mask are recomputed on the patched residual stream; heads
// outside it write their corrupted cached contribution.
Matrix ablate_and_run(const ToyTransformer& model, std::span<const int> tokens,
                      const CircuitMask& mask, const RunCache& clean,
                      const RunCache& corrupt);

// A head is in the circuit when its largest |contribution| over a probe batch
// of clean runs exceeds 1e-9.
inline constexpr double kGroundTruthTolerance = 1e-9;
GroundTruthCircuit ground_truth_mask(const ToyTransformer& model);
GroundTruthCircuit ground_truth_mask(const ToyTransformer& model,
                                     std::span<const std::vector<int>> probes);

// active has n_layers * heads_per_layer entries, layer-major. Weights are
// seeded Gaussians rounded to float32; active head matrices are scaled by
// 1/sqrt(d_model), inactive heads are all-zero.
ToyTransformer build_synthetic_model(const ToyConfig& config, const std::vector<bool>& active);

struct ToyTask {
  std::string name;
  ToyConfig config;
  std::vector<bool> active;
};

// The four fixed synthetic stand-ins: reverse, fracprev, sort, sortfreq.
std::vector<ToyTask> default_toy_tasks(std::uint64_t seed);

// Uniform random token sequences (sampling with replacement).
std::vector<std::vector<int>> random_sequences(std::size_t count, std::size_t length,
                                               std::size_t vocab, std::uint64_t seed);

struct TokenDataset {
  DatasetManifest manifest;
  std::vector<std::vector<int>> sequences;
  std::vector<Label> labels;
};

// Positives [p || p]; negatives [p || q] with q_i != p_i.
TokenDataset gen_repeated_token_data(std::uint64_t seed, std::size_t n_pos, std::size_t n_neg,
                                     std::size_t pattern_len, std::size_t vocab);

// Clean runs of every sequence labelled positive, followed by corrupted runs
// of the same sequences labelled negative. Example i's corruption seed is
// derive_seed(spec.seed, i).
ActivationSet activations_from_toy(const ToyTransformer& model,
                                   std::span<const std::vector<int>> sequences,
                                   const CorruptionSpec& spec, const std::string& task = "");
// Clean runs only, with caller-supplied labels.
ActivationSet activations_from_toy(const ToyTransformer& model,
                                   std::span<const std::vector<int>> sequences,
                                   std::span<const Label> labels, const std::string& task = "");

enum class ToyMetric { kl, logit_diff };
ToyMetric parse_toy_metric(const std::string& s);

// Metric of a patched run against the clean run of the same tokens.
//   kl:         mean over positions of KL(softmax(clean) || softmax(patched))
//   logit_diff: patched[a] - patched[b] at the last position, where a and b
//               are the clean run's top two tokens
double toy_metric(ToyMetric metric, const Matrix& clean_logits, const Matrix& patched_logits);

// TOYM: "TOYM" | u32 LE length | JSON config | float32 LE payload:
//   embed, then per head (layer-major) W_Q, W_K, W_V, W_O, then unembed.
std::string encode_toy_file(const ToyTransformer& model);
ToyTransformer decode_toy_file(std::string_view bytes);
void write_toy_file(const ToyTransformer& model, const std::filesystem::path& path);
ToyTransformer read_toy_file(const std::filesystem::path& path);

}  // namespace sc

#pragma once

// Sparse autoencoder over per-head activation vectors.
//
//   z    = ReLU(W_E (h - b) + b_E)
//   hhat = W_D z + b                       (b is the tied pre/post bias)
//   L    = sum ||h - hhat||^2 + lambda * sum |z| + alpha * L_cont
//
// Columns of W_D are the dictionary vectors and stay unit-norm: the W_D
// gradient is projected orthogonal to each column before the Adam step and
// the columns are renormalized after it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc/activation_store.hpp"
#include "sc/matrix.hpp"

namespace sc {

struct SaeConfig {
  std::size_t d_model = 0;
  std::size_t d_bottleneck = 200;
  double lambda = 0.02;
  double lr = 1e-3;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double alpha = 0.0;           // contrastive weight; 0 disables
  double epsilon_margin = 0.0;  // contrastive hinge margin
  // Eval loss is tracked on at most this many eval examples per epoch
  // (evenly strided through the eval split). 0 means all.
  std::size_t eval_max_examples = 40;

  void validate() const;
  bool operator==(const SaeConfig&) const = default;
};

nlohmann::json to_json(const SaeConfig& c);
SaeConfig sae_config_from_json(const nlohmann::json& j, SaeConfig base = {});

struct SaeModel {
  Matrix W_E;              // [d_bottleneck x d_model]
  Matrix W_D;              // [d_model x d_bottleneck]
  std::vector<double> b;   // [d_model]
  std::vector<double> b_E; // [d_bottleneck]

  std::size_t d_model() const { return W_D.rows(); }
  std::size_t d_bottleneck() const { return W_D.cols(); }
  bool operator==(const SaeModel&) const = default;
};

SaeModel init_sae(const SaeConfig& config);

std::vector<double> encode(const SaeModel& model, std::span<const double> h);
std::vector<double> decode(const SaeModel& model, std::span<const double> z);

// Rows of x, x_hat and z are paired samples.
double sae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& z, double lambda);

// Feature vectors laid out [example][slot][dim]; slots are head positions.
struct SlotBatch {
  std::size_t n_examples = 0;
  std::size_t n_slots = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> at(std::size_t e, std::size_t s) const {
    return {values.data() + (e * n_slots + s) * dim, dim};
  }
};

// Mean cosine similarity over all (a, b) pairs at matched slots, averaged
// over slots. Throws "degenerate vector" on a zero-norm vector.
double slot_cosine_similarity(const SlotBatch& A, const SlotBatch& B);

// CS(P, N) + max(0, margin - CS(P, P)/2 - CS(N, N)/2)
double contrastive_loss(const SlotBatch& P, const SlotBatch& N, double epsilon_margin);

Matrix project_decoder_gradient(const SaeModel& model, const Matrix& grad_W_D);
void renormalize_decoder(SaeModel& model);
SaeModel renormalized(SaeModel model);

// Training rows: every (example, head) vector of a set, in [example][head]
// order, with the example labels kept for the contrastive term.
struct TrainingBatch {
  Matrix x;
  std::size_t n_heads = 0;
  std::vector<Label> example_labels;
};

TrainingBatch make_batch(const ActivationSet& set);

struct SaeGradients {
  double loss = 0.0;
  Matrix W_E;
  Matrix W_D;
  std::vector<double> b;
  std::vector<double> b_E;
};

// Full objective and its analytic gradient (W_D gradient not projected).
// With alpha > 0, zero code vectors are left out of the cosine averages
// instead of raising.
SaeGradients sae_gradients(const SaeModel& model, const TrainingBatch& batch,
                           const SaeConfig& config);
double sae_objective(const SaeModel& model, const TrainingBatch& batch,
                     const SaeConfig& config);

struct TrainReport {
  double initial_train_loss = 0.0;
  std::vector<double> train_loss;  // objective after each epoch's step
  std::vector<double> eval_loss;   // recon + sparsity on the eval sample; empty without eval data
  std::size_t best_eval_epoch = 0;
  std::string snapshot_id;         // FNV-1a of the float32 parameter image
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const TrainReport& r);  // wall time left out

struct TrainResult {
  SaeModel model;
  TrainReport report;
};

// Called after every optimizer step with the 1-based step index.
using StepObserver = std::function<void(std::size_t step, const SaeModel&)>;

TrainResult train_sae(const SaeConfig& config, const ActivationSet& train,
                      const ActivationSet& eval, const StepObserver& observer = {});

// Codes for every (example, head) row: [n_examples * n_heads x d_bottleneck].
Matrix encode_set(const SaeModel& model, const ActivationSet& set);

std::string snapshot_id(const SaeModel& model);

// SAE1: "SAE1" | u32 LE length | JSON {d_model, d_bottleneck, config} |
//       W_E, W_D, b, b_E as float32 LE, row-major.
std::string encode_sae_file(const SaeModel& model, const SaeConfig& config);
SaeModel decode_sae_file(std::string_view bytes, SaeConfig* config_out = nullptr);
void write_sae_file(const SaeModel& model, const SaeConfig& config,
                    const std::filesystem::path& path);
SaeModel read_sae_file(const std::filesystem::path& path, SaeConfig* config_out = nullptr);

}  // namespace sc

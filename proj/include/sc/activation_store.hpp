#pragma once

// Activation container (ACTS1), dataset manifests, and train/eval splitting.
//
// ACTS1 layout:
//   "ACTS" 0x01 | u32 LE header length L | L bytes JSON header | payload
// header keys: n_examples, n_heads, d_model, labels (0/1 array),
//              head_map ([layer, head] array), meta (object)
// payload: n_examples * n_heads * d_model float32 LE, row-major
//          [example][head][dim].

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace sc {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

struct HeadIndex {
  int layer = 0;
  int head = 0;
  auto operator<=>(const HeadIndex&) const = default;
};

struct ActivationMeta {
  std::string source_model;
  std::string task;
  std::string aggregation = "mean";
  bool operator==(const ActivationMeta&) const = default;
};

// Position-aggregated per-head activations with example labels. Immutable
// once constructed; the constructor enforces every invariant.
class ActivationSet {
 public:
  ActivationSet(std::size_t n_examples, std::size_t n_heads, std::size_t d_model,
                std::vector<float> data, std::vector<Label> labels,
                std::vector<HeadIndex> head_map, ActivationMeta meta = {});

  std::size_t n_examples() const { return n_examples_; }
  std::size_t n_heads() const { return n_heads_; }
  std::size_t d_model() const { return d_model_; }
  std::span<const float> data() const { return data_; }
  std::span<const Label> labels() const { return labels_; }
  std::span<const HeadIndex> head_map() const { return head_map_; }
  const ActivationMeta& meta() const { return meta_; }

  Label label(std::size_t e) const { return labels_[e]; }
  std::span<const float> vector(std::size_t example, std::size_t head) const {
    return {data_.data() + (example * n_heads_ + head) * d_model_, d_model_};
  }
  std::size_t count(Label l) const;

  // Examples at `indices`, in that order. Subsets may be empty or hold a
  // single label; they skip the both-labels invariant.
  ActivationSet subset(std::span<const std::size_t> indices) const;

  bool operator==(const ActivationSet&) const = default;

 private:
  struct Unchecked {};
  ActivationSet(Unchecked, std::size_t n_examples, std::size_t n_heads,
                std::size_t d_model, std::vector<float> data, std::vector<Label> labels,
                std::vector<HeadIndex> head_map, ActivationMeta meta);

  std::size_t n_examples_;
  std::size_t n_heads_;
  std::size_t d_model_;
  std::vector<float> data_;
  std::vector<Label> labels_;
  std::vector<HeadIndex> head_map_;
  ActivationMeta meta_;
};

// Canonical head_map for a model with the same number of heads per layer.
std::vector<HeadIndex> square_head_map(int n_layers, int heads_per_layer);

std::string encode_activation_file(const ActivationSet& set);
ActivationSet decode_activation_file(std::string_view bytes);
void write_activation_file(const ActivationSet& set, const std::filesystem::path& path);
ActivationSet read_activation_file(const std::filesystem::path& path);

struct PromptRecord {
  std::string text;
  Label label = Label::positive;
  std::vector<std::string> answers;
  std::string template_id;
  std::vector<int> tokens;  // optional; toy datasets fill it
  bool operator==(const PromptRecord&) const = default;
};

struct DatasetManifest {
  std::string task;
  std::vector<PromptRecord> prompts;
  std::string tokenizer;
  std::size_t sequence_length = 0;
  bool operator==(const DatasetManifest&) const = default;
};

void validate(const DatasetManifest& m);
nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct SplitSpec {
  std::size_t train_count = 10;
  std::uint64_t seed = 0;
  bool balance = true;
};

struct Split {
  ActivationSet train;
  ActivationSet eval;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> eval_indices;   // ascending
};

Split split_train_eval(const ActivationSet& set, const SplitSpec& spec);

}  // namespace sc

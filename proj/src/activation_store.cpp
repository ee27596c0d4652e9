#include "sc/activation_store.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sc/binary_io.hpp"
#include "sc/error.hpp"
#include "sc/rng.hpp"

namespace sc {

namespace {

constexpr std::string_view kActsMagic = "ACTS";
constexpr std::uint8_t kActsVersion = 0x01;

void check_shape(std::size_t n_examples, std::size_t n_heads, std::size_t d_model,
                 const std::vector<float>& data, const std::vector<Label>& labels,
                 const std::vector<HeadIndex>& head_map) {
  require(data.size() == n_examples * n_heads * d_model,
          "payload length mismatch: expected " +
              std::to_string(n_examples * n_heads * d_model) + " values, got " +
              std::to_string(data.size()));
  require(labels.size() == n_examples, "label count does not match n_examples");
  require(head_map.size() == n_heads,
          "head_map has " + std::to_string(head_map.size()) + " entries but n_heads is " +
              std::to_string(n_heads));
  std::set<HeadIndex> seen;
  for (const auto& h : head_map)
    require(seen.insert(h).second, "duplicate head_map entry (" + std::to_string(h.layer) +
                                       ", " + std::to_string(h.head) + ")");
  for (float v : data) require(std::isfinite(v), "non-finite activation value");
}

}  // namespace

ActivationSet::ActivationSet(std::size_t n_examples, std::size_t n_heads,
                             std::size_t d_model, std::vector<float> data,
                             std::vector<Label> labels, std::vector<HeadIndex> head_map,
                             ActivationMeta meta)
    : n_examples_(n_examples),
      n_heads_(n_heads),
      d_model_(d_model),
      data_(std::move(data)),
      labels_(std::move(labels)),
      head_map_(std::move(head_map)),
      meta_(std::move(meta)) {
  require(n_heads_ >= 1 && d_model_ >= 1, "n_heads and d_model must be >= 1");
  check_shape(n_examples_, n_heads_, d_model_, data_, labels_, head_map_);
  require(count(Label::positive) >= 1 && count(Label::negative) >= 1,
          "activation set needs at least one positive and one negative example");
}

ActivationSet::ActivationSet(Unchecked, std::size_t n_examples, std::size_t n_heads,
                             std::size_t d_model, std::vector<float> data,
                             std::vector<Label> labels, std::vector<HeadIndex> head_map,
                             ActivationMeta meta)
    : n_examples_(n_examples),
      n_heads_(n_heads),
      d_model_(d_model),
      data_(std::move(data)),
      labels_(std::move(labels)),
      head_map_(std::move(head_map)),
      meta_(std::move(meta)) {}

std::size_t ActivationSet::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

ActivationSet ActivationSet::subset(std::span<const std::size_t> indices) const {
  const std::size_t stride = n_heads_ * d_model_;
  std::vector<float> data;
  data.reserve(indices.size() * stride);
  std::vector<Label> labels;
  labels.reserve(indices.size());
  for (std::size_t e : indices) {
    require(e < n_examples_, "subset index out of range");
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(e * stride);
    data.insert(data.end(), first, first + static_cast<std::ptrdiff_t>(stride));
    labels.push_back(labels_[e]);
  }
  return ActivationSet(Unchecked{}, indices.size(), n_heads_, d_model_, std::move(data),
                       std::move(labels), head_map_, meta_);
}

std::vector<HeadIndex> square_head_map(int n_layers, int heads_per_layer) {
  std::vector<HeadIndex> map;
  map.reserve(static_cast<std::size_t>(n_layers * heads_per_layer));
  for (int l = 0; l < n_layers; ++l)
    for (int h = 0; h < heads_per_layer; ++h) map.push_back({l, h});
  return map;
}

std::string encode_activation_file(const ActivationSet& set) {
  for (float v : set.data()) require(std::isfinite(v), "non-finite activation value");
  nlohmann::json header;
  header["n_examples"] = set.n_examples();
  header["n_heads"] = set.n_heads();
  header["d_model"] = set.d_model();
  auto& labels = header["labels"] = nlohmann::json::array();
  for (Label l : set.labels()) labels.push_back(static_cast<int>(l));
  auto& map = header["head_map"] = nlohmann::json::array();
  for (const auto& h : set.head_map()) map.push_back({h.layer, h.head});
  header["meta"] = {{"source_model", set.meta().source_model},
                    {"task", set.meta().task},
                    {"aggregation", set.meta().aggregation}};

  std::string out(kActsMagic);
  out.push_back(static_cast<char>(kActsVersion));
  const std::string text = header.dump();
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  io::put_f32s(out, set.data());
  return out;
}

ActivationSet decode_activation_file(std::string_view bytes) {
  io::ByteCursor cur(bytes);
  require(cur.remaining() >= 5 && cur.take(4) == kActsMagic, "bad magic: not an ACTS file");
  const auto version = cur.u8();
  require(version == kActsVersion, "unsupported ACTS version " + std::to_string(version));
  const std::uint32_t len = cur.u32();
  require(len <= cur.remaining(), "header length exceeds file size");
  const auto header = nlohmann::json::parse(cur.take(len), nullptr, false);
  require(header.is_object(), "malformed JSON header");

  try {
    const auto n_examples = header.at("n_examples").get<std::size_t>();
    const auto n_heads = header.at("n_heads").get<std::size_t>();
    const auto d_model = header.at("d_model").get<std::size_t>();
    std::vector<Label> labels;
    for (const auto& l : header.at("labels")) {
      const int v = l.get<int>();
      require(v == 0 || v == 1, "labels must be 0 or 1");
      labels.push_back(static_cast<Label>(v));
    }
    std::vector<HeadIndex> head_map;
    for (const auto& h : header.at("head_map")) {
      require(h.is_array() && h.size() == 2, "head_map entries must be [layer, head]");
      head_map.push_back({h[0].get<int>(), h[1].get<int>()});
    }
    ActivationMeta meta;
    if (auto it = header.find("meta"); it != header.end() && it->is_object()) {
      meta.source_model = it->value("source_model", "");
      meta.task = it->value("task", "");
      meta.aggregation = it->value("aggregation", "mean");
    }

    const std::size_t count = n_examples * n_heads * d_model;
    require(cur.remaining() == 4 * count,
            "payload length mismatch: header implies " + std::to_string(4 * count) +
                " bytes, file has " + std::to_string(cur.remaining()));
    std::vector<float> data(count);
    cur.f32s(data);
    return ActivationSet(n_examples, n_heads, d_model, std::move(data), std::move(labels),
                         std::move(head_map), std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed ACTS header: ") + e.what());
  }
}

void write_activation_file(const ActivationSet& set, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_activation_file(set));
}

ActivationSet read_activation_file(const std::filesystem::path& path) {
  return decode_activation_file(io::read_file(path));
}

void validate(const DatasetManifest& m) {
  for (const auto& p : m.prompts) {
    if (p.label == Label::positive)
      require(!p.answers.empty(), "positive prompt without expected answer: " + p.text);
    if (!p.tokens.empty())
      require(p.tokens.size() == m.sequence_length,
              "prompt token count differs from sequence_length");
  }
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : m.prompts) {
    nlohmann::json r = {{"text", p.text},
                        {"label", p.label == Label::positive ? "positive" : "negative"},
                        {"answers", p.answers},
                        {"template_id", p.template_id}};
    if (!p.tokens.empty()) r["tokens"] = p.tokens;
    prompts.push_back(std::move(r));
  }
  return {{"task", m.task},
          {"tokenizer", m.tokenizer},
          {"sequence_length", m.sequence_length},
          {"prompts", std::move(prompts)}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.task = j.at("task").get<std::string>();
    m.tokenizer = j.value("tokenizer", "");
    m.sequence_length = j.at("sequence_length").get<std::size_t>();
    for (const auto& r : j.at("prompts")) {
      PromptRecord p;
      p.text = r.at("text").get<std::string>();
      const auto label = r.at("label").get<std::string>();
      require(label == "positive" || label == "negative", "unknown label " + label);
      p.label = label == "positive" ? Label::positive : Label::negative;
      p.answers = r.value("answers", std::vector<std::string>{});
      p.template_id = r.value("template_id", "");
      p.tokens = r.value("tokens", std::vector<int>{});
      m.prompts.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed manifest: ") + e.what());
  }
  validate(m);
  return m;
}

Split split_train_eval(const ActivationSet& set, const SplitSpec& spec) {
  const std::size_t n = set.n_examples();
  require(spec.train_count <= n, "train_count exceeds number of examples");
  Rng rng(spec.seed);

  std::vector<std::size_t> train;
  if (spec.balance) {
    require(spec.train_count % 2 == 0, "balanced split needs an even train_count");
    const std::size_t half = spec.train_count / 2;
    std::vector<std::size_t> pos, neg;
    for (std::size_t e = 0; e < n; ++e)
      (set.label(e) == Label::positive ? pos : neg).push_back(e);
    require(pos.size() >= half && neg.size() >= half,
            "insufficient examples of a label for a balanced split");
    rng.shuffle(pos);
    rng.shuffle(neg);
    train.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(half));
    train.insert(train.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(half));
  } else {
    std::vector<std::size_t> all(n);
    for (std::size_t e = 0; e < n; ++e) all[e] = e;
    rng.shuffle(all);
    train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(spec.train_count));
  }
  std::sort(train.begin(), train.end());

  std::vector<std::size_t> eval;
  eval.reserve(n - train.size());
  std::size_t t = 0;
  for (std::size_t e = 0; e < n; ++e) {
    if (t < train.size() && train[t] == e)
      ++t;
    else
      eval.push_back(e);
  }
  auto train_set = set.subset(train);
  auto eval_set = set.subset(eval);
  return {std::move(train_set), std::move(eval_set), std::move(train), std::move(eval)};
}

}  // namespace sc

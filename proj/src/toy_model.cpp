#include "sc/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sc/binary_io.hpp"
#include "sc/error.hpp"
#include "sc/rng.hpp"

namespace sc {

nlohmann::json to_json(const ToyConfig& c) {
  return {{"vocab", c.vocab},         {"d_model", c.d_model},
          {"d_head", c.d_head},       {"n_layers", c.n_layers},
          {"heads_per_layer", c.heads_per_layer},
          {"max_seq", c.max_seq},     {"positional", c.positional},
          {"seed", c.seed}};
}

ToyConfig toy_config_from_json(const nlohmann::json& j) {
  ToyConfig c;
  try {
    c.vocab = j.at("vocab").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.d_head = j.at("d_head").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.heads_per_layer = j.at("heads_per_layer").get<std::size_t>();
    c.max_seq = j.at("max_seq").get<std::size_t>();
    c.positional = j.value("positional", false);
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed toy model config: ") + e.what());
  }
  require(c.vocab >= 1 && c.d_model >= 1 && c.d_head >= 1 && c.n_layers >= 1 &&
              c.heads_per_layer >= 1 && c.max_seq >= 1,
          "toy model dimensions must be >= 1");
  return c;
}

std::vector<HeadIndex> ToyTransformer::head_map() const {
  return square_head_map(static_cast<int>(config.n_layers),
                         static_cast<int>(config.heads_per_layer));
}

namespace {

Matrix matmul(const Matrix& A, const Matrix& B) {
  Matrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double a = A(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < B.cols(); ++j) C(i, j) += a * B(k, j);
    }
  return C;
}

void add_into(Matrix& into, const Matrix& x) {
  for (std::size_t i = 0; i < into.size(); ++i) into.data()[i] += x.data()[i];
}

void check_tokens(const ToyTransformer& model, std::span<const int> tokens) {
  require(!tokens.empty(), "empty token sequence");
  require(tokens.size() <= model.config.max_seq, "token sequence longer than max_seq");
  for (int t : tokens)
    require(t >= 0 && static_cast<std::size_t>(t) < model.config.vocab,
            "token out of range: " + std::to_string(t));
}

Matrix embed_tokens(const ToyTransformer& model, std::span<const int> tokens) {
  const std::size_t d = model.config.d_model;
  Matrix X(tokens.size(), d);
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t i = 0; i < d; ++i) X(t, i) = model.embed(static_cast<std::size_t>(tokens[t]), i);
  if (model.config.positional) add_into(X, sinusoidal_positions(tokens.size(), d));
  return X;
}

Matrix head_output(const HeadWeights& w, const Matrix& X, double d_k, Rng* noise,
                   double sigma) {
  Matrix q = matmul(X, w.W_Q), k = matmul(X, w.W_K), v = matmul(X, w.W_V);
  if (noise) {
    auto corrupt = [&](Matrix& proj, const Matrix& weight) {
      if (weight.all_zero()) {
        for (double& x : proj.flat()) x += sigma * noise->gaussian();
      } else {
        for (double& x : proj.flat()) x = 0.0;
      }
    };
    corrupt(q, w.W_Q);
    corrupt(k, w.W_K);
    corrupt(v, w.W_V);
  }
  return matmul(attend(q, k, v, d_k), w.W_O);
}

Matrix mean_rows(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  for (double& x : out.flat()) x /= static_cast<double>(m.rows());
  return out;
}

RunCache run(const ToyTransformer& model, std::span<const int> tokens, Rng* noise,
             double sigma) {
  check_tokens(model, tokens);
  const auto& cfg = model.config;
  const double d_k = static_cast<double>(cfg.d_head);
  RunCache cache;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.contributions.resize(cfg.n_heads());
  cache.aggregated = Matrix(cfg.n_heads(), cfg.d_model);

  Matrix X = embed_tokens(model, tokens);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    Matrix next = X;
    for (std::size_t h = 0; h < cfg.heads_per_layer; ++h) {
      const std::size_t idx = l * cfg.heads_per_layer + h;
      Matrix out = head_output(model.heads[idx], X, d_k, noise, sigma);
      add_into(next, out);
      const Matrix mean = mean_rows(out);
      for (std::size_t i = 0; i < cfg.d_model; ++i) cache.aggregated(idx, i) = mean(0, i);
      cache.contributions[idx] = std::move(out);
    }
    X = std::move(next);
  }
  cache.logits = matmul(X, model.unembed);
  return cache;
}

}  // namespace

Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, double d_k) {
  require(d_k > 0.0, "attend: d_k must be positive");
  require(q.rows() == k.rows() && k.rows() == v.rows() && q.cols() == k.cols(),
          "attend: shape mismatch");
  const std::size_t T = q.rows();
  const double scale = 1.0 / std::sqrt(d_k);
  Matrix out(T, v.cols());
  std::vector<double> w(T);
  for (std::size_t t = 0; t < T; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s <= t; ++s) {
      double dot = 0.0;
      for (std::size_t i = 0; i < q.cols(); ++i) dot += q(t, i) * k(s, i);
      w[s] = dot * scale;
      mx = std::max(mx, w[s]);
    }
    double sum = 0.0;
    for (std::size_t s = 0; s <= t; ++s) sum += (w[s] = std::exp(w[s] - mx));
    for (std::size_t s = 0; s <= t; ++s) {
      const double a = w[s] / sum;
      for (std::size_t j = 0; j < v.cols(); ++j) out(t, j) += a * v(s, j);
    }
  }
  return out;
}

Matrix attention_head_forward(const Matrix& X, const Matrix& W_Q, const Matrix& W_K,
                              const Matrix& W_V, double d_k) {
  require(W_Q.rows() == X.cols() && W_K.rows() == X.cols() && W_V.rows() == X.cols(),
          "attention_head_forward: weight rows must equal d_model");
  return attend(matmul(X, W_Q), matmul(X, W_K), matmul(X, W_V), d_k);
}

Matrix sinusoidal_positions(std::size_t positions, std::size_t d_model) {
  Matrix P(positions, d_model);
  for (std::size_t t = 0; t < positions; ++t)
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) /
                                                static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * freq;
      P(t, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return P;
}

RunCache model_forward_with_cache(const ToyTransformer& model, std::span<const int> tokens) {
  return run(model, tokens, nullptr, 0.0);
}

RunCache corrupt_forward(const ToyTransformer& model, std::span<const int> tokens,
                         const CorruptionSpec& spec) {
  require(spec.sigma > 0.0, "corruption sigma must be positive");
  Rng noise(spec.seed);
  return run(model, tokens, &noise, spec.sigma);
}

Matrix ablate_and_run(const ToyTransformer& model, std::span<const int> tokens,
                      const CircuitMask& mask, const RunCache& clean,
                      const RunCache& corrupt) {
  check_tokens(model, tokens);
  const auto& cfg = model.config;
  const std::vector<int> tok(tokens.begin(), tokens.end());
  require(clean.tokens == tok && corrupt.tokens == tok,
          "cache/token mismatch: caches were computed on different tokens");
  require(mask.in_circuit.size() == cfg.n_heads(), "mask size does not match head count");
  require(corrupt.contributions.size() == cfg.n_heads(), "corrupted cache has wrong head count");

  const double d_k = static_cast<double>(cfg.d_head);
  Matrix X = embed_tokens(model, tokens);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    Matrix next = X;
    for (std::size_t h = 0; h < cfg.heads_per_layer; ++h) {
      const std::size_t idx = l * cfg.heads_per_layer + h;
      if (mask.in_circuit[idx])
        add_into(next, head_output(model.heads[idx], X, d_k, nullptr, 0.0));
      else
        add_into(next, corrupt.contributions[idx]);
    }
    X = std::move(next);
  }
  return matmul(X, model.unembed);
}

GroundTruthCircuit ground_truth_mask(const ToyTransformer& model,
                                     std::span<const std::vector<int>> probes) {
  const std::size_t H = model.config.n_heads();
  GroundTruthCircuit g;
  g.in_circuit.assign(H, false);
  for (const auto& tokens : probes) {
    const RunCache c = model_forward_with_cache(model, tokens);
    for (std::size_t h = 0; h < H; ++h)
      for (double x : c.contributions[h].flat())
        if (std::abs(x) > kGroundTruthTolerance) g.in_circuit[h] = true;
  }
  for (const auto& hw : model.heads) {
    g.q.push_back(!hw.W_Q.all_zero());
    g.k.push_back(!hw.W_K.all_zero());
    g.v.push_back(!hw.W_V.all_zero());
  }
  return g;
}

GroundTruthCircuit ground_truth_mask(const ToyTransformer& model) {
  const auto probes = random_sequences(16, model.config.max_seq, model.config.vocab,
                                       derive_seed(model.config.seed, 0x9e0b));
  return ground_truth_mask(model, probes);
}

namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (double& x : m.flat()) x = static_cast<double>(static_cast<float>(scale * rng.gaussian()));
  return m;
}

}  // namespace

ToyTransformer build_synthetic_model(const ToyConfig& config, const std::vector<bool>& active) {
  require(config.vocab >= 1 && config.d_model >= 1 && config.d_head >= 1 &&
              config.n_layers >= 1 && config.heads_per_layer >= 1 && config.max_seq >= 1,
          "toy model dimensions must be >= 1");
  require(active.size() == config.n_heads(), "active mask must have one entry per head");
  Rng rng(config.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  ToyTransformer m;
  m.config = config;
  m.embed = gaussian_matrix(rng, config.vocab, config.d_model, 1.0);
  m.heads.reserve(config.n_heads());
  for (std::size_t h = 0; h < config.n_heads(); ++h) {
    HeadWeights w;
    if (active[h]) {
      w.W_Q = gaussian_matrix(rng, config.d_model, config.d_head, scale);
      w.W_K = gaussian_matrix(rng, config.d_model, config.d_head, scale);
      w.W_V = gaussian_matrix(rng, config.d_model, config.d_head, scale);
      w.W_O = gaussian_matrix(rng, config.d_head, config.d_model, scale);
    } else {
      w.W_Q = w.W_K = w.W_V = Matrix(config.d_model, config.d_head);
      w.W_O = Matrix(config.d_head, config.d_model);
    }
    m.heads.push_back(std::move(w));
  }
  m.unembed = gaussian_matrix(rng, config.d_model, config.vocab, scale);
  return m;
}

std::vector<ToyTask> default_toy_tasks(std::uint64_t seed) {
  auto pattern = [](std::string_view bits) {
    std::vector<bool> v;
    for (char c : bits) v.push_back(c == '1');
    return v;
  };
  auto config = [&](std::size_t vocab, std::uint64_t stream) {
    ToyConfig c;
    c.vocab = vocab;
    c.seed = derive_seed(seed, 100 + stream);
    return c;
  };

  // sortfreq: eight of sixteen heads drawn from the seed.
  std::vector<std::size_t> idx(16);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 200));
  rng.shuffle(idx);
  std::vector<bool> sortfreq(16, false);
  for (std::size_t i = 0; i < 8; ++i) sortfreq[idx[i]] = true;

  return {
      {"reverse", config(8, 0), pattern("1111000011110000")},
      {"fracprev", config(6, 1), pattern("1010101010101010")},
      {"sort", config(10, 2), pattern("1100000000111111")},
      {"sortfreq", config(12, 3), sortfreq},
  };
}

std::vector<std::vector<int>> random_sequences(std::size_t count, std::size_t length,
                                               std::size_t vocab, std::uint64_t seed) {
  require(vocab >= 1, "vocab must be >= 1");
  Rng rng(seed);
  std::vector<std::vector<int>> out(count, std::vector<int>(length));
  for (auto& seq : out)
    for (int& t : seq) t = static_cast<int>(rng.below(vocab));
  return out;
}

TokenDataset gen_repeated_token_data(std::uint64_t seed, std::size_t n_pos, std::size_t n_neg,
                                     std::size_t pattern_len, std::size_t vocab) {
  require(pattern_len >= 1, "pattern_len must be >= 1");
  require(vocab > pattern_len, "vocab must exceed pattern_len");
  Rng rng(seed);
  TokenDataset ds;
  ds.manifest.task = "induction";
  ds.manifest.tokenizer = "integer";
  ds.manifest.sequence_length = 2 * pattern_len;

  auto draw = [&] { return static_cast<int>(rng.below(vocab)); };
  auto text_of = [](const std::vector<int>& seq) {
    std::string s;
    for (std::size_t i = 0; i < seq.size(); ++i) s += (i ? " " : "") + std::to_string(seq[i]);
    return s;
  };

  for (std::size_t n = 0; n < n_pos + n_neg; ++n) {
    const bool positive = n < n_pos;
    std::vector<int> seq(2 * pattern_len);
    for (std::size_t i = 0; i < pattern_len; ++i) seq[i] = draw();
    for (std::size_t i = 0; i < pattern_len; ++i) {
      if (positive) {
        seq[pattern_len + i] = seq[i];
      } else {
        int t = draw();
        while (t == seq[i]) t = draw();
        seq[pattern_len + i] = t;
      }
    }
    PromptRecord rec;
    rec.text = text_of(seq);
    rec.label = positive ? Label::positive : Label::negative;
    if (positive) rec.answers = {std::to_string(seq[0])};
    rec.template_id = positive ? "repeat" : "fresh";
    rec.tokens = seq;
    ds.manifest.prompts.push_back(std::move(rec));
    ds.labels.push_back(positive ? Label::positive : Label::negative);
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

namespace {

ActivationSet collect(const ToyTransformer& model, std::span<const std::vector<int>> sequences,
                      std::vector<Label> labels, const CorruptionSpec* spec,
                      const std::string& task) {
  const std::size_t n_seq = sequences.size();
  const std::size_t n_examples = labels.size();
  const std::size_t H = model.config.n_heads(), d = model.config.d_model;
  std::vector<float> data(n_examples * H * d);
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(n_examples);

  // Each example writes only its own slice; any exception is rethrown after
  // the parallel region.
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ee = 0; ee < total; ++ee) {
    const auto e = static_cast<std::size_t>(ee);
    try {
      const bool corrupted = spec && e >= n_seq;
      const std::size_t s = corrupted ? e - n_seq : e;
      const RunCache c =
          corrupted ? corrupt_forward(model, sequences[s],
                                      {spec->sigma, derive_seed(spec->seed, s)})
                    : model_forward_with_cache(model, sequences[s]);
      float* out = data.data() + e * H * d;
      for (std::size_t k = 0; k < H * d; ++k)
        out[k] = static_cast<float>(c.aggregated.data()[k]);
    } catch (const std::exception& ex) {
#pragma omp critical
      if (error.empty()) error = ex.what();
    }
  }
  if (!error.empty()) fail(error);

  ActivationMeta meta;
  meta.source_model = "toy-seed-" + std::to_string(model.config.seed);
  meta.task = task;
  meta.aggregation = "mean";
  return ActivationSet(n_examples, H, d, std::move(data), std::move(labels), model.head_map(),
                       std::move(meta));
}

}  // namespace

ActivationSet activations_from_toy(const ToyTransformer& model,
                                   std::span<const std::vector<int>> sequences,
                                   const CorruptionSpec& spec, const std::string& task) {
  std::vector<Label> labels(sequences.size(), Label::positive);
  labels.resize(2 * sequences.size(), Label::negative);
  return collect(model, sequences, std::move(labels), &spec, task);
}

ActivationSet activations_from_toy(const ToyTransformer& model,
                                   std::span<const std::vector<int>> sequences,
                                   std::span<const Label> labels, const std::string& task) {
  require(labels.size() == sequences.size(), "one label per sequence required");
  return collect(model, sequences, {labels.begin(), labels.end()}, nullptr, task);
}

ToyMetric parse_toy_metric(const std::string& s) {
  if (s == "kl") return ToyMetric::kl;
  if (s == "logit-diff" || s == "logit_diff") return ToyMetric::logit_diff;
  fail("unknown metric: " + s);
}

namespace {

std::vector<double> softmax_row(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace

double toy_metric(ToyMetric metric, const Matrix& clean_logits, const Matrix& patched_logits) {
  require(clean_logits.rows() == patched_logits.rows() &&
              clean_logits.cols() == patched_logits.cols() && clean_logits.rows() >= 1,
          "toy_metric: logit shape mismatch");
  if (metric == ToyMetric::kl) {
    double total = 0.0;
    for (std::size_t t = 0; t < clean_logits.rows(); ++t)
      total += kl_divergence(softmax_row(clean_logits.row(t)), softmax_row(patched_logits.row(t)));
    return total / static_cast<double>(clean_logits.rows());
  }
  require(clean_logits.cols() >= 2, "logit difference needs at least two tokens");
  const auto last = clean_logits.row(clean_logits.rows() - 1);
  std::size_t a = 0;
  for (std::size_t i = 1; i < last.size(); ++i)
    if (last[i] > last[a]) a = i;
  std::size_t b = a == 0 ? 1 : 0;
  for (std::size_t i = 0; i < last.size(); ++i)
    if (i != a && last[i] > last[b]) b = i;
  return logit_difference(patched_logits.row(patched_logits.rows() - 1), a, b);
}

std::string encode_toy_file(const ToyTransformer& model) {
  std::string out;
  io::put_framed_header(out, "TOYM", to_json(model.config));
  io::put_f32s(out, model.embed.flat());
  for (const auto& h : model.heads) {
    io::put_f32s(out, h.W_Q.flat());
    io::put_f32s(out, h.W_K.flat());
    io::put_f32s(out, h.W_V.flat());
    io::put_f32s(out, h.W_O.flat());
  }
  io::put_f32s(out, model.unembed.flat());
  return out;
}

ToyTransformer decode_toy_file(std::string_view bytes) {
  io::ByteCursor cur(bytes);
  ToyTransformer m;
  m.config = toy_config_from_json(io::take_framed_header(cur, "TOYM"));
  const auto& c = m.config;
  const std::size_t expected =
      c.vocab * c.d_model * 2 + c.n_heads() * 4 * c.d_model * c.d_head;
  require(cur.remaining() == 4 * expected, "payload length mismatch in TOYM file");
  m.embed = Matrix(c.vocab, c.d_model);
  cur.f32s(m.embed.flat());
  for (std::size_t h = 0; h < c.n_heads(); ++h) {
    HeadWeights w{Matrix(c.d_model, c.d_head), Matrix(c.d_model, c.d_head),
                  Matrix(c.d_model, c.d_head), Matrix(c.d_head, c.d_model)};
    cur.f32s(w.W_Q.flat());
    cur.f32s(w.W_K.flat());
    cur.f32s(w.W_V.flat());
    cur.f32s(w.W_O.flat());
    m.heads.push_back(std::move(w));
  }
  m.unembed = Matrix(c.d_model, c.vocab);
  cur.f32s(m.unembed.flat());
  return m;
}

void write_toy_file(const ToyTransformer& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_toy_file(model));
}

ToyTransformer read_toy_file(const std::filesystem::path& path) {
  return decode_toy_file(io::read_file(path));
}

}  // namespace sc

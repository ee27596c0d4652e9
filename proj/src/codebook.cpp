#include "sc/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "sc/error.hpp"

namespace sc {

CodeMatrix::CodeMatrix(std::size_t n_heads, std::size_t n_codes,
                       std::vector<std::uint32_t> codes, std::vector<Label> labels,
                       std::optional<std::uint32_t> sentinel)
    : n_heads_(n_heads),
      n_codes_(n_codes),
      codes_(std::move(codes)),
      labels_(std::move(labels)),
      sentinel_(sentinel) {
  require(n_heads_ >= 1, "CodeMatrix: n_heads must be >= 1");
  require(codes_.size() == labels_.size() * n_heads_, "CodeMatrix: label count mismatch");
  for (auto c : codes_) require(c < n_codes_, "CodeMatrix: code out of range");
}

CodeMatrix discretize(const Matrix& z, std::size_t n_heads, std::span<const Label> labels,
                      DiscretizeOptions options) {
  require(z.rows() == labels.size() * n_heads, "discretize: row count mismatch");
  const std::size_t m = z.cols();
  require(m >= 1, "discretize: empty feature dimension");
  std::vector<std::uint32_t> codes(z.rows());
  const auto sentinel = static_cast<std::uint32_t>(m);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(z.rows());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto row = z.row(static_cast<std::size_t>(r));
    std::size_t best = 0;
    bool all_zero = row[0] == 0.0;
    for (std::size_t j = 1; j < m; ++j) {
      if (row[j] > row[best]) best = j;
      if (row[j] != 0.0) all_zero = false;
    }
    codes[static_cast<std::size_t>(r)] =
        options.dead_code_sentinel && all_zero ? sentinel : static_cast<std::uint32_t>(best);
  }
  if (options.dead_code_sentinel)
    return CodeMatrix(n_heads, m + 1, std::move(codes), {labels.begin(), labels.end()},
                      sentinel);
  return CodeMatrix(n_heads, m, std::move(codes), {labels.begin(), labels.end()});
}

std::vector<double> node_scores(const CodeMatrix& cm, bool normalize) {
  const std::size_t n_pos =
      static_cast<std::size_t>(std::count(cm.labels().begin(), cm.labels().end(), Label::positive));
  require(n_pos >= 1 && n_pos < cm.n_examples(),
          "node_scores: need at least one positive and one negative example");

  std::vector<double> u(cm.n_heads());
  const std::ptrdiff_t heads = static_cast<std::ptrdiff_t>(cm.n_heads());
#pragma omp parallel
  {
    // 1 = seen on positives, 2 = seen on negatives
    std::vector<std::uint8_t> seen(cm.n_codes());
#pragma omp for schedule(static)
    for (std::ptrdiff_t hh = 0; hh < heads; ++hh) {
      const auto h = static_cast<std::size_t>(hh);
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t e = 0; e < cm.n_examples(); ++e) {
        const auto c = cm.code(e, h);
        if (!cm.counts(c)) continue;
        seen[c] |= cm.label(e) == Label::positive ? 1 : 2;
      }
      std::size_t only_pos = 0, any = 0;
      for (auto s : seen) {
        only_pos += s == 1;
        any += s != 0;
      }
      u[h] = normalize ? (any == 0 ? 0.0 : static_cast<double>(only_pos) / static_cast<double>(any))
                       : static_cast<double>(only_pos);
    }
  }
  return u;
}

std::string to_string(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::node: return "node";
    case ScoreMethod::edge: return "edge";
    case ScoreMethod::entropy: return "entropy";
    case ScoreMethod::norm_diff: return "norm-diff";
  }
  return "node";
}

std::string to_string(SoftmaxMode m) {
  return m == SoftmaxMode::across_heads ? "heads" : "layer";
}

ScoreMethod parse_method(const std::string& s) {
  if (s == "node") return ScoreMethod::node;
  if (s == "edge") return ScoreMethod::edge;
  if (s == "entropy") return ScoreMethod::entropy;
  if (s == "norm-diff" || s == "norm_diff") return ScoreMethod::norm_diff;
  fail("unknown method: " + s);
}

SoftmaxMode parse_softmax_mode(const std::string& s) {
  if (s == "heads" || s == "across_heads") return SoftmaxMode::across_heads;
  if (s == "layer" || s == "per_layer") return SoftmaxMode::per_layer;
  fail("unknown softmax mode: " + s);
}

namespace {

void softmax_inplace(std::span<const double> in, std::span<const std::size_t> idx,
                     std::vector<double>& out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (auto i : idx) mx = std::max(mx, in[i]);
  double sum = 0.0;
  for (auto i : idx) sum += (out[i] = std::exp(in[i] - mx));
  for (auto i : idx) out[i] /= sum;
}

}  // namespace

HeadScores softmax_scores(std::span<const double> raw, SoftmaxMode mode,
                          std::span<const HeadIndex> head_map, ScoreMethod method) {
  for (double v : raw) require(std::isfinite(v), "softmax_scores: non-finite score");
  HeadScores s;
  s.raw.assign(raw.begin(), raw.end());
  s.normalized.assign(raw.size(), 0.0);
  s.method = method;
  s.mode = mode;
  if (raw.empty()) return s;
  if (mode == SoftmaxMode::across_heads) {
    std::vector<std::size_t> all(raw.size());
    std::iota(all.begin(), all.end(), 0);
    softmax_inplace(raw, all, s.normalized);
  } else {
    require(head_map.size() == raw.size(), "softmax_scores: head_map size mismatch");
    std::map<int, std::vector<std::size_t>> layers;
    for (std::size_t i = 0; i < head_map.size(); ++i) layers[head_map[i].layer].push_back(i);
    for (const auto& [layer, idx] : layers) softmax_inplace(raw, idx, s.normalized);
  }
  return s;
}

nlohmann::json to_json(const HeadScores& s) {
  return {{"method", to_string(s.method)},
          {"softmax", to_string(s.mode)},
          {"raw", s.raw},
          {"normalized", s.normalized}};
}

HeadScores head_scores_from_json(const nlohmann::json& j) {
  HeadScores s;
  try {
    s.method = parse_method(j.at("method").get<std::string>());
    s.mode = parse_softmax_mode(j.at("softmax").get<std::string>());
    s.raw = j.at("raw").get<std::vector<double>>();
    s.normalized = j.at("normalized").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed scores JSON: ") + e.what());
  }
  require(s.raw.size() == s.normalized.size(), "scores JSON: raw/normalized size mismatch");
  return s;
}

std::uint64_t CoocCounts::total() const {
  std::uint64_t t = 0;
  for (const auto& [k, v] : counts) t += v;
  return t;
}

CoocCounts build_cooccurrence(const CodeMatrix& cm, Label label) {
  CoocCounts out;
  out.n_heads = cm.n_heads();
  bool any = false;
  const auto H = static_cast<std::uint32_t>(cm.n_heads());
  for (std::size_t e = 0; e < cm.n_examples(); ++e) {
    if (cm.label(e) != label) continue;
    any = true;
    for (std::uint32_t h1 = 0; h1 < H; ++h1) {
      const auto c1 = cm.code(e, h1);
      if (!cm.counts(c1)) continue;
      for (std::uint32_t h2 = h1 + 1; h2 < H; ++h2) {
        const auto c2 = cm.code(e, h2);
        if (!cm.counts(c2)) continue;
        ++out.counts[{h1, h2, c1, c2}];
      }
    }
  }
  require(any, "build_cooccurrence: no examples with the requested label");
  return out;
}

void merge_into(CoocCounts& into, const CoocCounts& from) {
  require(into.n_heads == from.n_heads, "merge_into: head count mismatch");
  for (const auto& [k, v] : from.counts) into.counts[k] += v;
}

nlohmann::json to_json(const CoocCounts& c) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [k, v] : c.counts)
    counts[std::to_string(k.h1) + "," + std::to_string(k.h2) + "," + std::to_string(k.c1) +
           "," + std::to_string(k.c2)] = v;
  return {{"n_heads", c.n_heads}, {"counts", std::move(counts)}};
}

std::size_t pair_count(std::size_t n_heads) { return n_heads * (n_heads - 1) / 2; }

std::size_t default_k(std::size_t n_heads) { return std::max<std::size_t>(1, pair_count(n_heads) / 2); }

namespace {

// Ranks the upper-triangle pairs by descending score, ties broken by (h1, h2),
// and counts head memberships among the first k.
EdgeScores top_k_membership(Matrix pair_score, std::size_t k) {
  const std::size_t n = pair_score.rows();
  require(k >= 1, "k must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(pair_count(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& x, const auto& y) {
    return pair_score(x.first, x.second) > pair_score(y.first, y.second);
  });

  EdgeScores out;
  out.clamped = k > pairs.size();
  out.k_used = std::min(k, pairs.size());
  out.u.assign(n, 0.0);
  for (std::size_t i = 0; i < out.k_used; ++i) {
    out.u[pairs[i].first] += 1.0;
    out.u[pairs[i].second] += 1.0;
  }
  out.top_pairs.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(out.k_used));
  out.pair_score = std::move(pair_score);
  return out;
}

}  // namespace

EdgeScores edge_scores(const CoocCounts& cplus, const CoocCounts& cminus, std::size_t k,
                       std::size_t n_heads, bool unique_pair_count) {
  Matrix U(n_heads, n_heads);
  for (const auto& [key, count] : cplus.counts) {
    require(key.h1 < key.h2 && key.h2 < n_heads, "edge_scores: head index out of range");
    if (count == 0 || cminus.at(key) != 0) continue;
    U(key.h1, key.h2) += unique_pair_count ? 1.0 : static_cast<double>(count);
  }
  return top_k_membership(std::move(U), k);
}

Matrix entropy_edge_scores(const CoocCounts& cplus, std::size_t n_heads) {
  // Keys are ordered by (h1, h2) first, so each pair's entries are contiguous.
  Matrix H(n_heads, n_heads);
  auto it = cplus.counts.begin();
  while (it != cplus.counts.end()) {
    const auto h1 = it->first.h1, h2 = it->first.h2;
    require(h1 < h2 && h2 < n_heads, "entropy_edge_scores: head index out of range");
    auto end = it;
    double total = 0.0;
    while (end != cplus.counts.end() && end->first.h1 == h1 && end->first.h2 == h2) {
      total += static_cast<double>(end->second);
      ++end;
    }
    double h = 0.0;
    if (total > 0.0)
      for (auto j = it; j != end; ++j) {
        if (j->second == 0) continue;
        const double p = static_cast<double>(j->second) / total;
        h -= p * std::log2(p);
      }
    // -0.0 from a point mass reads badly in reports
    H(h1, h2) = H(h2, h1) = h == 0.0 ? 0.0 : h;
    it = end;
  }
  return H;
}

EdgeScores entropy_head_scores(const Matrix& entropy, std::size_t k) {
  require(entropy.rows() == entropy.cols(), "entropy_head_scores: matrix must be square");
  return top_k_membership(entropy, k);
}

std::vector<double> norm_diff_baseline(const ActivationSet& set) {
  const std::size_t n_pos = set.count(Label::positive);
  const std::size_t n_neg = set.count(Label::negative);
  require(n_pos >= 1 && n_neg >= 1, "norm_diff_baseline: need both positive and negative examples");
  const std::size_t H = set.n_heads(), d = set.d_model();
  std::vector<double> u(H);
  const std::ptrdiff_t heads = static_cast<std::ptrdiff_t>(H);
#pragma omp parallel
  {
    std::vector<double> pos(d), neg(d);
#pragma omp for schedule(static)
    for (std::ptrdiff_t hh = 0; hh < heads; ++hh) {
      const auto h = static_cast<std::size_t>(hh);
      std::fill(pos.begin(), pos.end(), 0.0);
      std::fill(neg.begin(), neg.end(), 0.0);
      for (std::size_t e = 0; e < set.n_examples(); ++e) {
        auto& acc = set.label(e) == Label::positive ? pos : neg;
        const auto v = set.vector(e, h);
        for (std::size_t i = 0; i < d; ++i) acc[i] += v[i];
      }
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = pos[i] / static_cast<double>(n_pos) - neg[i] / static_cast<double>(n_neg);
        s += diff * diff;
      }
      u[h] = std::sqrt(s);
    }
  }
  return u;
}

}  // namespace sc

#pragma once

// Brute-force reference computations used only by tests. Each one is written
// straight from the defining formula, with no shared code paths into the
// library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "sc/activation_store.hpp"
#include "sc/circuit_eval.hpp"
#include "sc/codebook.hpp"
#include "sc/matrix.hpp"
#include "sc/sae.hpp"
#include "sc/toy_model.hpp"

namespace oracle {

using sc::Label;
using sc::Matrix;

inline Matrix random_matrix(std::mt19937_64& g, std::size_t r, std::size_t c, double lo = -1,
                            double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = u(g);
  return m;
}

inline std::vector<double> random_vector(std::mt19937_64& g, std::size_t n, double lo = -1,
                                         double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

inline Matrix matmul(const Matrix& A, const Matrix& B) {
  Matrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < B.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < A.cols(); ++k) s += A(i, k) * B(k, j);
      C(i, j) = s;
    }
  return C;
}

// ---------------------------------------------------------------- SAE

inline std::vector<double> encode(const sc::SaeModel& m, const std::vector<double>& h) {
  std::vector<double> z(m.W_E.rows());
  for (std::size_t j = 0; j < z.size(); ++j) {
    double s = m.b_E[j];
    for (std::size_t i = 0; i < h.size(); ++i) s += m.W_E(j, i) * (h[i] - m.b[i]);
    z[j] = s > 0 ? s : 0;
  }
  return z;
}

inline std::vector<double> decode(const sc::SaeModel& m, const std::vector<double>& z) {
  std::vector<double> h(m.W_D.rows());
  for (std::size_t i = 0; i < h.size(); ++i) {
    double s = m.b[i];
    for (std::size_t j = 0; j < z.size(); ++j) s += m.W_D(i, j) * z[j];
    h[i] = s;
  }
  return h;
}

inline double sae_loss(const Matrix& x, const Matrix& xh, const Matrix& z, double lambda) {
  double rec = 0, l1 = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) rec += (x(i, j) - xh(i, j)) * (x(i, j) - xh(i, j));
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) l1 += std::abs(z(i, j));
  return rec + lambda * l1;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Mean over slots of the mean cosine over all (a in A, b in B) at that slot.
inline double slot_cs(const sc::SlotBatch& A, const sc::SlotBatch& B) {
  double total = 0;
  for (std::size_t s = 0; s < A.n_slots; ++s) {
    double acc = 0;
    for (std::size_t a = 0; a < A.n_examples; ++a)
      for (std::size_t b = 0; b < B.n_examples; ++b) acc += cosine(A.at(a, s), B.at(b, s));
    total += acc / static_cast<double>(A.n_examples * B.n_examples);
  }
  return total / static_cast<double>(A.n_slots);
}

inline double contrastive(const sc::SlotBatch& P, const sc::SlotBatch& N, double eps) {
  return slot_cs(P, N) + std::max(0.0, eps - slot_cs(P, P) / 2 - slot_cs(N, N) / 2);
}


// ---------------------------------------------------------------- gradients

struct GradCase {
  sc::SaeModel model;
  sc::TrainingBatch batch;
  sc::SaeConfig config;
};

inline sc::SlotBatch slots_of(const Matrix& Z, std::size_t n_heads,
                              const std::vector<std::size_t>& examples) {
  sc::SlotBatch b{examples.size(), n_heads, Z.cols(), {}};
  for (auto e : examples)
    for (std::size_t h = 0; h < n_heads; ++h)
      for (std::size_t j = 0; j < Z.cols(); ++j) b.values.push_back(Z(e * n_heads + h, j));
  return b;
}

// Objective straight from its definition: squared error + lambda * L1 +
// alpha * contrastive over per-head code vectors.
inline double objective(const GradCase& c) {
  const auto& x = c.batch.x;
  Matrix Z(x.rows(), c.model.d_bottleneck()), Xh(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto z = oracle::encode(c.model, {x.row(r).begin(), x.row(r).end()});
    const auto h = oracle::decode(c.model, z);
    for (std::size_t j = 0; j < z.size(); ++j) Z(r, j) = z[j];
    for (std::size_t i = 0; i < h.size(); ++i) Xh(r, i) = h[i];
  }
  double L = oracle::sae_loss(x, Xh, Z, c.config.lambda);
  if (c.config.alpha > 0) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t e = 0; e < c.batch.example_labels.size(); ++e)
      (c.batch.example_labels[e] == Label::positive ? pos : neg).push_back(e);
    L += c.config.alpha * oracle::contrastive(slots_of(Z, c.batch.n_heads, pos),
                                      slots_of(Z, c.batch.n_heads, neg), c.config.epsilon_margin);
  }
  return L;
}

// Random small instance whose pre-activations, code vectors and hinge are all
// at least 1e-3 away from a kink, so central differences are meaningful.
inline GradCase random_grad_case(std::mt19937_64& g, bool contrastive_term) {
  std::uniform_int_distribution<std::size_t> dd(2, 8), mm(2, 6), hh(1, 2), ee(2, 4);
  for (;;) {
    const std::size_t d = dd(g), m = mm(g), H = hh(g), E = ee(g);
    GradCase c;
    c.model = {random_matrix(g, m, d), random_matrix(g, d, m), random_vector(g, d, -0.5, 0.5),
               random_vector(g, m, -0.2, 0.8)};
    c.batch.n_heads = H;
    c.batch.x = random_matrix(g, E * H, d);
    for (std::size_t e = 0; e < E; ++e)
      c.batch.example_labels.push_back(e % 2 == 0 ? Label::positive : Label::negative);
    c.config.d_model = d;
    c.config.d_bottleneck = m;
    c.config.lambda = std::uniform_real_distribution<double>(0.0, 0.1)(g);
    if (contrastive_term) {
      c.config.alpha = std::uniform_real_distribution<double>(0.1, 2.0)(g);
      c.config.epsilon_margin = std::uniform_real_distribution<double>(0.0, 2.0)(g);
    }

    bool ok = true;
    Matrix Z(E * H, m);
    for (std::size_t r = 0; r < E * H && ok; ++r) {
      bool any = false;
      for (std::size_t j = 0; j < m; ++j) {
        double pre = c.model.b_E[j];
        for (std::size_t i = 0; i < d; ++i)
          pre += c.model.W_E(j, i) * (c.batch.x(r, i) - c.model.b[i]);
        if (std::abs(pre) < 1e-3) ok = false;
        Z(r, j) = pre > 0 ? pre : 0;
        any = any || pre > 1e-3;
      }
      if (!any) ok = false;
    }
    if (ok && contrastive_term) {
      std::vector<std::size_t> pos, neg;
      for (std::size_t e = 0; e < E; ++e) (e % 2 == 0 ? pos : neg).push_back(e);
      const double inner = c.config.epsilon_margin - slot_cs(slots_of(Z, H, pos), slots_of(Z, H, pos)) / 2 -
                           slot_cs(slots_of(Z, H, neg), slots_of(Z, H, neg)) / 2;
      if (std::abs(inner) < 1e-3) ok = false;
    }
    if (ok) return c;
  }
}

// Largest relative disagreement between the analytic gradient and central
// differences with step h, over every parameter entry.
inline double gradient_check(const GradCase& c, const sc::SaeGradients& analytic,
                             double h = 1e-4) {
  double worst = 0;
  auto probe = [&](auto get_param, std::span<const double> grad) {
    for (std::size_t k = 0; k < grad.size(); ++k) {
      GradCase up = c, dn = c;
      get_param(up.model)[k] += h;
      get_param(dn.model)[k] -= h;
      const double numeric = (objective(up) - objective(dn)) / (2 * h);
      const double a = grad[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
    }
  };
  probe([](sc::SaeModel& m) { return m.W_E.flat(); }, analytic.W_E.flat());
  probe([](sc::SaeModel& m) { return m.W_D.flat(); }, analytic.W_D.flat());
  probe([](sc::SaeModel& m) { return std::span<double>(m.b); }, analytic.b);
  probe([](sc::SaeModel& m) { return std::span<double>(m.b_E); }, analytic.b_E);
  return worst;
}

// ---------------------------------------------------------------- codebook

inline std::uint32_t argmax(std::span<const double> row) {
  std::uint32_t best = 0;
  for (std::uint32_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

inline sc::CodeMatrix random_code_matrix(std::mt19937_64& g, std::size_t max_heads = 6,
                                         std::size_t max_codes = 8,
                                         std::size_t max_examples = 12) {
  const std::size_t H = 2 + g() % (max_heads - 1);
  const std::size_t C = 1 + g() % max_codes;
  const std::size_t E = 2 + g() % (max_examples - 1);
  std::vector<Label> labels(E);
  for (auto& l : labels) l = (g() & 1) ? Label::positive : Label::negative;
  labels[0] = Label::positive;
  labels[1] = Label::negative;
  std::shuffle(labels.begin(), labels.end(), g);
  std::vector<std::uint32_t> codes(E * H);
  for (auto& c : codes) c = static_cast<std::uint32_t>(g() % C);
  return sc::CodeMatrix(H, C, std::move(codes), std::move(labels));
}

inline std::vector<double> node_scores(const sc::CodeMatrix& cm, bool normalize) {
  std::vector<double> u(cm.n_heads());
  for (std::size_t h = 0; h < cm.n_heads(); ++h) {
    std::set<std::uint32_t> p, n;
    for (std::size_t e = 0; e < cm.n_examples(); ++e) {
      const auto c = cm.code(e, h);
      if (!cm.counts(c)) continue;
      (cm.label(e) == Label::positive ? p : n).insert(c);
    }
    std::set<std::uint32_t> only, all = p;
    all.insert(n.begin(), n.end());
    std::set_difference(p.begin(), p.end(), n.begin(), n.end(),
                        std::inserter(only, only.begin()));
    u[h] = static_cast<double>(only.size());
    if (normalize) u[h] = all.empty() ? 0.0 : u[h] / static_cast<double>(all.size());
  }
  return u;
}

using Quad = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>;

inline std::map<Quad, std::uint64_t> cooccurrence(const sc::CodeMatrix& cm, Label label) {
  std::map<Quad, std::uint64_t> out;
  for (std::size_t h1 = 0; h1 < cm.n_heads(); ++h1)
    for (std::size_t h2 = 0; h2 < cm.n_heads(); ++h2) {
      if (!(h1 < h2)) continue;
      for (std::size_t e = 0; e < cm.n_examples(); ++e) {
        if (cm.label(e) != label) continue;
        const auto c1 = cm.code(e, h1), c2 = cm.code(e, h2);
        if (!cm.counts(c1) || !cm.counts(c2)) continue;
        ++out[{static_cast<std::uint32_t>(h1), static_cast<std::uint32_t>(h2), c1, c2}];
      }
    }
  return out;
}

inline std::map<Quad, std::uint64_t> as_map(const sc::CoocCounts& c) {
  std::map<Quad, std::uint64_t> out;
  for (const auto& [k, v] : c.counts) out[{k.h1, k.h2, k.c1, k.c2}] = v;
  return out;
}

// Rank pairs by descending score with lexicographic (h1, h2) tie-break, take
// the first k, and count how often each head appears.
inline std::vector<double> topk_membership(
    std::vector<std::tuple<double, std::size_t, std::size_t>> scored, std::size_t k,
    std::size_t n_heads) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::make_pair(std::get<1>(a), std::get<2>(a)) <
           std::make_pair(std::get<1>(b), std::get<2>(b));
  });
  std::vector<double> u(n_heads, 0.0);
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
    u[std::get<1>(scored[i])] += 1;
    u[std::get<2>(scored[i])] += 1;
  }
  return u;
}

inline std::vector<double> edge_scores(const sc::CodeMatrix& cm, std::size_t k,
                                       bool unique_pair_count = false) {
  const auto plus = cooccurrence(cm, Label::positive);
  const auto minus = cooccurrence(cm, Label::negative);
  std::vector<std::tuple<double, std::size_t, std::size_t>> scored;
  for (std::size_t h1 = 0; h1 < cm.n_heads(); ++h1)
    for (std::size_t h2 = h1 + 1; h2 < cm.n_heads(); ++h2) {
      double U = 0;
      for (const auto& [key, count] : plus) {
        if (std::get<0>(key) != h1 || std::get<1>(key) != h2) continue;
        if (minus.count(key)) continue;
        U += unique_pair_count ? 1.0 : static_cast<double>(count);
      }
      scored.emplace_back(U, h1, h2);
    }
  return topk_membership(std::move(scored), k, cm.n_heads());
}

inline Matrix entropy(const sc::CodeMatrix& cm) {
  const auto plus = cooccurrence(cm, Label::positive);
  Matrix H(cm.n_heads(), cm.n_heads());
  for (std::size_t h1 = 0; h1 < cm.n_heads(); ++h1)
    for (std::size_t h2 = h1 + 1; h2 < cm.n_heads(); ++h2) {
      double total = 0;
      for (const auto& [key, c] : plus)
        if (std::get<0>(key) == h1 && std::get<1>(key) == h2) total += static_cast<double>(c);
      double e = 0;
      for (const auto& [key, c] : plus)
        if (std::get<0>(key) == h1 && std::get<1>(key) == h2) {
          const double p = static_cast<double>(c) / total;
          e -= p * std::log2(p);
        }
      H(h1, h2) = H(h2, h1) = e;
    }
  return H;
}

inline std::vector<double> norm_diff(const sc::ActivationSet& s) {
  std::vector<double> out(s.n_heads());
  for (std::size_t h = 0; h < s.n_heads(); ++h) {
    std::vector<double> mp(s.d_model()), mn(s.d_model());
    double np = 0, nn = 0;
    for (std::size_t e = 0; e < s.n_examples(); ++e) {
      auto v = s.vector(e, h);
      auto& m = s.label(e) == Label::positive ? mp : mn;
      (s.label(e) == Label::positive ? np : nn) += 1;
      for (std::size_t i = 0; i < v.size(); ++i) m[i] += v[i];
    }
    double sq = 0;
    for (std::size_t i = 0; i < s.d_model(); ++i) {
      const double d = mp[i] / np - mn[i] / nn;
      sq += d * d;
    }
    out[h] = std::sqrt(sq);
  }
  return out;
}

// ---------------------------------------------------------------- evaluation

// Mann-Whitney: fraction of (positive, negative) pairs ranked correctly,
// ties counting half.
inline double pairwise_auc(std::span<const double> s, const std::vector<bool>& truth) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (truth[j]) continue;
      pairs += 1;
      if (s[i] > s[j]) wins += 1;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Confusion {
  double precision, recall, f1;
};

inline Confusion confusion(const std::vector<bool>& mask, const std::vector<bool>& truth) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && truth[i]) tp++;
    if (mask[i] && !truth[i]) fp++;
    if (!mask[i] && truth[i]) fn++;
  }
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0;
  const double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
  return {p, r, f};
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

inline std::vector<double> random_distribution(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(n);
  double s = 0;
  for (auto& x : p) s += (x = u(g));
  for (auto& x : p) x /= s;
  return p;
}

// ---------------------------------------------------------------- toy model

// Causal softmax attention from scalar loops.
inline Matrix attention(const Matrix& X, const Matrix& WQ, const Matrix& WK, const Matrix& WV,
                        double dk) {
  const Matrix q = matmul(X, WQ), k = matmul(X, WK), v = matmul(X, WV);
  Matrix out(X.rows(), WV.cols());
  for (std::size_t t = 0; t < X.rows(); ++t) {
    std::vector<double> a(t + 1);
    double denom = 0;
    for (std::size_t s = 0; s <= t; ++s) {
      double dot = 0;
      for (std::size_t i = 0; i < q.cols(); ++i) dot += q(t, i) * k(s, i);
      a[s] = std::exp(dot / std::sqrt(dk));
      denom += a[s];
    }
    for (std::size_t s = 0; s <= t; ++s)
      for (std::size_t j = 0; j < v.cols(); ++j) out(t, j) += a[s] / denom * v(s, j);
  }
  return out;
}

inline Matrix embed(const sc::ToyTransformer& m, const std::vector<int>& tokens) {
  Matrix X(tokens.size(), m.config.d_model);
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t i = 0; i < m.config.d_model; ++i) {
      X(t, i) = m.embed(static_cast<std::size_t>(tokens[t]), i);
      if (m.config.positional) {
        const double rate = std::pow(10000.0, -2.0 * std::floor(i / 2.0) / m.config.d_model);
        X(t, i) += i % 2 ? std::cos(t * rate) : std::sin(t * rate);
      }
    }
  return X;
}

// Per-head contributions and logits of a clean run; heads in a layer all
// read the residual left by the previous layer.
struct Forward {
  std::vector<Matrix> contributions;
  Matrix logits;
};

inline Forward forward(const sc::ToyTransformer& m, const std::vector<int>& tokens) {
  Forward f;
  Matrix X = embed(m, tokens);
  const double dk = static_cast<double>(m.config.d_head);
  for (std::size_t l = 0; l < m.config.n_layers; ++l) {
    Matrix sum = X;
    for (std::size_t h = 0; h < m.config.heads_per_layer; ++h) {
      const auto& w = m.head(l, h);
      Matrix c = matmul(attention(X, w.W_Q, w.W_K, w.W_V, dk), w.W_O);
      for (std::size_t r = 0; r < c.rows(); ++r)
        for (std::size_t i = 0; i < c.cols(); ++i) sum(r, i) += c(r, i);
      f.contributions.push_back(std::move(c));
    }
    X = sum;
  }
  f.logits = matmul(X, m.unembed);
  return f;
}

}  // namespace oracle

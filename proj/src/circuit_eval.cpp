#include "sc/circuit_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sc/error.hpp"
#include "sc/format.hpp"
#include "sc/rng.hpp"

namespace sc {

std::size_t CircuitMask::size() const {
  return static_cast<std::size_t>(std::count(in_circuit.begin(), in_circuit.end(), true));
}

nlohmann::json to_json(const CircuitMask& m) {
  return {{"in_circuit", m.in_circuit}, {"theta", m.theta}, {"source", m.source}};
}

CircuitMask circuit_mask_from_json(const nlohmann::json& j) {
  CircuitMask m;
  try {
    m.in_circuit = j.at("in_circuit").get<std::vector<bool>>();
    m.theta = j.value("theta", 0.0);
    m.source = j.value("source", "");
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed mask JSON: ") + e.what());
  }
  return m;
}

nlohmann::json to_json(const GroundTruthCircuit& g) {
  nlohmann::json j = {{"in_circuit", g.in_circuit}};
  if (!g.q.empty()) j["q"] = g.q;
  if (!g.k.empty()) j["k"] = g.k;
  if (!g.v.empty()) j["v"] = g.v;
  return j;
}

GroundTruthCircuit ground_truth_from_json(const nlohmann::json& j) {
  GroundTruthCircuit g;
  try {
    g.in_circuit = j.at("in_circuit").get<std::vector<bool>>();
    g.q = j.value("q", std::vector<bool>{});
    g.k = j.value("k", std::vector<bool>{});
    g.v = j.value("v", std::vector<bool>{});
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed ground-truth JSON: ") + e.what());
  }
  return g;
}

CircuitMask threshold_mask(const HeadScores& scores, double theta) {
  require(theta >= 0.0 && theta <= 1.0, "threshold_mask: theta must lie in [0, 1]");
  CircuitMask m;
  m.theta = theta;
  m.source = to_string(scores.method);
  m.in_circuit.resize(scores.normalized.size());
  for (std::size_t i = 0; i < scores.normalized.size(); ++i)
    m.in_circuit[i] = scores.normalized[i] > theta;
  return m;
}

namespace {

void check_truth(std::size_t n, const GroundTruthCircuit& truth) {
  require(truth.in_circuit.size() == n, "ground truth size does not match score count");
  const auto pos = std::count(truth.in_circuit.begin(), truth.in_circuit.end(), true);
  require(pos >= 1 && static_cast<std::size_t>(pos) < n,
          "ground truth must contain both circuit and non-circuit heads");
}

}  // namespace

double roc_auc(std::span<const double> scores, const GroundTruthCircuit& truth) {
  check_truth(scores.size(), truth);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk tie groups from the highest score down. Twice the trapezoid area in
  // units of (1/P)(1/N) is an integer, so the result is exact up to the final
  // division.
  std::uint64_t P = 0, N = 0;
  for (bool t : truth.in_circuit) (t ? P : N) += 1;
  std::uint64_t tp = 0, area2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t dp = 0, dn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth.in_circuit[order[j]] ? dp : dn) += 1;
      ++j;
    }
    area2 += dn * (2 * tp + dp);
    tp += dp;
    i = j;
  }
  return static_cast<double>(area2) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

ConfusionRates f1_at(const CircuitMask& mask, const GroundTruthCircuit& truth) {
  require(mask.in_circuit.size() == truth.in_circuit.size(), "f1_at: size mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < mask.in_circuit.size(); ++i) {
    const bool p = mask.in_circuit[i], t = truth.in_circuit[i];
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  ConfusionRates r;
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<double> threshold_grid(std::span<const double> normalized) {
  std::vector<double> distinct(normalized.begin(), normalized.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> grid = {0.0, 1.0};
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    grid.push_back(distinct[i]);
    if (i + 1 < distinct.size()) grid.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  std::erase_if(grid, [](double t) { return t < 0.0 || t > 1.0; });
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

RocReport roc_sweep(const HeadScores& scores, const GroundTruthCircuit& truth) {
  check_truth(scores.normalized.size(), truth);
  const auto P = static_cast<double>(
      std::count(truth.in_circuit.begin(), truth.in_circuit.end(), true));
  const auto N = static_cast<double>(truth.in_circuit.size()) - P;

  RocReport r;
  for (double theta : threshold_grid(scores.normalized)) {
    const CircuitMask mask = threshold_mask(scores, theta);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < mask.in_circuit.size(); ++i) {
      tp += mask.in_circuit[i] && truth.in_circuit[i];
      fp += mask.in_circuit[i] && !truth.in_circuit[i];
    }
    const ConfusionRates c = f1_at(mask, truth);
    r.points.push_back({theta, static_cast<double>(tp) / P, static_cast<double>(fp) / N,
                        c.precision, c.recall, c.f1, tp + fp});
    if (c.f1 > r.best_f1) {
      r.best_f1 = c.f1;
      r.best_f1_theta = theta;
    }
  }
  r.auc = roc_auc(scores.normalized, truth);
  return r;
}

nlohmann::json to_json(const RocReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"theta", p.theta},
                   {"tpr", p.tpr},
                   {"fpr", p.fpr},
                   {"precision", p.precision},
                   {"recall", p.recall},
                   {"f1", p.f1},
                   {"n_selected", p.n_selected}});
  return {{"auc", r.auc},
          {"best_f1", r.best_f1},
          {"best_f1_theta", r.best_f1_theta},
          {"points", std::move(pts)}};
}

std::string to_csv(const RocReport& r) {
  std::ostringstream os;
  os << "theta,tpr,fpr,f1,precision,recall\n";
  for (const auto& p : r.points)
    os << shortest(p.theta) << ',' << shortest(p.tpr) << ',' << shortest(p.fpr) << ','
       << shortest(p.f1) << ',' << shortest(p.precision) << ',' << shortest(p.recall) << '\n';
  return os.str();
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), "kl_divergence: size mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, "kl_divergence: negative probability");
    sp += p[i];
    sq += q[i];
  }
  require(std::abs(sp - 1.0) <= 1e-6 && std::abs(sq - 1.0) <= 1e-6,
          "kl_divergence: distributions must sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    require(q[i] > 0.0, "kl_divergence: support violation (q = 0 where p > 0)");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double logit_difference(std::span<const double> logits, std::size_t correct,
                        std::size_t incorrect) {
  require(correct < logits.size() && incorrect < logits.size(),
          "logit_difference: token out of range");
  return logits[correct] - logits[incorrect];
}

double probability_difference(const YearProbs& probs, int start_year) {
  double pd = 0.0;
  for (const auto& [year, p] : probs) {
    require(p >= 0.0, "probability_difference: negative probability");
    pd += year > start_year ? p : -p;
  }
  return pd;
}

double cutoff_sharpness(const YearProbs& probs, int start_year) {
  auto get = [&](int y) {
    auto it = probs.find(y);
    return it == probs.end() ? 0.0 : it->second;
  };
  return get(start_year + 1) - get(start_year - 1);
}

double faithfulness(double m_circuit, double m_empty, double m_full) {
  require(m_full != m_empty, "degenerate denominator: full and empty metrics are equal");
  return (m_circuit - m_empty) / (m_full - m_empty);
}

std::vector<CircuitMask> random_complement_baseline(std::size_t n_heads,
                                                    std::size_t circuit_size,
                                                    std::size_t n_samples,
                                                    std::uint64_t seed) {
  require(circuit_size <= n_heads, "random_complement_baseline: circuit larger than model");
  Rng rng(seed);
  std::vector<CircuitMask> out;
  out.reserve(n_samples);
  std::vector<std::size_t> idx(n_heads);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    CircuitMask m;
    m.in_circuit.assign(n_heads, false);
    for (std::size_t i = 0; i < circuit_size; ++i) m.in_circuit[idx[i]] = true;
    m.source = "random";
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace sc

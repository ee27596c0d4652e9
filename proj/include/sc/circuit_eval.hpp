#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc/codebook.hpp"

namespace sc {

struct CircuitMask {
  std::vector<bool> in_circuit;
  double theta = 0.0;
  std::string source;

  std::size_t size() const;  // number of heads in the circuit
};

struct GroundTruthCircuit {
  std::vector<bool> in_circuit;
  // Per-component masks for toy models; empty when unknown.
  std::vector<bool> q, k, v;
};

nlohmann::json to_json(const CircuitMask& m);
CircuitMask circuit_mask_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruthCircuit& g);
GroundTruthCircuit ground_truth_from_json(const nlohmann::json& j);

// in_circuit[i] = normalized[i] > theta
CircuitMask threshold_mask(const HeadScores& scores, double theta);

// Mann-Whitney AUC: P(score_pos > score_neg) + P(equal) / 2, computed from
// the exact ROC step curve.
double roc_auc(std::span<const double> scores, const GroundTruthCircuit& truth);

struct ConfusionRates {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 precision and F1 are reported as 0.
ConfusionRates f1_at(const CircuitMask& mask, const GroundTruthCircuit& truth);

struct RocPoint {
  double theta;
  double tpr;
  double fpr;
  double precision;
  double recall;
  double f1;
  std::size_t n_selected;
};

struct RocReport {
  std::vector<RocPoint> points;  // ascending theta
  double auc = 0.0;
  double best_f1 = 0.0;
  double best_f1_theta = 0.0;
};

// Thresholds: {0, 1}, every distinct normalized score, and midpoints between
// neighbouring distinct scores.
std::vector<double> threshold_grid(std::span<const double> normalized);
RocReport roc_sweep(const HeadScores& scores, const GroundTruthCircuit& truth);

nlohmann::json to_json(const RocReport& r);
// Columns: theta,tpr,fpr,f1,precision,recall
std::string to_csv(const RocReport& r);

// Natural-log KL(p || q).
double kl_divergence(std::span<const double> p, std::span<const double> q);

double logit_difference(std::span<const double> logits, std::size_t correct,
                        std::size_t incorrect);

// Two-digit year -> probability.
using YearProbs = std::map<int, double>;
// sum_{y > Y} p_y - sum_{y <= Y} p_y
double probability_difference(const YearProbs& probs, int start_year);
// p_{Y+1} - p_{Y-1}
double cutoff_sharpness(const YearProbs& probs, int start_year);

// (m_C - m_empty) / (m_full - m_empty)
double faithfulness(double m_circuit, double m_empty, double m_full);

std::vector<CircuitMask> random_complement_baseline(std::size_t n_heads,
                                                    std::size_t circuit_size,
                                                    std::size_t n_samples,
                                                    std::uint64_t seed);

}  // namespace sc

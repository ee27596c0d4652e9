#include "sc/pipeline.hpp"

#include <sstream>

#include "sc/error.hpp"
#include "sc/format.hpp"
#include "sc/rng.hpp"

namespace sc {

ScoreOn parse_score_on(const std::string& s) {
  if (s == "all") return ScoreOn::all;
  if (s == "train") return ScoreOn::train;
  if (s == "eval") return ScoreOn::eval;
  fail("unknown score-on selection: " + s);
}

std::string to_string(ScoreOn s) {
  switch (s) {
    case ScoreOn::all: return "all";
    case ScoreOn::train: return "train";
    case ScoreOn::eval: return "eval";
  }
  return "all";
}

DiscoverResult discover(const ActivationSet& set, const DiscoverOptions& options,
                        const SaeModel* pretrained) {
  DiscoverResult result;
  Split split = split_train_eval(set, options.split);
  result.train_indices = split.train_indices;

  const ActivationSet* scored = &set;
  if (options.score_on == ScoreOn::train) scored = &split.train;
  if (options.score_on == ScoreOn::eval) scored = &split.eval;

  std::vector<double> raw;
  if (options.method == ScoreMethod::norm_diff) {
    raw = norm_diff_baseline(*scored);
  } else {
    if (pretrained) {
      require(pretrained->d_model() == set.d_model(), "pretrained SAE d_model mismatch");
      result.model = *pretrained;
    } else {
      SaeConfig cfg = options.sae;
      cfg.d_model = set.d_model();
      TrainResult trained = train_sae(cfg, split.train, split.eval);
      result.model = std::move(trained.model);
      result.report = std::move(trained.report);
    }
    const Matrix z = encode_set(*result.model, *scored);
    const CodeMatrix cm = discretize(z, scored->n_heads(), scored->labels(),
                                     {options.dead_code_sentinel});
    const std::size_t k = options.k == 0 ? default_k(cm.n_heads()) : options.k;
    switch (options.method) {
      case ScoreMethod::node:
        raw = node_scores(cm, options.normalize);
        break;
      case ScoreMethod::edge: {
        const auto plus = build_cooccurrence(cm, Label::positive);
        const auto minus = build_cooccurrence(cm, Label::negative);
        EdgeScores e = edge_scores(plus, minus, k, cm.n_heads(), options.unique_pair_count);
        raw = std::move(e.u);
        result.k_used = e.k_used;
        result.k_clamped = e.clamped;
        break;
      }
      case ScoreMethod::entropy: {
        const auto plus = build_cooccurrence(cm, Label::positive);
        EdgeScores e = entropy_head_scores(entropy_edge_scores(plus, cm.n_heads()), k);
        raw = std::move(e.u);
        result.k_used = e.k_used;
        result.k_clamped = e.clamped;
        break;
      }
      case ScoreMethod::norm_diff:
        break;
    }
  }
  result.scores = softmax_scores(raw, options.softmax, set.head_map(), options.method);
  return result;
}

namespace {

struct CachedRun {
  RunCache clean;
  RunCache corrupt;
};

std::vector<CachedRun> cache_runs(const ToyTransformer& model,
                                  const std::vector<std::vector<int>>& sequences,
                                  const CorruptionSpec& corruption) {
  std::vector<CachedRun> runs(sequences.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(sequences.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      runs[i].clean = model_forward_with_cache(model, sequences[i]);
      runs[i].corrupt = corrupt_forward(model, sequences[i],
                                        {corruption.sigma, derive_seed(corruption.seed, i)});
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) fail(error);
  return runs;
}

double mean_metric(const ToyTransformer& model, const std::vector<std::vector<int>>& sequences,
                   const std::vector<CachedRun>& runs, const CircuitMask& mask,
                   ToyMetric metric) {
  std::vector<double> per(sequences.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(sequences.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      const Matrix patched =
          ablate_and_run(model, sequences[i], mask, runs[i].clean, runs[i].corrupt);
      per[i] = toy_metric(metric, runs[i].clean.logits, patched);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) fail(error);
  double total = 0.0;
  for (double v : per) total += v;
  return total / static_cast<double>(per.size());
}

CircuitMask full_mask(std::size_t n, bool value) {
  CircuitMask m;
  m.in_circuit.assign(n, value);
  return m;
}

}  // namespace

double circuit_metric(const ToyTransformer& model,
                      const std::vector<std::vector<int>>& sequences, const CircuitMask& mask,
                      const FaithfulnessOptions& options) {
  require(!sequences.empty(), "circuit_metric: no sequences");
  const auto runs = cache_runs(model, sequences, options.corruption);
  return mean_metric(model, sequences, runs, mask, options.metric);
}

FaithfulnessReport faithfulness_sweep(const ToyTransformer& model, const HeadScores& scores,
                                      const std::vector<std::vector<int>>& sequences,
                                      const FaithfulnessOptions& options) {
  require(!sequences.empty(), "faithfulness_sweep: no sequences");
  const std::size_t H = model.config.n_heads();
  require(scores.normalized.size() == H, "faithfulness_sweep: score count does not match model");
  const auto runs = cache_runs(model, sequences, options.corruption);

  FaithfulnessReport report;
  report.m_full = mean_metric(model, sequences, runs, full_mask(H, true), options.metric);
  report.m_empty = mean_metric(model, sequences, runs, full_mask(H, false), options.metric);
  // Raises on a degenerate denominator before any row is computed.
  faithfulness(report.m_full, report.m_empty, report.m_full);

  const auto grid = threshold_grid(scores.normalized);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    FaithfulnessRow row;
    row.theta = grid[g];
    const CircuitMask mask = threshold_mask(scores, row.theta);
    row.n_heads = mask.size();
    row.metric = mean_metric(model, sequences, runs, mask, options.metric);
    row.faithfulness = faithfulness(row.metric, report.m_empty, report.m_full);

    const auto randoms = random_complement_baseline(
        H, row.n_heads, options.n_random, derive_seed(options.complement_seed, g));
    double rm = 0.0;
    for (const auto& r : randoms) rm += mean_metric(model, sequences, runs, r, options.metric);
    row.random_metric = randoms.empty() ? 0.0 : rm / static_cast<double>(randoms.size());
    row.random_faithfulness = faithfulness(row.random_metric, report.m_empty, report.m_full);
    report.rows.push_back(row);
  }
  return report;
}

nlohmann::json to_json(const FaithfulnessReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"theta", x.theta},
                    {"n_heads", x.n_heads},
                    {"metric", x.metric},
                    {"faithfulness", x.faithfulness},
                    {"random_metric", x.random_metric},
                    {"random_faithfulness", x.random_faithfulness}});
  return {{"m_full", r.m_full}, {"m_empty", r.m_empty}, {"rows", std::move(rows)}};
}

std::string to_csv(const FaithfulnessReport& r) {
  std::ostringstream os;
  os << "theta,n_heads,metric,faithfulness,random_metric,random_faithfulness\n";
  for (const auto& x : r.rows)
    os << shortest(x.theta) << ',' << x.n_heads << ',' << shortest(x.metric) << ','
       << shortest(x.faithfulness) << ',' << shortest(x.random_metric) << ','
       << shortest(x.random_faithfulness) << '\n';
  return os.str();
}

}  // namespace sc

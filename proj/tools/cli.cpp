#include "sc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sc/binary_io.hpp"
#include "sc/error.hpp"
#include "sc/format.hpp"
#include "sc/pipeline.hpp"
#include "sc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sc {
namespace {

// Flat JSON object -> CLI11 config items. Arrays become repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ParseError(std::string("malformed JSON config: ") + e.what(), 2);
    }
    if (!j.is_object()) throw CLI::ParseError("JSON config must be an object", 2);
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file_atomic(path, text);
}

json read_json(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

struct SaeFlags {
  std::size_t features = 200;
  double lambda = 0.02;
  double lr = 1e-3;
  std::size_t epochs = 500;
  double alpha = 0.0;
  double margin = 0.0;
  std::size_t eval_max = 40;
  std::size_t train_count = 10;
  bool no_balance = false;

  void add(CLI::App* app) {
    app->add_option("--features", features, "SAE dictionary size")->capture_default_str();
    app->add_option("--lambda", lambda, "L1 sparsity weight")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    app->add_option("--alpha", alpha, "contrastive loss weight")->capture_default_str();
    app->add_option("--margin", margin, "contrastive hinge margin")->capture_default_str();
    app->add_option("--eval-max", eval_max, "examples used for the eval loss curve")
        ->capture_default_str();
    app->add_option("--train-count", train_count, "training examples")->capture_default_str();
    app->add_flag("--no-balance", no_balance, "do not balance the training split by label");
  }

  SaeConfig sae(std::uint64_t seed) const {
    SaeConfig c;
    c.d_bottleneck = features;
    c.lambda = lambda;
    c.lr = lr;
    c.epochs = epochs;
    c.alpha = alpha;
    c.epsilon_margin = margin;
    c.eval_max_examples = eval_max;
    c.seed = derive_seed(seed, seed_stream::kSaeInit);
    return c;
  }

  SplitSpec split(std::uint64_t seed) const {
    return {train_count, derive_seed(seed, seed_stream::kSplit), !no_balance};
  }
};

struct ScoreFlags {
  std::string method = "node";
  bool normalize = false;
  std::string softmax = "heads";
  std::size_t k = 0;
  bool unique_pairs = false;
  bool dead_code = false;
  std::string score_on = "all";

  void add(CLI::App* app, bool with_method = true) {
    if (with_method)
      app->add_option("--method", method, "node, edge, entropy or norm-diff")
          ->check(CLI::IsMember({"node", "edge", "entropy", "norm-diff"}))
          ->capture_default_str();
    app->add_flag("--normalize", normalize, "divide node scores by the number of codes seen");
    app->add_option("--softmax", softmax, "softmax across all heads or within each layer")
        ->check(CLI::IsMember({"heads", "layer"}))
        ->capture_default_str();
    app->add_option("--k", k, "top pairs counted per head (0 = half of all pairs)")
        ->capture_default_str();
    app->add_flag("--unique-pairs", unique_pairs, "edge score counts code pairs, not examples");
    app->add_flag("--dead-code", dead_code, "map all-zero code vectors to a sentinel code");
    app->add_option("--score-on", score_on, "examples used for scoring: all, train or eval")
        ->check(CLI::IsMember({"all", "train", "eval"}))
        ->capture_default_str();
  }

  DiscoverOptions options(const SaeFlags& sae, std::uint64_t seed) const {
    DiscoverOptions o;
    o.method = parse_method(method);
    o.normalize = normalize;
    o.softmax = parse_softmax_mode(softmax);
    o.k = k;
    o.unique_pair_count = unique_pairs;
    o.dead_code_sentinel = dead_code;
    o.score_on = parse_score_on(score_on);
    o.split = sae.split(seed);
    o.sae = sae.sae(seed);
    return o;
  }
};

json scores_document(const DiscoverResult& r, const ActivationSet& set) {
  json j = to_json(r.scores);
  json hm = json::array();
  for (const auto& h : set.head_map()) hm.push_back({h.layer, h.head});
  j["head_map"] = std::move(hm);
  j["train_indices"] = r.train_indices;
  if (r.scores.method == ScoreMethod::edge || r.scores.method == ScoreMethod::entropy) {
    j["k_used"] = r.k_used;
    j["k_clamped"] = r.k_clamped;
  }
  if (r.model) j["sae_snapshot"] = snapshot_id(*r.model);
  return j;
}

// ---------------------------------------------------------------- gen-toy

struct GenToyArgs {
  std::vector<std::string> tasks;
  std::size_t n_pos = 250;
  std::size_t n_neg = 250;
  double sigma = 1.0;
  std::size_t pattern_len = 5;
  std::size_t vocab = 20;
};

void gen_synthetic(const ToyTask& task, const GenToyArgs& a, const fs::path& dir,
                   std::ostream& out) {
  require(a.n_pos == a.n_neg,
          "synthetic tasks corrupt the positive sequences, so n-pos must equal n-neg");
  fs::create_directories(dir);
  const ToyTransformer model = build_synthetic_model(task.config, task.active);
  const auto seqs = random_sequences(a.n_pos, task.config.max_seq, task.config.vocab,
                                     derive_seed(task.config.seed, seed_stream::kData));
  const CorruptionSpec corruption{a.sigma,
                                  derive_seed(task.config.seed, seed_stream::kCorruption)};
  const ActivationSet set = activations_from_toy(model, seqs, corruption, task.name);
  const GroundTruthCircuit truth = ground_truth_mask(model);

  DatasetManifest manifest;
  manifest.task = task.name;
  manifest.tokenizer = "integer";
  manifest.sequence_length = task.config.max_seq;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& s : seqs) {
      PromptRecord rec;
      for (std::size_t i = 0; i < s.size(); ++i)
        rec.text += (i ? " " : "") + std::to_string(s[i]);
      rec.label = pass == 0 ? Label::positive : Label::negative;
      rec.template_id = pass == 0 ? "clean" : "corrupted";
      if (pass == 0) {
        // Expected answer: the clean model's prediction at the last position.
        const Matrix logits = model_forward_with_cache(model, s).logits;
        const auto last = logits.row(logits.rows() - 1);
        rec.answers = {std::to_string(std::max_element(last.begin(), last.end()) - last.begin())};
      }
      rec.tokens = s;
      manifest.prompts.push_back(std::move(rec));
    }
  }

  validate(manifest);
  write_toy_file(model, dir / "model.toym");
  write_activation_file(set, dir / "activations.acts1");
  write_text(dir / "ground_truth.json", dump(to_json(truth)));
  write_text(dir / "manifest.json", dump(to_json(manifest)));
  write_text(dir / "corruption.json",
             dump({{"sigma", corruption.sigma}, {"seed", corruption.seed}}));
  out << task.name << ": " << set.n_examples() << " examples, " << truth.in_circuit.size()
      << " heads, " << std::count(truth.in_circuit.begin(), truth.in_circuit.end(), true)
      << " in circuit -> " << dir.string() << "\n";
}

void gen_induction(const GenToyArgs& a, std::uint64_t seed, const fs::path& dir,
                   std::ostream& out) {
  fs::create_directories(dir);
  ToyConfig cfg;
  cfg.vocab = a.vocab;
  cfg.max_seq = 2 * a.pattern_len;
  cfg.positional = true;
  cfg.seed = derive_seed(seed, seed_stream::kModel);
  const ToyTransformer model =
      build_synthetic_model(cfg, std::vector<bool>(cfg.n_heads(), true));
  const TokenDataset ds = gen_repeated_token_data(derive_seed(seed, seed_stream::kData), a.n_pos,
                                                  a.n_neg, a.pattern_len, a.vocab);
  validate(ds.manifest);
  const ActivationSet set = activations_from_toy(model, ds.sequences, ds.labels, "induction");
  write_toy_file(model, dir / "model.toym");
  write_activation_file(set, dir / "activations.acts1");
  write_text(dir / "manifest.json", dump(to_json(ds.manifest)));
  out << "induction: " << set.n_examples() << " examples -> " << dir.string() << "\n";
}

// Replaces "--config FILE" with the file's keys as flags placed right after
// the subcommand. Keys also given on the command line are skipped, so flags
// override the file. TOML sections apply only to the matching subcommand.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      require(i + 1 < args.size(), "--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty() || rest.empty()) return rest;

  std::istringstream in(io::read_file(path));
  std::vector<CLI::ConfigItem> items;
  if (fs::path(path).extension() == ".json") {
    items = JsonConfig().from_config(in);
  } else {
    items = CLI::ConfigTOML().from_config(in);
  }

  const std::string& sub = rest.front();
  auto given = [&](const std::string& name) {
    const std::string flag = "--" + name;
    for (std::size_t i = 1; i < rest.size(); ++i)
      if (rest[i] == flag || rest[i].rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub)) continue;
    if (item.name == "++" || item.name == "--" || given(item.name)) continue;
    for (const auto& v : item.inputs) injected.push_back("--" + item.name + "=" + v);
  }
  rest.insert(rest.begin() + 1, injected.begin(), injected.end());
  return rest;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-autoencoder circuit discovery on attention-head activations",
               "sae-circuit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  std::vector<std::string> argv_expanded;
  try {
    argv_expanded = expand_config(args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string config_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON or TOML file with default flag values");
    sub->add_option("--seed", seed, "global seed")->capture_default_str();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
  };

  // gen-toy
  GenToyArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-toy", "generate synthetic toy models and activations");
  common(gen_cmd);
  gen_cmd->add_option("--task", gen.tasks,
                      "reverse, fracprev, sort, sortfreq or induction (default: the four synthetic tasks)");
  gen_cmd->add_option("--n-pos", gen.n_pos, "positive examples")->capture_default_str();
  gen_cmd->add_option("--n-neg", gen.n_neg, "negative examples")->capture_default_str();
  gen_cmd->add_option("--sigma", gen.sigma, "corruption noise scale")->capture_default_str();
  gen_cmd->add_option("--pattern-len", gen.pattern_len, "induction pattern length")
      ->capture_default_str();
  gen_cmd->add_option("--vocab", gen.vocab, "induction vocabulary size")->capture_default_str();

  // train-sae
  std::string input;
  SaeFlags sae_flags;
  auto* train_cmd = app.add_subcommand("train-sae", "train a sparse autoencoder on an ACTS1 file");
  common(train_cmd);
  train_cmd->add_option("--input", input, "ACTS1 activations")->required();
  sae_flags.add(train_cmd);

  // discover
  std::string ground_truth;
  std::string sae_path;
  ScoreFlags score_flags;
  auto* disc_cmd = app.add_subcommand("discover", "score heads and optionally evaluate against ground truth");
  common(disc_cmd);
  disc_cmd->add_option("--input", input, "ACTS1 activations")->required();
  disc_cmd->add_option("--ground-truth", ground_truth, "ground-truth circuit JSON");
  disc_cmd->add_option("--sae", sae_path, "use a trained SAE1 model instead of training");
  sae_flags.add(disc_cmd);
  score_flags.add(disc_cmd);

  // evaluate
  std::string scores_path;
  double theta = 0.5;
  auto* eval_cmd = app.add_subcommand("evaluate", "threshold head scores and compare to ground truth");
  common(eval_cmd);
  eval_cmd->add_option("--input,--scores", scores_path, "head scores JSON")->required();
  eval_cmd->add_option("--ground-truth", ground_truth, "ground-truth circuit JSON");
  eval_cmd->add_option("--theta", theta, "threshold on normalized scores")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  // faithfulness
  std::string model_path;
  std::string metric = "kl";
  std::size_t n_examples = 50;
  std::size_t n_random = 10;
  double sigma = 1.0;
  auto* faith_cmd = app.add_subcommand("faithfulness", "sweep theta and patch circuits into a toy model");
  common(faith_cmd);
  faith_cmd->add_option("--model", model_path, "TOYM model")->required();
  faith_cmd->add_option("--input,--scores", scores_path, "head scores JSON")->required();
  faith_cmd->add_option("--metric", metric, "kl or logit-diff")
      ->check(CLI::IsMember({"kl", "logit-diff"}))
      ->capture_default_str();
  faith_cmd->add_option("--n-examples", n_examples, "evaluation sequences")->capture_default_str();
  faith_cmd->add_option("--n-random", n_random, "random circuits per threshold")
      ->capture_default_str();
  faith_cmd->add_option("--sigma", sigma, "corruption noise scale")->capture_default_str();

  // grid
  std::vector<std::size_t> grid_features{200};
  std::vector<double> grid_lambdas{0.02};
  std::vector<std::uint64_t> grid_seeds;
  auto* grid_cmd = app.add_subcommand("grid", "node and edge AUC over SAE hyperparameters");
  common(grid_cmd);
  grid_cmd->add_option("--input", input, "ACTS1 activations")->required();
  grid_cmd->add_option("--ground-truth", ground_truth, "ground-truth circuit JSON")->required();
  grid_cmd->add_option("--grid-features", grid_features, "dictionary sizes")->capture_default_str();
  grid_cmd->add_option("--grid-lambdas", grid_lambdas, "sparsity weights")->capture_default_str();
  grid_cmd->add_option("--grid-seeds", grid_seeds, "seeds (default: --seed)");
  sae_flags.add(grid_cmd);
  score_flags.add(grid_cmd, false);

  // export-report
  std::string faith_path;
  auto* report_cmd = app.add_subcommand("export-report", "collect scores and evaluations into one report");
  common(report_cmd);
  report_cmd->add_option("--input,--scores", scores_path, "head scores JSON")->required();
  report_cmd->add_option("--ground-truth", ground_truth, "ground-truth circuit JSON");
  report_cmd->add_option("--faithfulness", faith_path, "faithfulness JSON");
  report_cmd->add_option("--theta", theta, "threshold for the reported circuit")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  std::vector<std::string> reversed(argv_expanded.rbegin(), argv_expanded.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const fs::path dir(out_dir);
  try {
    if (*gen_cmd) {
      std::vector<std::string> tasks = gen.tasks;
      const auto presets = default_toy_tasks(seed);
      if (tasks.empty())
        for (const auto& t : presets) tasks.push_back(t.name);
      for (const auto& name : tasks) {
        if (name == "induction") {
          gen_induction(gen, seed, dir / name, out);
          continue;
        }
        auto it = std::find_if(presets.begin(), presets.end(),
                               [&](const ToyTask& t) { return t.name == name; });
        require(it != presets.end(), "unknown toy task: " + name);
        gen_synthetic(*it, gen, dir / name, out);
      }
    } else if (*train_cmd) {
      const ActivationSet set = read_activation_file(input);
      SaeConfig cfg = sae_flags.sae(seed);
      cfg.d_model = set.d_model();
      const Split split = split_train_eval(set, sae_flags.split(seed));
      const TrainResult r = train_sae(cfg, split.train, split.eval);
      fs::create_directories(dir);
      write_sae_file(r.model, cfg, dir / "sae.sae1");
      json rep = to_json(r.report);
      rep["train_indices"] = split.train_indices;
      write_text(dir / "train_report.json", dump(rep));
      out << "trained " << cfg.d_bottleneck << " features, final loss "
          << fmt(r.report.train_loss.empty() ? r.report.initial_train_loss
                                             : r.report.train_loss.back())
          << ", snapshot " << r.report.snapshot_id << "\n";
    } else if (*disc_cmd) {
      const ActivationSet set = read_activation_file(input);
      std::optional<SaeModel> pre;
      if (!sae_path.empty()) pre = read_sae_file(sae_path);
      const DiscoverResult r =
          discover(set, score_flags.options(sae_flags, seed), pre ? &*pre : nullptr);
      write_text(dir / "scores.json", dump(scores_document(r, set)));
      if (r.report) write_text(dir / "train_report.json", dump(to_json(*r.report)));
      if (!ground_truth.empty()) {
        const GroundTruthCircuit truth = ground_truth_from_json(read_json(ground_truth));
        const RocReport roc = roc_sweep(r.scores, truth);
        write_text(dir / "roc.json", dump(to_json(roc)));
        write_text(dir / "roc.csv", to_csv(roc));
        out << "method=" << to_string(r.scores.method) << " auc=" << fmt(roc.auc)
            << " best_f1=" << fmt(roc.best_f1) << " best_f1_theta=" << fmt(roc.best_f1_theta)
            << "\n";
      } else {
        out << "method=" << to_string(r.scores.method) << " scored " << r.scores.raw.size()
            << " heads\n";
      }
    } else if (*eval_cmd) {
      const HeadScores scores = head_scores_from_json(read_json(scores_path));
      const CircuitMask mask = threshold_mask(scores, theta);
      write_text(dir / "mask.json", dump(to_json(mask)));
      json ev = {{"theta", theta}, {"n_selected", mask.size()}};
      if (!ground_truth.empty()) {
        const GroundTruthCircuit truth = ground_truth_from_json(read_json(ground_truth));
        const ConfusionRates c = f1_at(mask, truth);
        const RocReport roc = roc_sweep(scores, truth);
        ev["precision"] = c.precision;
        ev["recall"] = c.recall;
        ev["f1"] = c.f1;
        ev["roc"] = to_json(roc);
        write_text(dir / "roc.csv", to_csv(roc));
        out << "theta=" << fmt(theta) << " selected=" << mask.size() << " f1=" << fmt(c.f1)
            << " auc=" << fmt(roc.auc) << "\n";
      } else {
        out << "theta=" << fmt(theta) << " selected=" << mask.size() << "\n";
      }
      write_text(dir / "evaluation.json", dump(ev));
    } else if (*faith_cmd) {
      const ToyTransformer model = read_toy_file(model_path);
      const HeadScores scores = head_scores_from_json(read_json(scores_path));
      const auto seqs = random_sequences(n_examples, model.config.max_seq, model.config.vocab,
                                         derive_seed(seed, seed_stream::kData));
      FaithfulnessOptions fo;
      fo.metric = parse_toy_metric(metric);
      fo.n_random = n_random;
      fo.corruption = {sigma, derive_seed(seed, seed_stream::kCorruption)};
      fo.complement_seed = derive_seed(seed, seed_stream::kComplement);
      const FaithfulnessReport rep = faithfulness_sweep(model, scores, seqs, fo);
      json j = to_json(rep);
      j["metric"] = metric;
      write_text(dir / "faithfulness.json", dump(j));
      write_text(dir / "faithfulness.csv", to_csv(rep));
      out << "metric=" << metric << " m_full=" << fmt(rep.m_full)
          << " m_empty=" << fmt(rep.m_empty) << " thresholds=" << rep.rows.size() << "\n";
    } else if (*grid_cmd) {
      require(!grid_features.empty() && !grid_lambdas.empty(), "grid lists must be nonempty");
      if (grid_seeds.empty()) grid_seeds.push_back(seed);
      const ActivationSet set = read_activation_file(input);
      const GroundTruthCircuit truth = ground_truth_from_json(read_json(ground_truth));
      std::ostringstream csv;
      csv << "features,lambda,seed,node_auc,edge_auc\n";
      for (std::size_t f : grid_features) {
        for (double l : grid_lambdas) {
          for (std::uint64_t s : grid_seeds) {
            SaeFlags cell = sae_flags;
            cell.features = f;
            cell.lambda = l;
            DiscoverOptions o = score_flags.options(cell, s);
            o.method = ScoreMethod::node;
            const DiscoverResult node = discover(set, o);
            o.method = ScoreMethod::edge;
            const DiscoverResult edge = discover(set, o, &*node.model);
            const double node_auc = roc_auc(node.scores.normalized, truth);
            const double edge_auc = roc_auc(edge.scores.normalized, truth);
            csv << f << ',' << shortest(l) << ',' << s << ',' << shortest(node_auc) << ','
                << shortest(edge_auc) << '\n';
            out << "features=" << f << " lambda=" << l << " seed=" << s
                << " node_auc=" << fmt(node_auc) << " edge_auc=" << fmt(edge_auc) << "\n";
          }
        }
      }
      write_text(dir / "grid.csv", csv.str());
    } else if (*report_cmd) {
      const json sj = read_json(scores_path);
      const HeadScores scores = head_scores_from_json(sj);
      const CircuitMask mask = threshold_mask(scores, theta);
      std::optional<GroundTruthCircuit> truth;
      if (!ground_truth.empty()) truth = ground_truth_from_json(read_json(ground_truth));

      json rep = {{"method", to_string(scores.method)},
                  {"softmax", to_string(scores.mode)},
                  {"theta", theta},
                  {"circuit", to_json(mask)}};
      if (truth) {
        const RocReport roc = roc_sweep(scores, *truth);
        const ConfusionRates c = f1_at(mask, *truth);
        rep["auc"] = roc.auc;
        rep["best_f1"] = roc.best_f1;
        rep["best_f1_theta"] = roc.best_f1_theta;
        rep["f1"] = c.f1;
      }
      if (!faith_path.empty()) rep["faithfulness"] = read_json(faith_path);

      std::ostringstream csv;
      csv << "index,layer,head,raw,normalized,in_circuit" << (truth ? ",in_truth" : "") << "\n";
      const json hm = sj.value("head_map", json::array());
      for (std::size_t i = 0; i < scores.raw.size(); ++i) {
        const int layer = i < hm.size() ? hm[i][0].get<int>() : 0;
        const int head = i < hm.size() ? hm[i][1].get<int>() : static_cast<int>(i);
        csv << i << ',' << layer << ',' << head << ',' << shortest(scores.raw[i]) << ','
            << shortest(scores.normalized[i]) << ',' << (mask.in_circuit[i] ? 1 : 0);
        if (truth) csv << ',' << (i < truth->in_circuit.size() && truth->in_circuit[i] ? 1 : 0);
        csv << '\n';
      }
      write_text(dir / "report.json", dump(rep));
      write_text(dir / "heads.csv", csv.str());
      out << "report -> " << (dir / "report.json").string() << "\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sc

#include "sc/sae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sc/binary_io.hpp"
#include "sc/error.hpp"
#include "sc/kernels.hpp"
#include "sc/rng.hpp"

namespace sc {

void SaeConfig::validate() const {
  require(d_model >= 1, "SaeConfig: d_model must be >= 1");
  require(d_bottleneck >= 1, "SaeConfig: d_bottleneck must be >= 1");
  require(epochs >= 1, "SaeConfig: epochs must be >= 1");
  require(lambda >= 0.0 && lr >= 0.0 && alpha >= 0.0,
          "SaeConfig: lambda, lr and alpha must be non-negative");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "SaeConfig: Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "SaeConfig: adam_eps must be positive");
}

nlohmann::json to_json(const SaeConfig& c) {
  return {{"d_model", c.d_model},
          {"d_bottleneck", c.d_bottleneck},
          {"lambda", c.lambda},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"alpha", c.alpha},
          {"epsilon_margin", c.epsilon_margin},
          {"eval_max_examples", c.eval_max_examples}};
}

SaeConfig sae_config_from_json(const nlohmann::json& j, SaeConfig c) {
  c.d_model = j.value("d_model", c.d_model);
  c.d_bottleneck = j.value("d_bottleneck", c.d_bottleneck);
  c.lambda = j.value("lambda", c.lambda);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.alpha = j.value("alpha", c.alpha);
  c.epsilon_margin = j.value("epsilon_margin", c.epsilon_margin);
  c.eval_max_examples = j.value("eval_max_examples", c.eval_max_examples);
  return c;
}

SaeModel init_sae(const SaeConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  const std::size_t m = config.d_bottleneck;
  Rng rng(config.seed);
  SaeModel model;
  model.W_D = Matrix(d, m);
  for (double& w : model.W_D.flat()) w = rng.gaussian();
  renormalize_decoder(model);
  model.W_E = model.W_D.transposed();
  model.b.assign(d, 0.0);
  model.b_E.assign(m, 0.0);
  return model;
}

std::vector<double> encode(const SaeModel& model, std::span<const double> h) {
  require(h.size() == model.d_model(), "encode: dimension mismatch");
  std::vector<double> z(model.d_bottleneck());
  for (std::size_t j = 0; j < z.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += model.W_E(j, i) * (h[i] - model.b[i]);
    z[j] = std::max(acc + model.b_E[j], 0.0);
  }
  return z;
}

std::vector<double> decode(const SaeModel& model, std::span<const double> z) {
  require(z.size() == model.d_bottleneck(), "decode: dimension mismatch");
  std::vector<double> h(model.d_model());
  for (std::size_t i = 0; i < h.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) acc += model.W_D(i, j) * z[j];
    h[i] = acc + model.b[i];
  }
  return h;
}

double sae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& z, double lambda) {
  require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols() && z.rows() == x.rows(),
          "sae_loss: shape mismatch");
  double l1 = 0.0;
  for (double v : z.flat()) l1 += std::abs(v);
  return kernels::squared_error(x, x_hat) + lambda * l1;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Slot-matched mean cosine between example groups `a_rows` and `b_rows` of Z,
// where row (e, s) of Z is e * n_slots + s. When `grad` is given, adds
// weight * dCS/dZ into it.
double slot_cs(const Matrix& Z, std::size_t n_slots, std::span<const std::size_t> a_examples,
               std::span<const std::size_t> b_examples, bool skip_degenerate,
               Matrix* grad, double weight) {
  const std::size_t m = Z.cols();
  double total = 0.0;
  std::vector<std::size_t> va, vb;
  for (std::size_t s = 0; s < n_slots; ++s) {
    auto valid_rows = [&](std::span<const std::size_t> examples, std::vector<std::size_t>& out) {
      out.clear();
      for (std::size_t e : examples) {
        const std::size_t r = e * n_slots + s;
        if (norm(Z.row(r)) == 0.0) {
          if (skip_degenerate) continue;
          fail("degenerate vector: zero-norm code vector in cosine similarity");
        }
        out.push_back(r);
      }
    };
    valid_rows(a_examples, va);
    valid_rows(b_examples, vb);
    if (va.empty() || vb.empty()) continue;

    const double inv_count = 1.0 / static_cast<double>(va.size() * vb.size());
    const double coef = weight * inv_count / static_cast<double>(n_slots);
    double sum = 0.0;
    for (std::size_t ra : va) {
      const auto za = Z.row(ra);
      const double na = norm(za);
      for (std::size_t rb : vb) {
        const auto zb = Z.row(rb);
        const double nb = norm(zb);
        double dot = 0.0;
        for (std::size_t k = 0; k < m; ++k) dot += za[k] * zb[k];
        const double c = dot / (na * nb);
        sum += c;
        if (grad && ra != rb) {
          auto ga = grad->row(ra);
          auto gb = grad->row(rb);
          for (std::size_t k = 0; k < m; ++k) {
            ga[k] += coef * (zb[k] / (na * nb) - c * za[k] / (na * na));
            gb[k] += coef * (za[k] / (na * nb) - c * zb[k] / (nb * nb));
          }
        }
      }
    }
    total += sum * inv_count;
  }
  return total / static_cast<double>(n_slots);
}

struct ContrastiveTerm {
  double loss = 0.0;
};

// L_cont on rows of Z, adding weight * dL/dZ into grad when given.
ContrastiveTerm contrastive_on_rows(const Matrix& Z, std::size_t n_slots,
                                    std::span<const std::size_t> pos,
                                    std::span<const std::size_t> neg, double margin,
                                    bool skip_degenerate, Matrix* grad, double weight) {
  const double cs_pn = slot_cs(Z, n_slots, pos, neg, skip_degenerate, grad, weight);
  const double cs_pp = slot_cs(Z, n_slots, pos, pos, skip_degenerate, nullptr, 0.0);
  const double cs_nn = slot_cs(Z, n_slots, neg, neg, skip_degenerate, nullptr, 0.0);
  const double hinge = margin - 0.5 * cs_pp - 0.5 * cs_nn;
  if (hinge > 0.0 && grad) {
    slot_cs(Z, n_slots, pos, pos, skip_degenerate, grad, -0.5 * weight);
    slot_cs(Z, n_slots, neg, neg, skip_degenerate, grad, -0.5 * weight);
  }
  return {cs_pn + std::max(0.0, hinge)};
}

// Stacks P then N into one Z matrix so the row-based routines apply.
Matrix stack(const SlotBatch& P, const SlotBatch& N) {
  Matrix Z(P.n_examples * P.n_slots + N.n_examples * N.n_slots, P.dim);
  std::copy(P.values.begin(), P.values.end(), Z.data());
  std::copy(N.values.begin(), N.values.end(), Z.data() + P.values.size());
  return Z;
}

void check_pair(const SlotBatch& P, const SlotBatch& N) {
  require(P.n_examples >= 1 && N.n_examples >= 1, "contrastive: empty batch");
  require(P.n_slots == N.n_slots && P.dim == N.dim, "contrastive: slot/dim mismatch");
  require(P.values.size() == P.n_examples * P.n_slots * P.dim &&
              N.values.size() == N.n_examples * N.n_slots * N.dim,
          "contrastive: value count mismatch");
}

std::vector<std::size_t> iota(std::size_t first, std::size_t count) {
  std::vector<std::size_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = first + i;
  return v;
}

}  // namespace

double slot_cosine_similarity(const SlotBatch& A, const SlotBatch& B) {
  check_pair(A, B);
  const Matrix Z = stack(A, B);
  const auto a = iota(0, A.n_examples);
  const auto b = iota(A.n_examples, B.n_examples);
  return slot_cs(Z, A.n_slots, a, b, false, nullptr, 0.0);
}

double contrastive_loss(const SlotBatch& P, const SlotBatch& N, double epsilon_margin) {
  check_pair(P, N);
  const Matrix Z = stack(P, N);
  const auto pos = iota(0, P.n_examples);
  const auto neg = iota(P.n_examples, N.n_examples);
  return contrastive_on_rows(Z, P.n_slots, pos, neg, epsilon_margin, false, nullptr, 0.0).loss;
}

Matrix project_decoder_gradient(const SaeModel& model, const Matrix& grad_W_D) {
  require(grad_W_D.rows() == model.W_D.rows() && grad_W_D.cols() == model.W_D.cols(),
          "project_decoder_gradient: shape mismatch");
  Matrix out = grad_W_D;
  const std::size_t d = model.W_D.rows();
  for (std::size_t j = 0; j < model.W_D.cols(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += grad_W_D(i, j) * model.W_D(i, j);
    for (std::size_t i = 0; i < d; ++i) out(i, j) -= dot * model.W_D(i, j);
  }
  return out;
}

void renormalize_decoder(SaeModel& model) {
  const std::size_t d = model.W_D.rows();
  for (std::size_t j = 0; j < model.W_D.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += model.W_D(i, j) * model.W_D(i, j);
    require(s > 0.0 && std::isfinite(s), "degenerate dictionary vector in column " +
                                             std::to_string(j));
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < d; ++i) model.W_D(i, j) *= inv;
  }
}

SaeModel renormalized(SaeModel model) {
  renormalize_decoder(model);
  return model;
}

TrainingBatch make_batch(const ActivationSet& set) {
  TrainingBatch batch;
  batch.n_heads = set.n_heads();
  batch.x = Matrix(set.n_examples() * set.n_heads(), set.d_model());
  const auto data = set.data();
  std::copy(data.begin(), data.end(), batch.x.data());
  batch.example_labels.assign(set.labels().begin(), set.labels().end());
  return batch;
}

namespace {

struct Forward {
  Matrix pre, Z, Xhat;
};

Forward forward(const SaeModel& model, const Matrix& X) {
  Forward f;
  kernels::encode_rows(X, model.W_E, model.b, model.b_E, f.pre, f.Z);
  kernels::decode_rows(f.Z, model.W_D, model.b, f.Xhat);
  return f;
}

void label_groups(const TrainingBatch& batch, std::vector<std::size_t>& pos,
                  std::vector<std::size_t>& neg) {
  for (std::size_t e = 0; e < batch.example_labels.size(); ++e)
    (batch.example_labels[e] == Label::positive ? pos : neg).push_back(e);
  require(!pos.empty() && !neg.empty(),
          "contrastive term needs positive and negative training examples");
}

}  // namespace

double sae_objective(const SaeModel& model, const TrainingBatch& batch,
                     const SaeConfig& config) {
  const Forward f = forward(model, batch.x);
  double loss = sae_loss(batch.x, f.Xhat, f.Z, config.lambda);
  if (config.alpha > 0.0) {
    std::vector<std::size_t> pos, neg;
    label_groups(batch, pos, neg);
    loss += config.alpha *
            contrastive_on_rows(f.Z, batch.n_heads, pos, neg, config.epsilon_margin, true,
                                nullptr, 0.0)
                .loss;
  }
  return loss;
}

SaeGradients sae_gradients(const SaeModel& model, const TrainingBatch& batch,
                           const SaeConfig& config) {
  const Matrix& X = batch.x;
  const std::size_t rows = X.rows();
  const std::size_t d = model.d_model();
  const std::size_t m = model.d_bottleneck();
  require(X.cols() == d, "sae_gradients: batch dimension mismatch");

  Forward f = forward(model, X);
  SaeGradients g;
  g.loss = sae_loss(X, f.Xhat, f.Z, config.lambda);

  // dL/dXhat = 2 (Xhat - X)
  Matrix R2(rows, d);
  for (std::size_t k = 0; k < R2.size(); ++k) R2.data()[k] = 2.0 * (f.Xhat.data()[k] - X.data()[k]);

  kernels::outer_accumulate(R2, f.Z, g.W_D);
  std::vector<double> db_dec(d);
  kernels::column_sums(R2, db_dec);

  Matrix dZ;
  kernels::backprop_codes(R2, model.W_D, dZ);
  if (config.alpha > 0.0) {
    std::vector<std::size_t> pos, neg;
    label_groups(batch, pos, neg);
    g.loss += config.alpha * contrastive_on_rows(f.Z, batch.n_heads, pos, neg,
                                                 config.epsilon_margin, true, &dZ,
                                                 config.alpha)
                                 .loss;
  }

  // Through the ReLU; the L1 term contributes lambda on the active side.
  Matrix& dpre = dZ;
  for (std::size_t k = 0; k < dpre.size(); ++k)
    dpre.data()[k] = f.pre.data()[k] > 0.0 ? dpre.data()[k] + config.lambda : 0.0;

  Matrix Xc(rows, d);
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t i = 0; i < d; ++i) Xc(n, i) = X(n, i) - model.b[i];
  kernels::outer_accumulate(dpre, Xc, g.W_E);

  g.b_E.assign(m, 0.0);
  kernels::column_sums(dpre, g.b_E);

  g.b = db_dec;
  for (std::size_t j = 0; j < m; ++j) {
    const double s = g.b_E[j];
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < d; ++i) g.b[i] -= model.W_E(j, i) * s;
  }
  return g;
}

namespace {

struct AdamSlot {
  std::vector<double> m, v;
  explicit AdamSlot(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::span<double> param, std::span<const double> grad, std::size_t t,
            const SaeConfig& c) {
    const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t));
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(param.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(k);
      m[i] = c.adam_beta1 * m[i] + (1.0 - c.adam_beta1) * grad[i];
      v[i] = c.adam_beta2 * v[i] + (1.0 - c.adam_beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.adam_eps);
    }
  }
};

TrainingBatch eval_sample(const ActivationSet& eval, std::size_t cap) {
  const std::size_t n = eval.n_examples();
  if (cap == 0 || n <= cap) return make_batch(eval);
  std::vector<std::size_t> idx(cap);
  for (std::size_t k = 0; k < cap; ++k) idx[k] = k * n / cap;
  return make_batch(eval.subset(idx));
}

void check_finite(double loss, std::size_t epoch) {
  if (!std::isfinite(loss))
    fail("divergence: non-finite training loss at epoch " + std::to_string(epoch));
}

}  // namespace

TrainResult train_sae(const SaeConfig& config, const ActivationSet& train,
                      const ActivationSet& eval, const StepObserver& observer) {
  config.validate();
  require(train.n_examples() >= 1, "train_sae: empty training set");
  require(train.d_model() == config.d_model, "train_sae: d_model mismatch with config");
  require(eval.n_examples() == 0 || eval.d_model() == config.d_model,
          "train_sae: eval d_model mismatch");

  const auto start = std::chrono::steady_clock::now();
  const TrainingBatch batch = make_batch(train);
  const bool have_eval = eval.n_examples() > 0;
  const TrainingBatch eval_batch = have_eval ? eval_sample(eval, config.eval_max_examples)
                                             : TrainingBatch{};
  SaeConfig eval_config = config;
  eval_config.alpha = 0.0;

  SaeModel model = init_sae(config);
  AdamSlot s_WE(model.W_E.size()), s_WD(model.W_D.size()), s_b(model.b.size()),
      s_bE(model.b_E.size());

  TrainReport report;
  report.train_loss.reserve(config.epochs);
  double best_eval = 0.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    SaeGradients g = sae_gradients(model, batch, config);
    check_finite(g.loss, epoch);
    if (epoch == 0)
      report.initial_train_loss = g.loss;
    else
      report.train_loss.push_back(g.loss);

    const Matrix gWD = project_decoder_gradient(model, g.W_D);
    const std::size_t t = epoch + 1;
    s_WE.step(model.W_E.flat(), g.W_E.flat(), t, config);
    s_WD.step(model.W_D.flat(), gWD.flat(), t, config);
    s_b.step(model.b, g.b, t, config);
    s_bE.step(model.b_E, g.b_E, t, config);
    renormalize_decoder(model);
    if (observer) observer(t, model);

    if (have_eval) {
      const double e = sae_objective(model, eval_batch, eval_config);
      check_finite(e, epoch);
      report.eval_loss.push_back(e);
      if (epoch == 0 || e < best_eval) {
        best_eval = e;
        report.best_eval_epoch = epoch;
      }
    }
  }
  const double final_loss = sae_objective(model, batch, config);
  check_finite(final_loss, config.epochs);
  report.train_loss.push_back(final_loss);

  report.snapshot_id = snapshot_id(model);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

nlohmann::json to_json(const TrainReport& r) {
  return {{"initial_train_loss", r.initial_train_loss},
          {"train_loss", r.train_loss},
          {"eval_loss", r.eval_loss},
          {"best_eval_epoch", r.best_eval_epoch},
          {"snapshot_id", r.snapshot_id}};
}

Matrix encode_set(const SaeModel& model, const ActivationSet& set) {
  require(set.d_model() == model.d_model(), "encode_set: d_model mismatch");
  const TrainingBatch batch = make_batch(set);
  Matrix pre, Z;
  kernels::encode_rows(batch.x, model.W_E, model.b, model.b_E, pre, Z);
  return Z;
}

namespace {

void put_params(std::string& out, const SaeModel& model) {
  io::put_f32s(out, model.W_E.flat());
  io::put_f32s(out, model.W_D.flat());
  io::put_f32s(out, std::span<const double>(model.b));
  io::put_f32s(out, std::span<const double>(model.b_E));
}

}  // namespace

std::string snapshot_id(const SaeModel& model) {
  std::string bytes;
  put_params(bytes, model);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string encode_sae_file(const SaeModel& model, const SaeConfig& config) {
  nlohmann::json header = {{"d_model", model.d_model()},
                           {"d_bottleneck", model.d_bottleneck()},
                           {"config", to_json(config)}};
  std::string out;
  io::put_framed_header(out, "SAE1", header);
  put_params(out, model);
  return out;
}

SaeModel decode_sae_file(std::string_view bytes, SaeConfig* config_out) {
  io::ByteCursor cur(bytes);
  const auto header = io::take_framed_header(cur, "SAE1");
  std::size_t d = 0, m = 0;
  try {
    d = header.at("d_model").get<std::size_t>();
    m = header.at("d_bottleneck").get<std::size_t>();
    if (config_out) *config_out = sae_config_from_json(header.value("config", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed SAE1 header: ") + e.what());
  }
  require(d >= 1 && m >= 1, "SAE1: empty dimensions");
  require(cur.remaining() == 4 * (2 * d * m + d + m), "payload length mismatch in SAE1 file");
  SaeModel model;
  model.W_E = Matrix(m, d);
  model.W_D = Matrix(d, m);
  model.b.resize(d);
  model.b_E.resize(m);
  cur.f32s(model.W_E.flat());
  cur.f32s(model.W_D.flat());
  cur.f32s(std::span<double>(model.b));
  cur.f32s(std::span<double>(model.b_E));
  return model;
}

void write_sae_file(const SaeModel& model, const SaeConfig& config,
                    const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_sae_file(model, config));
}

SaeModel read_sae_file(const std::filesystem::path& path, SaeConfig* config_out) {
  return decode_sae_file(io::read_file(path), config_out);
}

}  // namespace sc

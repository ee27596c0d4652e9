#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "sc/codebook.hpp"
#include "sc/error.hpp"

using namespace sc;

namespace {

CodeMatrix make(std::size_t heads, std::size_t codes, std::vector<std::uint32_t> c,
                std::vector<Label> labels) {
  return CodeMatrix(heads, codes, std::move(c), std::move(labels));
}

// Same matrix with code values permuted and example rows reordered.
CodeMatrix relabel_and_shuffle(const CodeMatrix& cm, std::mt19937_64& g) {
  std::vector<std::uint32_t> perm(cm.n_codes());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), g);
  std::vector<std::size_t> order(cm.n_examples());
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), g);
  std::vector<std::uint32_t> codes;
  std::vector<Label> labels;
  for (auto e : order) {
    labels.push_back(cm.label(e));
    for (std::size_t h = 0; h < cm.n_heads(); ++h) codes.push_back(perm[cm.code(e, h)]);
  }
  return CodeMatrix(cm.n_heads(), cm.n_codes(), codes, labels);
}

}  // namespace

TEST_CASE("discretize tie-break and degenerate rows") {
  Matrix z(2, 3);
  z(0, 0) = 0.1;
  z(0, 1) = 0.9;
  z(0, 2) = 0.9;
  const CodeMatrix cm = discretize(z, 1, std::vector<Label>{Label::positive, Label::negative});
  CHECK(cm.code(0, 0) == 1);
  CHECK(cm.code(1, 0) == 0);
  CHECK(cm.n_codes() == 3);

  const CodeMatrix s =
      discretize(z, 1, std::vector<Label>{Label::positive, Label::negative}, {true});
  CHECK(s.code(1, 0) == 3);
  CHECK(s.sentinel() == std::optional<std::uint32_t>(3));
  CHECK_FALSE(s.counts(3));

  CHECK_THROWS_AS(discretize(z, 3, std::vector<Label>{Label::positive}), Error);
  CHECK_THROWS_AS(discretize(z, 1, std::vector<Label>{Label::positive}), Error);
}

TEST_CASE("discretize matches a scalar argmax") {
  std::mt19937_64 g(41);
  for (int t = 0; t < 20; ++t) {
    const std::size_t E = 2 + g() % 6, H = 1 + g() % 4, M = 1 + g() % 9;
    Matrix z = oracle::random_matrix(g, E * H, M, 0, 1);
    for (double& x : z.flat()) x = std::round(x * 4) / 4;  // force ties
    std::vector<Label> labels(E, Label::positive);
    labels[0] = Label::negative;
    const CodeMatrix cm = discretize(z, H, labels);
    for (std::size_t e = 0; e < E; ++e)
      for (std::size_t h = 0; h < H; ++h) CHECK(cm.code(e, h) == oracle::argmax(z.row(e * H + h)));
  }
}

TEST_CASE("node score hand cases") {
  // positives {3, 7}, negatives {7}
  const CodeMatrix cm = make(1, 8, {3, 7, 7}, {Label::positive, Label::positive, Label::negative});
  CHECK(node_scores(cm, false) == std::vector<double>{1});
  CHECK(node_scores(cm, true) == std::vector<double>{0.5});

  const CodeMatrix sub = make(1, 8, {3, 3, 7}, {Label::positive, Label::negative, Label::negative});
  CHECK(node_scores(sub, false) == std::vector<double>{0});
  CHECK(node_scores(sub, true) == std::vector<double>{0});

  // A sentinel code never counts.
  const CodeMatrix dead(1, 9, {8, 3, 7}, {Label::positive, Label::positive, Label::negative}, 8u);
  CHECK(node_scores(dead, false) == std::vector<double>{1});
  CHECK(node_scores(dead, true) == std::vector<double>{0.5});

  CHECK_THROWS(node_scores(make(1, 2, {0, 1}, {Label::positive, Label::positive}), false));
}

TEST_CASE("softmax scores") {
  const std::vector<HeadIndex> hm = square_head_map(1, 4);
  const HeadScores u = softmax_scores(std::vector<double>{0, 0, 0, 0}, SoftmaxMode::across_heads, hm);
  for (double x : u.normalized) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));

  std::mt19937_64 g(42);
  const auto hm6 = square_head_map(2, 3);
  for (int t = 0; t < 20; ++t) {
    const auto raw = oracle::random_vector(g, 6, 0, 10);
    auto shifted = raw;
    for (double& x : shifted) x += 17.5;
    const auto a = softmax_scores(raw, SoftmaxMode::across_heads, hm6);
    const auto b = softmax_scores(shifted, SoftmaxMode::across_heads, hm6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(a.normalized[i] == doctest::Approx(b.normalized[i]).epsilon(1e-12));
      CHECK(a.normalized[i] > 0);
      for (std::size_t j = 0; j < 6; ++j)
        if (raw[i] < raw[j]) CHECK(a.normalized[i] < a.normalized[j]);
    }
    CHECK(std::accumulate(a.normalized.begin(), a.normalized.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));

    const auto l = softmax_scores(raw, SoftmaxMode::per_layer, hm6);
    CHECK(l.normalized[0] + l.normalized[1] + l.normalized[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l.normalized[3] + l.normalized[4] + l.normalized[5] == doctest::Approx(1.0).epsilon(1e-12));
  }

  const HeadScores s = softmax_scores(std::vector<double>{1, 2, 3}, SoftmaxMode::per_layer,
                                      square_head_map(1, 3), ScoreMethod::edge);
  const HeadScores back = head_scores_from_json(to_json(s));
  CHECK(back.raw == s.raw);
  CHECK(back.normalized == s.normalized);
  CHECK(back.method == ScoreMethod::edge);
  CHECK(back.mode == SoftmaxMode::per_layer);
  CHECK(parse_method("norm-diff") == ScoreMethod::norm_diff);
  CHECK(to_string(ScoreMethod::norm_diff) == "norm-diff");
  CHECK(parse_softmax_mode("layer") == SoftmaxMode::per_layer);
  CHECK_THROWS(parse_method("nodes"));
}

TEST_CASE("co-occurrence hand cases") {
  const CodeMatrix one = make(2, 10, {5, 9, 1, 1}, {Label::positive, Label::negative});
  const CoocCounts c = build_cooccurrence(one, Label::positive);
  REQUIRE(c.counts.size() == 1);
  CHECK(c.counts.begin()->first == CoocKey{0, 1, 5, 9});
  CHECK(c.counts.begin()->second == 1);

  const CodeMatrix two = make(3, 4, {1, 2, 3, 1, 2, 3, 0, 0, 0},
                              {Label::positive, Label::positive, Label::negative});
  const CoocCounts d = build_cooccurrence(two, Label::positive);
  CHECK(d.counts.size() == 3);
  for (const auto& [k, v] : d.counts) CHECK(v == 2);

  const auto j = to_json(d);
  CHECK(j["counts"].contains("0,1,1,2"));

  CHECK_THROWS(build_cooccurrence(make(2, 2, {0, 1}, {Label::positive}), Label::negative));
}

TEST_CASE("co-occurrence is additive over example sets") {
  std::mt19937_64 g(43);
  for (int t = 0; t < 20; ++t) {
    const CodeMatrix a = oracle::random_code_matrix(g);
    std::vector<std::uint32_t> codes(a.codes().begin(), a.codes().end());
    std::vector<Label> labels(a.labels().begin(), a.labels().end());
    const CodeMatrix b = CodeMatrix(a.n_heads(), a.n_codes(), codes, labels);
    codes.insert(codes.end(), codes.begin(), codes.end());
    labels.insert(labels.end(), labels.begin(), labels.end());
    const CodeMatrix both(a.n_heads(), a.n_codes(), codes, labels);
    CoocCounts merged = build_cooccurrence(a, Label::positive);
    merge_into(merged, build_cooccurrence(b, Label::positive));
    CHECK(merged.counts == build_cooccurrence(both, Label::positive).counts);
  }
}

TEST_CASE("edge score hand cases") {
  const CodeMatrix cm = make(2, 10, {5, 9, 5, 3}, {Label::positive, Label::negative});
  const auto plus = build_cooccurrence(cm, Label::positive);
  const auto minus = build_cooccurrence(cm, Label::negative);
  const EdgeScores e = edge_scores(plus, minus, 1, 2);
  CHECK(e.pair_score(0, 1) == 1);
  CHECK(e.u == std::vector<double>{1, 1});
  CHECK(e.k_used == 1);
  CHECK_FALSE(e.clamped);

  // Every positive key also seen on negatives: U is zero, the tie-break
  // still picks the first pairs.
  const CodeMatrix same = make(3, 4, {1, 2, 3, 1, 2, 3}, {Label::positive, Label::negative});
  const EdgeScores z = edge_scores(build_cooccurrence(same, Label::positive),
                                   build_cooccurrence(same, Label::negative), 1, 3);
  CHECK(z.u == std::vector<double>{1, 1, 0});
  CHECK(z.top_pairs.front() == std::pair<std::size_t, std::size_t>{0, 1});

  const EdgeScores clamp = edge_scores(plus, minus, 5, 2);
  CHECK(clamp.clamped);
  CHECK(clamp.k_used == 1);
  CHECK(pair_count(144) == 10296);
  CHECK(default_k(144) == 5148);
  CHECK(default_k(2) == 1);
}

TEST_CASE("entropy hand cases") {
  // heads 0,1: one code pair five times
  std::vector<std::uint32_t> codes;
  std::vector<Label> labels;
  for (int i = 0; i < 5; ++i) {
    codes.insert(codes.end(), {2, 3});
    labels.push_back(Label::positive);
  }
  codes.insert(codes.end(), {0, 0});
  labels.push_back(Label::negative);
  const CodeMatrix point = make(2, 4, codes, labels);
  CHECK(entropy_edge_scores(build_cooccurrence(point, Label::positive), 2)(0, 1) == 0.0);

  const CodeMatrix two = make(2, 4, {1, 2, 3, 0, 0, 0},
                              {Label::positive, Label::positive, Label::negative});
  const Matrix H = entropy_edge_scores(build_cooccurrence(two, Label::positive), 2);
  CHECK(H(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(H(1, 0) == H(0, 1));
  CHECK(H(0, 0) == 0.0);
}

TEST_CASE("scores match brute-force oracles and are invariant to relabeling") {
  std::mt19937_64 g(44);
  for (int t = 0; t < 50; ++t) {
    const CodeMatrix cm = oracle::random_code_matrix(g);
    const std::size_t H = cm.n_heads();
    const std::size_t k = 1 + g() % pair_count(H);
    CHECK(node_scores(cm, false) == oracle::node_scores(cm, false));
    CHECK(node_scores(cm, true) == oracle::node_scores(cm, true));
    const auto plus = build_cooccurrence(cm, Label::positive);
    const auto minus = build_cooccurrence(cm, Label::negative);
    CHECK(oracle::as_map(plus) == oracle::cooccurrence(cm, Label::positive));
    CHECK(oracle::as_map(minus) == oracle::cooccurrence(cm, Label::negative));
    CHECK(edge_scores(plus, minus, k, H).u == oracle::edge_scores(cm, k));
    CHECK(edge_scores(plus, minus, k, H, true).u == oracle::edge_scores(cm, k, true));
    const Matrix ent = entropy_edge_scores(plus, H);
    const Matrix ento = oracle::entropy(cm);
    for (std::size_t i = 0; i < ent.size(); ++i)
      CHECK(std::abs(ent.flat()[i] - ento.flat()[i]) <= 1e-10);

    const CodeMatrix moved = relabel_and_shuffle(cm, g);
    CHECK(node_scores(moved, false) == node_scores(cm, false));
    CHECK(node_scores(moved, true) == node_scores(cm, true));
    CHECK(edge_scores(build_cooccurrence(moved, Label::positive),
                      build_cooccurrence(moved, Label::negative), k, H)
              .u == edge_scores(plus, minus, k, H).u);

    for (double u : node_scores(cm, false))
      CHECK(u <= static_cast<double>(std::count(cm.labels().begin(), cm.labels().end(), Label::positive)));
    for (double u : node_scores(cm, true)) CHECK(u <= 1.0);
  }
}

TEST_CASE("norm-difference baseline") {
  const ActivationSet hand(2, 2, 2, {1, 0, 5, 5, 0, 0, 5, 5}, {Label::positive, Label::negative},
                           square_head_map(1, 2));
  const auto u = norm_diff_baseline(hand);
  CHECK(u[0] == 1.0);
  CHECK(u[1] == 0.0);

  std::mt19937_64 g(45);
  for (int t = 0; t < 10; ++t) {
    const std::size_t E = 4 + g() % 8, H = 1 + g() % 4, d = 1 + g() % 6;
    std::vector<float> data(E * H * d);
    std::normal_distribution<float> nd;
    for (auto& x : data) x = nd(g);
    std::vector<Label> labels(E);
    for (std::size_t e = 0; e < E; ++e) labels[e] = e % 3 ? Label::negative : Label::positive;
    const ActivationSet s(E, H, d, data, labels, square_head_map(1, static_cast<int>(H)));
    const auto a = norm_diff_baseline(s);
    const auto o = oracle::norm_diff(s);
    for (std::size_t h = 0; h < H; ++h) CHECK(std::abs(a[h] - o[h]) <= 1e-10);
  }
}

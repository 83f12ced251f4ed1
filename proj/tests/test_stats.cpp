#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <sstream>

#include "cvnn/stats.hpp"
#include "oracles.hpp"

using namespace cvnn;

namespace {

std::vector<double> tied_sequence(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, int(n / 2));
  std::vector<double> v(n);
  for (auto& x : v) x = 0.5 * level(rng);
  return v;
}

std::vector<double> untied_sequence(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

bool has_variance(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; });
}

}  // namespace

TEST(ExcessRisk, Examples) {
  EXPECT_DOUBLE_EQ(excess_risk(1.0, 0.9), 0.1);
  EXPECT_EQ(excess_risk(0.7, 0.7), 0.0);
  EXPECT_THROW(excess_risk(1.1, 0.5), DomainError);
}

TEST(Midranks, AveragesTies) {
  const std::vector<double> v = {10, 20, 20, 5, 20};
  EXPECT_EQ(midranks(v), (std::vector<double>{2, 4, 4, 1, 4}));
  EXPECT_EQ(midranks(v), oracle::counting_ranks(v));
}

TEST(Spearman, PerfectMonotone) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<double> y = {-3, 0, 0.5, 7, 8, 100};
  std::vector<double> rev(x.rbegin(), x.rend());
  EXPECT_EQ(spearman(x, y).scc, 1.0);
  EXPECT_EQ(spearman(x, rev).scc, -1.0);
  std::vector<double> big(40), big_y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    big[i] = double(i);
    big_y[i] = std::exp(0.1 * double(i));
  }
  const auto r = spearman(big, big_y);
  EXPECT_EQ(r.scc, 1.0);
  EXPECT_EQ(r.method, PValueMethod::StudentT);
}

TEST(Spearman, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<std::size_t> len(3, 40);
  int checked = 0;
  while (checked < 100) {
    const std::size_t n = len(rng);
    const auto x = tied_sequence(n, rng);
    const auto y = tied_sequence(n, rng);
    if (!has_variance(x) || !has_variance(y)) continue;
    EXPECT_LE(std::abs(spearman(x, y).scc - oracle::spearman_bruteforce(x, y)), 1e-12);
    ++checked;
  }
}

TEST(Spearman, ExactPValueMatchesEnumeration) {
  std::mt19937_64 rng(62);
  for (std::size_t n = 3; n <= 7; ++n) {
    for (int t = 0; t < 12; ++t) {
      const auto x = t % 2 ? tied_sequence(n, rng) : untied_sequence(n, rng);
      const auto y = t % 3 ? tied_sequence(n, rng) : untied_sequence(n, rng);
      if (!has_variance(x) || !has_variance(y)) continue;
      const auto r = spearman(x, y);
      EXPECT_EQ(r.method, PValueMethod::ExactPermutation);
      EXPECT_LE(std::abs(r.p - oracle::permutation_p_enumerate(x, y)), 1e-12) << "n=" << n;
    }
  }
}

TEST(Spearman, ExactPValueOfPerfectOrder) {
  // Only the identity and the reversal reach |r| = 1 among n! orderings.
  std::vector<double> x(10), y(10);
  for (std::size_t i = 0; i < 10; ++i) x[i] = y[i] = double(i);
  EXPECT_NEAR(spearman(x, y).p, 2.0 / 3628800.0, 1e-20);
}

TEST(Spearman, SymmetricAndRankInvariant) {
  std::mt19937_64 rng(63);
  for (int t = 0; t < 20; ++t) {
    const auto x = untied_sequence(25, rng);
    const auto y = tied_sequence(25, rng);
    const auto a = spearman(x, y);
    const auto b = spearman(y, x);
    EXPECT_EQ(a.scc, b.scc);
    EXPECT_EQ(a.p, b.p);
    std::vector<double> tx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) tx[i] = std::exp(x[i]) * 3 + std::pow(x[i], 3);
    EXPECT_EQ(spearman(tx, y).scc, a.scc);
  }
}

TEST(Spearman, ExactAndTApproximationOverlapAtFifteen) {
  std::mt19937_64 rng(64);
  for (int t = 0; t < 10; ++t) {
    const auto x = untied_sequence(15, rng);
    const auto y = untied_sequence(15, rng);
    const auto r = spearman(x, y);
    EXPECT_LE(std::abs(r.p - detail::student_t_p(r.scc, 15)), 0.02) << "scc=" << r.scc;
  }
}

TEST(Spearman, PDecreasesWithN) {
  double prev = 1.0;
  for (std::size_t n = 20; n <= 200; n += 20) {
    const double p = detail::student_t_p(0.4, n);
    EXPECT_LT(p, prev);
    prev = p;
  }
  // Same local pattern (adjacent pairs swapped) at growing n, exact regime.
  prev = 1.0;
  for (std::size_t n = 6; n <= 18; n += 4) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = double(i);
      y[i] = double(i ^ 1);
    }
    const double p = spearman(x, y).p;
    EXPECT_LT(p, prev) << n;
    prev = p;
  }
}

TEST(Spearman, ExactAtLargestSmallN) {
  std::mt19937_64 rng(65);
  const auto x = untied_sequence(19, rng);
  const auto y = tied_sequence(19, rng);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = spearman(x, y);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.method, PValueMethod::ExactPermutation);
  EXPECT_GT(r.p, 0.0);
  EXPECT_LE(r.p, 1.0);
  EXPECT_LT(secs, 30.0);
}

TEST(Spearman, NullCalibration) {
  std::mt19937_64 rng(66);
  std::vector<double> x(50);
  for (std::size_t i = 0; i < 50; ++i) x[i] = double(i);
  double total = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> y = x;
    std::shuffle(y.begin(), y.end(), rng);
    total += std::abs(spearman(x, y).scc);
  }
  EXPECT_LT(total / 100.0, 0.3);
}

TEST(Spearman, Errors) {
  const std::vector<double> c = {1, 1, 1, 1};
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_THROW(spearman(c, v), UndefinedCorrelation);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(spearman(v, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Trace, FormatAndParseRoundTrip) {
  TrainingTrace t;
  for (std::size_t e = 1; e <= 4; ++e) {
    TraceRow r;
    r.epoch = e;
    r.train_loss = 1.0 / double(e);
    r.train_acc = 0.5 + 0.1 * double(e);
    r.test_acc = 0.45 + 0.1 * double(e);
    r.excess_risk = *r.train_acc - *r.test_acc;
    r.sn_product = 3.0 * double(e) + 0.1;
    if (e != 2) r.r_a = 7.25 * double(e);
    r.layer_norms = {1.5, 2.0 / 3.0};
    t.rows.push_back(r);
  }
  std::string text = std::string(kTraceHeader) + "\n";
  for (const auto& r : t.rows) text += format_trace_row(r) + "\n";
  std::istringstream in(text);
  const TrainingTrace back = parse_trace(in);
  ASSERT_EQ(back.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(format_trace_row(back.rows[i]), format_trace_row(t.rows[i]));
  EXPECT_FALSE(back.rows[1].r_a.has_value());
  EXPECT_EQ(back.rows[2].layer_norms[1], 2.0 / 3.0);
}

TEST(Trace, EmptyAccuraciesForRegression) {
  TraceRow r;
  r.epoch = 3;
  r.train_loss = 0.25;
  r.excess_risk = 0.125;
  r.sn_product = 2;
  r.layer_norms = {2};
  EXPECT_EQ(format_trace_row(r), "3,0.25,,,0.125,2,,2");
}

TEST(Trace, MalformedInputsRejected) {
  const std::string h = std::string(kTraceHeader) + "\n";
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_trace(in);
  };
  EXPECT_THROW(parse("epoch,loss\n"), FormatError);
  EXPECT_THROW(parse(h + "1,0.5,,,0.1,2,\n"), FormatError);
  EXPECT_THROW(parse(h + "1,0.5,,,abc,2,,\n"), FormatError);
  EXPECT_THROW(parse(h + "2,0.5,,,0.1,2,,\n1,0.5,,,0.1,2,,\n"), FormatError);
  EXPECT_THROW(load_trace("/nonexistent/trace.csv"), FormatError);
}

TEST(Trace, CorrelateIdenticalColumns) {
  TrainingTrace t;
  for (std::size_t e = 1; e <= 6; ++e) {
    TraceRow r;
    r.epoch = e;
    r.sn_product = r.excess_risk = std::sqrt(double(e));
    t.rows.push_back(r);
  }
  EXPECT_EQ(correlate_trace(t).scc, 1.0);
  t.rows.resize(2);
  EXPECT_THROW(correlate_trace(t), DomainError);
}

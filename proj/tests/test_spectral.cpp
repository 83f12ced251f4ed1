#include <gtest/gtest.h>

#include <random>

#include "cvnn/spectral.hpp"
#include "oracles.hpp"

using namespace cvnn;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<Complex> random_vec(std::size_t n, std::mt19937_64& rng) {
  return oracle::random_cmatrix(1, n, rng).storage();
}

Network identity_stack(std::size_t depth) {
  std::vector<LayerSpec> specs(depth, LayerSpec{layer::Dense{2, 2}, Activation::crelu()});
  specs.back().activation.reset();
  Network net({1, 1, 2}, specs);
  for (auto& l : net.layers()) l.weights = {1, 0, 0, 1};
  return net;
}

}  // namespace

TEST(LayerMatrix, PointwiseKernelIsScaledIdentity) {
  const Complex c(2, -1);
  const CMatrix m = conv_matrix({1, 1, 1, 1}, {1, 2, 2}, std::vector<Complex>{c});
  CMatrix expect = CMatrix::identity(4);
  for (auto& e : expect.storage()) e *= c;
  EXPECT_EQ(m, expect);
}

TEST(LayerMatrix, DeltaKernelIsSelection) {
  std::vector<Complex> k(9);
  k[0] = 1;
  const CMatrix m = conv_matrix({3, 3, 1, 1}, {1, 5, 5}, k);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    int ones = 0;
    for (const auto& v : m.row(r)) {
      if (v == Complex(1, 0)) ++ones;
      else EXPECT_EQ(v, Complex{});
    }
    EXPECT_EQ(ones, 1);
  }
}

TEST(LayerMatrix, MatchesDirectConvolution) {
  std::mt19937_64 rng(31);
  struct Case { std::size_t kh, kw, cin, cout, h, w; };
  for (const Case c : {Case{2, 2, 1, 1, 3, 3}, Case{3, 2, 2, 3, 6, 5}, Case{1, 1, 2, 2, 4, 4}}) {
    const auto kernel = random_vec(c.kh * c.kw * c.cin * c.cout, rng);
    const CMatrix m = conv_matrix({c.kh, c.kw, c.cin, c.cout}, {c.cin, c.h, c.w}, kernel);
    for (int t = 0; t < 20; ++t) {
      const auto x = random_vec(c.cin * c.h * c.w, rng);
      std::vector<Complex> y(m.rows());
      matvec<Complex>(m, x, y);
      const auto ref = oracle::direct_conv(kernel, c.kh, c.kw, c.cin, c.cout, c.h, c.w, x);
      ASSERT_EQ(y.size(), ref.size());
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_LE(std::abs(y[i] - ref[i]), 1e-12);
    }
  }
}

TEST(LayerMatrix, BudgetIsEnforced) {
  EXPECT_THROW(conv_matrix({3, 3, 1, 1}, {1, 12, 12}, std::vector<Complex>(9), 1024), BudgetExceeded);
}

TEST(ConvSpectralNorm, Examples) {
  EXPECT_NEAR(conv_spectral_norm({1, 1, 1, 1}, {1, 4, 4}, std::vector<Complex>{Complex(3, 4)}).value, 5.0, 1e-9);
  const auto z = conv_spectral_norm({3, 3, 1, 1}, {1, 5, 5}, std::vector<Complex>(9));
  EXPECT_EQ(z.value, 0.0);
}

TEST(ConvSpectralNorm, ImplicitMatchesLowered) {
  std::mt19937_64 rng(32);
  const ConvGeometry g{3, 3, 2, 2};
  const Shape in{2, 8, 8};
  const auto kernel = random_vec(g.kernel_size(), rng);
  const auto imp = conv_spectral_norm(g, in, kernel);
  EXPECT_TRUE(imp.converged);
  const CMatrix m = conv_matrix(g, in, kernel);
  EXPECT_LE(rel(imp.value, spectral_norm(m).value), 1e-8);
  EXPECT_LE(rel(imp.value, oracle::complex_sigma_max(m)), 1e-8);
}

TEST(TransposeTwoOneNorm, SumOfRowNorms) {
  EXPECT_DOUBLE_EQ(transpose_two_one_norm(CMatrix::identity(2)), 2.0);
  CMatrix a(2, 2);
  a(0, 0) = Complex(3, 0);
  a(0, 1) = Complex(0, 4);
  EXPECT_DOUBLE_EQ(transpose_two_one_norm(a), 5.0);
  std::mt19937_64 rng(33);
  const CMatrix r = oracle::random_cmatrix(4, 7, rng);
  EXPECT_LE(rel(transpose_two_one_norm(r), pq_norm(hermitian_transpose(r), 2, 1)), 1e-14);
}

TEST(Analyze, IdentityExamples) {
  const SpectralReport one = analyze(identity_stack(1));
  ASSERT_EQ(one.layers.size(), 1u);
  EXPECT_NEAR(one.layers[0].s, 1.0, 1e-12);
  EXPECT_EQ(*one.layers[0].b, 2.0);
  EXPECT_NEAR(*one.r_a, 2.0, 1e-12);
  EXPECT_FALSE(one.has_warnings());

  const SpectralReport two = analyze(identity_stack(2));
  EXPECT_NEAR(*two.r_a, 4.0 * std::sqrt(2.0), 1e-11);
  EXPECT_NEAR(two.sn_product, 1.0, 1e-12);
}

TEST(Analyze, ZeroNetwork) {
  Network net({1, 1, 3}, {{layer::Dense{3, 4}, Activation::split_tanh()}, {layer::Dense{4, 2}, {}}});
  const SpectralReport rep = analyze(net);
  EXPECT_EQ(rep.sn_product, 0.0);
  EXPECT_EQ(*rep.r_a, 0.0);
}

TEST(Analyze, DenseNormsMatchDirectComputation) {
  Network net({1, 1, 6}, {{layer::Dense{6, 5}, Activation::crelu()}, {layer::Dense{5, 3}, {}}});
  initialize_weights(net, 34);
  const SpectralReport rep = analyze(net);
  for (std::size_t i = 0; i < 2; ++i) {
    const CMatrix a = net.dense_matrix(i);
    PowerIterationOptions po;
    po.seed = i;
    EXPECT_EQ(rep.layers[i].s, spectral_norm(a, po).value);
    EXPECT_LE(rel(*rep.layers[i].b, pq_norm(hermitian_transpose(a), 2, 1)), 1e-12);
    EXPECT_LE(rel(rep.layers[i].s, oracle::complex_sigma_max(a)), 1e-8);
  }
  EXPECT_LE(rel(rep.sn_product, rep.layers[0].s * rep.layers[1].s), 1e-12);
}

TEST(Analyze, HomogeneityOfSpectralNorm) {
  Network net({1, 1, 5}, {{layer::Dense{5, 4}, Activation::split_tanh()}, {layer::Dense{4, 3}, {}}});
  initialize_weights(net, 35);
  const SpectralReport base = analyze(net);
  for (auto& w : net.layers()[1].weights) w *= 2.0;  // power-of-two scaling keeps every product exact
  const SpectralReport scaled = analyze(net);
  EXPECT_EQ(scaled.layers[1].s, 2.0 * base.layers[1].s);
  EXPECT_EQ(scaled.sn_product, 2.0 * base.sn_product);
  for (auto& w : net.layers()[1].weights) w *= 0.75;
  const SpectralReport odd = analyze(net);
  EXPECT_LE(rel(odd.sn_product, 1.5 * base.sn_product), 1e-12);
}

TEST(Analyze, ConvPoolHeadAndBudgetFallback) {
  Network net({1, 8, 8}, {{layer::Conv{3, 3, 1, 2}, Activation::crelu()},
                          {layer::MaxPoolModulus{}, {}},
                          {layer::Dense{18, 4}, {}},
                          {layer::AbsHead{4}, {}}});
  initialize_weights(net, 36);
  const SpectralReport full = analyze(net);
  ASSERT_EQ(full.layers.size(), 2u);
  EXPECT_EQ(full.layers[0].kind, "conv");
  EXPECT_TRUE(full.layers[0].b.has_value());
  EXPECT_TRUE(full.r_a.has_value());
  EXPECT_EQ(full.max_width, 72u);

  AnalyzeOptions tight;
  tight.lowering_budget_bytes = 1024;
  const SpectralReport partial = analyze(net, tight);
  EXPECT_TRUE(partial.sn_product_only);
  EXPECT_FALSE(partial.r_a.has_value());
  EXPECT_FALSE(partial.layers[0].b.has_value());
  EXPECT_EQ(partial.sn_product, full.sn_product);
  EXPECT_TRUE(partial.has_warnings());
}

TEST(Analyze, EmpiricalLipschitzFlags) {
  Network net({1, 1, 3}, {{layer::Dense{3, 3}, Activation::modrelu(-0.1)},
                          {layer::Dense{3, 3}, Activation::amplitude_tanh()},
                          {layer::Dense{3, 1}, {}}});
  initialize_weights(net, 37);
  AnalyzeOptions opt;
  opt.probe_pairs = 2000;
  const SpectralReport rep = analyze(net, opt);
  EXPECT_TRUE(rep.empirical_rho);
  EXPECT_TRUE(rep.layers[0].rho_empirical);
  EXPECT_TRUE(rep.layers[1].rho_empirical);
  opt.amplitude_tanh_alpha = 2.0;
  const SpectralReport declared = analyze(net, opt);
  EXPECT_FALSE(declared.layers[1].rho_empirical);
  EXPECT_EQ(declared.layers[1].rho, 5.0);
}

TEST(SpectralReportText, RoundTrip) {
  Network net({1, 6, 6}, {{layer::Conv{3, 3, 1, 2}, Activation::split_tanh()}, {layer::Dense{32, 3}, {}}});
  initialize_weights(net, 38);
  const SpectralReport rep = analyze(net);
  const std::string text = to_key_values(rep);
  const SpectralReport back = parse_spectral_report(text);
  EXPECT_EQ(to_key_values(back), text);
  EXPECT_EQ(back.sn_product, rep.sn_product);
  EXPECT_EQ(*back.r_a, *rep.r_a);
  EXPECT_EQ(back.layers[0].iterations, rep.layers[0].iterations);
  EXPECT_THROW(parse_spectral_report(text + "bogus = 1\n"), FormatError);
  EXPECT_THROW(parse_spectral_report("layers = 1\n"), FormatError);
}

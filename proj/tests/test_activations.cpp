#include <gtest/gtest.h>

#include <random>

#include "cvnn/activations.hpp"

using namespace cvnn;

namespace {

/// Central-difference Jacobian of the activation seen as R^2 -> R^2.
Jacobian2 numeric_jacobian(const Activation& a, Complex z, double h = 1e-6) {
  Jacobian2 j{};
  const Complex dx(h, 0.0), dy(0.0, h);
  const Complex fx = (apply(a, z + dx) - apply(a, z - dx)) / (2 * h);
  const Complex fy = (apply(a, z + dy) - apply(a, z - dy)) / (2 * h);
  j[0][0] = fx.real();
  j[1][0] = fx.imag();
  j[0][1] = fy.real();
  j[1][1] = fy.imag();
  return j;
}

}  // namespace

TEST(Activations, ValuesAtKnownPoints) {
  EXPECT_EQ(apply(Activation::split_tanh(), {0, 0}), Complex(0, 0));
  EXPECT_EQ(apply(Activation::crelu(), {-1, 2}), Complex(0, 2));
  EXPECT_EQ(apply(Activation::crelu(), {3, -2}), Complex(3, 0));
  const Complex m = apply(Activation::modrelu(-1.0), {3, 4});
  EXPECT_NEAR(m.real(), 3.0 * 4.0 / 5.0, 1e-15);
  EXPECT_NEAR(m.imag(), 4.0 * 4.0 / 5.0, 1e-15);
  EXPECT_EQ(apply(Activation::modrelu(-10.0), {3, 4}), Complex(0, 0));
  EXPECT_EQ(apply(Activation::modrelu(0.5), {0, 0}), Complex(0.5, 0));
  const Complex t = apply(Activation::amplitude_tanh(), {3, 4});
  EXPECT_NEAR(std::abs(t), std::tanh(5.0), 1e-15);
  EXPECT_NEAR(std::arg(t), std::arg(Complex(3, 4)), 1e-15);
  EXPECT_EQ(apply(Activation::amplitude_tanh(), {0, 0}), Complex(0, 0));
}

TEST(Activations, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  const Activation acts[] = {Activation::split_tanh(), Activation::crelu(), Activation::modrelu(-0.7),
                             Activation::modrelu(0.4), Activation::amplitude_tanh()};
  for (const auto& a : acts) {
    for (int t = 0; t < 200; ++t) {
      const Complex z(u(rng), u(rng));
      if (a.type == ActivationType::CReLU && (std::abs(z.real()) < 1e-3 || std::abs(z.imag()) < 1e-3)) continue;
      if (a.type == ActivationType::ModReLU && std::abs(std::abs(z) + a.bias) < 1e-3) continue;
      const Jacobian2 j = jacobian(a, z);
      const Jacobian2 n = numeric_jacobian(a, z);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) EXPECT_NEAR(j[r][c], n[r][c], 1e-7) << to_string(a) << " at " << z;
    }
  }
}

TEST(Activations, AmplitudeTanhJacobianNearOrigin) {
  const Jacobian2 j = jacobian(Activation::amplitude_tanh(), {1e-5, -2e-5});
  EXPECT_NEAR(j[0][0], 1.0, 1e-9);
  EXPECT_NEAR(j[1][1], 1.0, 1e-9);
  EXPECT_NEAR(j[0][1], 0.0, 1e-9);
}

TEST(Activations, DeclaredLipschitz) {
  EXPECT_EQ(declared_lipschitz(Activation::split_tanh(), std::nullopt), 1.0);
  EXPECT_EQ(declared_lipschitz(Activation::crelu(), std::nullopt), 1.0);
  EXPECT_FALSE(declared_lipschitz(Activation::modrelu(0.3), std::nullopt).has_value());
  EXPECT_EQ(declared_lipschitz(Activation::amplitude_tanh(), 2.0), 5.0);
  EXPECT_THROW(declared_lipschitz(Activation::amplitude_tanh(), std::nullopt), DomainError);
}

TEST(Activations, ProbeRespectsDeclaredConstants) {
  EXPECT_LE(lipschitz_probe(Activation::split_tanh(), 3.0, 20000, 1), 1.0 + 1e-12);
  const double c = lipschitz_probe(Activation::crelu(), 3.0, 20000, 2);
  EXPECT_LE(c, 1.0 + 1e-12);
  EXPECT_GE(c, 0.99);
  for (double alpha : {1.0, 2.0, 5.0})
    EXPECT_LE(lipschitz_probe(Activation::amplitude_tanh(), alpha, 20000, 3), 2 * alpha + 1);
  EXPECT_THROW(lipschitz_probe(Activation::crelu(), 1.0, 0, 0), DomainError);
}

TEST(Activations, ProbeIsDeterministic) {
  const auto a = Activation::modrelu(-0.5);
  EXPECT_EQ(lipschitz_probe(a, 2.0, 1000, 7), lipschitz_probe(a, 2.0, 1000, 7));
}

TEST(Activations, ParseRoundTrip) {
  for (const auto& a : {Activation::split_tanh(), Activation::crelu(), Activation::amplitude_tanh(),
                        Activation::modrelu(-0.1234567890123456789)})
    EXPECT_EQ(parse_activation(to_string(a)), a);
  EXPECT_THROW(parse_activation("relu"), DomainError);
  EXPECT_THROW(parse_activation("modrelu(x)"), DomainError);
  EXPECT_THROW(Activation::modrelu(NAN), DomainError);
}

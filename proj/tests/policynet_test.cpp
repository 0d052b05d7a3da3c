#include "rlpath/policynet.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace rlpath {
namespace {

// Relative error with a floor on the denominator; entries below ~1e-6 are
// dominated by finite-difference round-off.
double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

double max_gradient_error(const PolicyNet& net, const std::vector<double>& state,
                          const std::vector<double>& target) {
  Gradients g;
  compute_gradients(net, state, target, g);
  const auto fd = oracle::finite_difference(net, state, target);
  double worst = 0;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    for (std::size_t i = 0; i < g.weights[k].size(); ++i) {
      worst = std::max(worst, rel_error(g.weights[k][i], fd.weights[k][i]));
    }
    for (std::size_t i = 0; i < g.biases[k].size(); ++i) {
      worst = std::max(worst, rel_error(g.biases[k][i], fd.biases[k][i]));
    }
  }
  return worst;
}

// Final layer zeroed and biased so that the output is softmax(bias).
PolicyNet net_with_output_bias(std::vector<double> bias, std::size_t input_dim = 2) {
  auto net = create_model(input_dim, bias.size(), 0.01, 3);
  auto& out = net.layers.back();
  std::fill(out.weights.value.begin(), out.weights.value.end(), 0.0);
  out.biases.value = std::move(bias);
  return net;
}

TEST(CreateModel, ShapesForFourteenNodes) {
  auto net = create_model(14, 14, 0.01, 1);
  ASSERT_EQ(net.layers.size(), 3u);
  EXPECT_EQ(net.layers[0].weights.value.size(), 64u * 14u);
  EXPECT_EQ(net.layers[1].weights.value.size(), 64u * 64u);
  EXPECT_EQ(net.layers[2].weights.value.size(), 14u * 64u);
  EXPECT_EQ(net.layers[0].spec, (LayerSpec{14, 64, Activation::relu}));
  EXPECT_EQ(net.layers[1].spec, (LayerSpec{64, 64, Activation::relu}));
  EXPECT_EQ(net.layers[2].spec, (LayerSpec{64, 14, Activation::softmax}));
  EXPECT_EQ(net.learning_rate, 0.01);
}

TEST(CreateModel, TwoNodesZeroBiasesGlorotBounds) {
  auto net = create_model(2, 2, 0.01, 7);
  EXPECT_EQ(net.layers[0].weights.value.size(), 64u * 2u);
  EXPECT_EQ(net.layers[2].weights.value.size(), 2u * 64u);
  for (const auto& l : net.layers) {
    for (double b : l.biases.value) EXPECT_EQ(b, 0.0);
    const double limit = std::sqrt(6.0 / double(l.spec.in_dim + l.spec.out_dim));
    for (double w : l.weights.value) {
      EXPECT_LE(std::abs(w), limit);
    }
    for (double m : l.weights.m) EXPECT_EQ(m, 0.0);
  }
  EXPECT_EQ(net.step_count, 0u);
}

TEST(CreateModel, DeterministicAndRejectsBadDims) {
  EXPECT_EQ(create_model(5, 5, 0.01, 11), create_model(5, 5, 0.01, 11));
  EXPECT_NE(create_model(5, 5, 0.01, 11), create_model(5, 5, 0.01, 12));
  EXPECT_THROW(create_model(0, 3), ConfigError);
  EXPECT_THROW(create_model(3, 1), ConfigError);
  EXPECT_THROW(create_model(3, 3, -1.0), ConfigError);
}

TEST(Forward, ZeroOutputLayerIsUniform) {
  auto net = net_with_output_bias({0, 0, 0, 0}, 4);
  for (auto p : forward(net, std::vector<double>{0.3, -2, 1, 0})) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, AnalyticValuesAndShiftInvariance) {
  const auto p = softmax(std::vector<double>{std::log(2.0), 0, 0});
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
  EXPECT_NEAR(p[2], 0.25, 1e-15);

  const std::vector<double> z{0.3, -1.2, 2.5, 0.0};
  std::vector<double> shifted = z;
  for (auto& v : shifted) v += 1000;
  const auto a = softmax(z);
  const auto b = softmax(shifted);
  // Adding 1000 itself rounds the logits at ~1e-13.
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Forward, RejectsBadInput) {
  auto net = create_model(3, 3, 0.01, 1);
  EXPECT_THROW(forward(net, std::vector<double>{1, 0}), ConfigError);
  EXPECT_THROW(forward(net, std::vector<double>{1, NAN, 0}), NumericError);
}

TEST(Forward, OutputIsADistributionProperty) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 14;
    auto net = create_model(n, n, 0.01, gen());
    std::vector<double> state(n);
    for (auto& s : state) s = u(gen);
    const auto p = forward(net, state);
    double total = 0;
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Loss, Examples) {
  const std::vector<double> p{0.25, 0.75};
  EXPECT_NEAR(loss(p, std::vector<double>{0, 1}), 0.287682072451781, 1e-12);
  EXPECT_EQ(loss(p, std::vector<double>{0, 0}), 0.0);
  EXPECT_NEAR(loss(p, std::vector<double>{0, 2}), 2 * 0.287682072451781, 1e-12);
  // Clamp keeps log(0) finite.
  EXPECT_NEAR(loss(std::vector<double>{0.0, 1.0}, std::vector<double>{1, 0}), -std::log(1e-12), 1e-9);
}

TEST(TrainStep, LogitGradientIsProbsMinusTarget) {
  auto net = net_with_output_bias({0, std::log(3.0)});
  const std::vector<double> state{1, 0};
  Gradients g;
  compute_gradients(net, state, std::vector<double>{0, 1}, g);
  EXPECT_NEAR(g.biases.back()[0], 0.25, 1e-15);
  EXPECT_NEAR(g.biases.back()[1], -0.25, 1e-15);
  // Scaled target: g = p * sum(t) - t.
  compute_gradients(net, state, std::vector<double>{0, 2}, g);
  EXPECT_NEAR(g.biases.back()[0], 0.5, 1e-15);
  EXPECT_NEAR(g.biases.back()[1], -0.5, 1e-15);
}

TEST(TrainStep, ZeroTargetLeavesParametersBitIdentical) {
  auto net = create_model(4, 4, 0.01, 9);
  const auto before = net;
  const double l = train_step(net, std::vector<double>{0, 1, 0, 0}, std::vector<double>{0, 0, 0, 0});
  EXPECT_EQ(l, 0.0);
  EXPECT_EQ(net.step_count, 1u);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    EXPECT_EQ(net.layers[k].weights, before.layers[k].weights);
    EXPECT_EQ(net.layers[k].biases, before.layers[k].biases);
  }
}

TEST(TrainStep, ReturnsPreUpdateLossAndLowersIt) {
  auto net = create_model(3, 3, 0.01, 4);
  const std::vector<double> state{0, 0, 1};
  const std::vector<double> target{0, 1, 0};
  const double expected = loss(forward(net, state), target);
  EXPECT_DOUBLE_EQ(train_step(net, state, target), expected);
  EXPECT_LT(loss(forward(net, state), target), expected);
  EXPECT_THROW(train_step(net, state, std::vector<double>{0, -1, 0}), ConfigError);
}

TEST(Gradients, MatchFiniteDifferencesOnFourNodes) {
  auto net = create_model(4, 4, 0.01, 21);
  EXPECT_LT(max_gradient_error(net, {0, 0, 1, 0}, {0, 1, 0, 0}), 1e-4);
  EXPECT_LT(max_gradient_error(net, {0.5, -0.2, 1, 0.1}, {0, 0, 0, 1.5}), 1e-4);
}

TEST(Gradients, MatchFiniteDifferencesProperty) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + gen() % 5;
    auto net = create_model(n, n, 0.01, gen());
    std::vector<double> state(n), target(n, 0.0);
    for (auto& s : state) s = u(gen);
    target[gen() % n] = 0.5 + (u(gen) + 1);
    if (oracle::min_relu_margin(net, state) < oracle::kKinkMargin) continue;
    EXPECT_LT(max_gradient_error(net, state, target), 1e-4) << "trial " << trial;
  }
}

TEST(Adam, FirstStepClosedForm) {
  double m = 0, v = 0;
  const double p = adam_update(0.0, 1.0, m, v, 1, 0.01);
  EXPECT_DOUBLE_EQ(m, 0.1);
  EXPECT_DOUBLE_EQ(v, 0.001);
  EXPECT_NEAR(p, -0.01 / (1 + 1e-7), 1e-15);
  EXPECT_NEAR(p, -0.009999999, 1e-12);
}

TEST(Adam, ZeroGradientIsNoOp) {
  double m = 0, v = 0;
  EXPECT_EQ(adam_update(0.37, 0.0, m, v, 1, 0.01), 0.37);
  EXPECT_EQ(m, 0.0);
  EXPECT_EQ(v, 0.0);
}

TEST(Adam, TwoStepsMatchScalarOracle) {
  oracle::ScalarAdam ref;
  double m = 0, v = 0, p = 0;
  for (std::uint64_t t = 1; t <= 2; ++t) {
    p = adam_update(p, 1.0, m, v, t, 0.01);
    EXPECT_NEAR(p, ref.step(1.0), 1e-15);
  }
  EXPECT_NEAR(p, -0.0199999980, 1e-9);
}

TEST(TrainStep, DeterministicTrajectories) {
  auto a = create_model(5, 5, 0.01, 31);
  auto b = create_model(5, 5, 0.01, 31);
  std::mt19937_64 gen(8);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> state(5, 0.0), target(5, 0.0);
    state[gen() % 5] = 1;
    target[gen() % 5] = 1;
    train_step(a, state, target);
    train_step(b, state, target);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.step_count, 50u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto net = create_model(6, 6, 0.01, 13);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> state(6, 0.0), target(6, 0.0);
    state[i % 6] = 1;
    target[(i * 5 + 1) % 6] = 1;
    train_step(net, state, target);
  }
  const auto path = std::filesystem::temp_directory_path() / "rlpath_checkpoint_test.json";
  save_checkpoint(net, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded, net);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    for (std::size_t i = 0; i < net.layers[k].weights.value.size(); ++i) {
      EXPECT_EQ(std::memcmp(&loaded.layers[k].weights.value[i], &net.layers[k].weights.value[i],
                            sizeof(double)),
                0);
    }
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignDocuments) {
  EXPECT_THROW(checkpoint_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
  auto doc = nlohmann::json::parse(checkpoint_to_json(create_model(3, 3, 0.01, 1)).dump());
  doc["layers"][1]["weights"].erase(0);
  EXPECT_THROW(checkpoint_from_json(doc), ValidationError);
}

}  // namespace
}  // namespace rlpath

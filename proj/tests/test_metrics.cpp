#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "topoforge/errors.hpp"
#include "topoforge/metrics.hpp"

using namespace topoforge;

namespace {

GeneratorBatch batch_of(std::vector<Field> real, std::vector<Field> fake, std::vector<double> probs,
                        std::vector<double> truth, std::vector<double> pred) {
  GeneratorBatch b;
  b.real_designs = std::move(real);
  b.fake_designs = std::move(fake);
  b.fake_probs = std::move(probs);
  b.true_counts = std::move(truth);
  b.pred_counts = std::move(pred);
  return b;
}

GeneratorBatch random_batch(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> bars(1, 20);
  const int n = size(rng);
  const int rows = size(rng) + 2;
  const int cols = size(rng) + 2;
  GeneratorBatch b;
  for (int k = 0; k < n; ++k) {
    Field x(rows, cols);
    Field y(rows, cols);
    for (Eigen::Index e = 0; e < x.size(); ++e) {
      x.data()[e] = u(rng);
      y.data()[e] = u(rng);
    }
    b.real_designs.push_back(x);
    b.fake_designs.push_back(y);
    b.fake_probs.push_back(u(rng));
    b.true_counts.push_back(bars(rng));
    b.pred_counts.push_back(bars(rng));
  }
  b.counter_accuracy = u(rng);
  return b;
}

}  // namespace

TEST(Reconstruction, Examples) {
  const Field x = Field::Random(4, 5);
  EXPECT_EQ(reconstruction_loss(batch_of({x}, {x}, {0.5}, {1}, {1})), 0.0);
  EXPECT_EQ(reconstruction_loss(batch_of({Field::Ones(3, 3)}, {Field::Zero(3, 3)}, {0.5}, {1}, {1})), 1.0);
}

TEST(Reconstruction, MeanOverSamplesOfPixelMeans) {
  Field a = Field::Zero(2, 2);
  Field b = Field::Zero(2, 2);
  b(0, 0) = 1.0;  // per-sample MSE 0.25
  EXPECT_DOUBLE_EQ(reconstruction_loss(batch_of({a, a}, {b, a}, {0.5, 0.5}, {1, 1}, {1, 1})), 0.125);
}

TEST(Reconstruction, DimensionMismatchRejected) {
  EXPECT_THROW(reconstruction_loss(batch_of({Field::Zero(2, 2)}, {Field::Zero(2, 3)}, {0.5}, {1}, {1})),
               ParameterError);
  EXPECT_THROW(reconstruction_loss(batch_of({Field::Zero(2, 2)}, {}, {0.5}, {1}, {1})), ParameterError);
}

TEST(Counting, Examples) {
  const Field z = Field::Zero(1, 1);
  EXPECT_EQ(counting_loss(batch_of({z}, {z}, {0.5}, {5}, {3})), 0.0);
  EXPECT_EQ(counting_loss(batch_of({z}, {z}, {0.5}, {5}, {6})), 1.0);
  EXPECT_EQ(counting_loss(batch_of({z, z}, {z, z}, {0.5, 0.5}, {4, 4}, {5, 3})), 0.5);
}

TEST(Counting, EqualityCountsUnlessStrict) {
  const Field z = Field::Zero(1, 1);
  const GeneratorBatch b = batch_of({z}, {z}, {0.5}, {5}, {5});
  EXPECT_EQ(counting_loss(b), 1.0);
  EXPECT_EQ(counting_loss(b, true), 0.0);
}

TEST(Adversarial, Examples) {
  const std::vector<double> half(7, 0.5);
  EXPECT_NEAR(adversarial_loss_generator(half), -0.6931, 1e-4);
  EXPECT_DOUBLE_EQ(adversarial_loss_generator(half), std::log(0.5));
  EXPECT_EQ(adversarial_loss_generator(std::vector<double>{0.0, 0.0}), std::log(1.0 - kLogClamp));
  EXPECT_NEAR(adversarial_loss_generator(std::vector<double>{0.0}), 0.0, 1e-6);
  const double one = adversarial_loss_generator(std::vector<double>{1.0});
  EXPECT_TRUE(std::isfinite(one));
  EXPECT_DOUBLE_EQ(one, std::log(kLogClamp));
}

TEST(Adversarial, RejectsOutOfRangeProbabilities) {
  EXPECT_THROW(adversarial_loss_generator(std::vector<double>{1.5}), ParameterError);
  EXPECT_THROW(adversarial_loss_generator(std::vector<double>{-0.1}), ParameterError);
  EXPECT_THROW(adversarial_loss_generator(std::vector<double>{}), ParameterError);
}

TEST(Discriminator, Examples) {
  const std::vector<double> half{0.5, 0.5};
  EXPECT_NEAR(discriminator_loss(half, half), 1.3863, 1e-4);
  EXPECT_DOUBLE_EQ(discriminator_loss(half, half), -2.0 * std::log(0.5));
  const double perfect = discriminator_loss(std::vector<double>{1.0}, std::vector<double>{0.0});
  EXPECT_GE(perfect, 0.0);
  EXPECT_LE(perfect, 1e-6);
  const double worst = discriminator_loss(std::vector<double>{0.0}, std::vector<double>{1.0});
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_DOUBLE_EQ(worst, -2.0 * std::log(kLogClamp));
}

TEST(Generator, Examples) {
  const LossWeights defaults;
  EXPECT_EQ(defaults.reconstruction, 1.0);
  EXPECT_EQ(defaults.adversarial, 0.01);
  EXPECT_EQ(defaults.counting, 0.1);
  const GeneratorLoss g = combine_generator_loss(0.1, -0.69, 0.5, 0.9, defaults);
  EXPECT_NEAR(g.total, 0.1381, 1e-12);
  EXPECT_EQ(combine_generator_loss(0, 0, 0, 0.7, defaults).total, 0.0);
  const GeneratorLoss gated = combine_generator_loss(0.2, -0.3, 0.8, 0.0, defaults);
  EXPECT_EQ(gated.counting_contribution, 0.0);
  EXPECT_EQ(gated.counting, 0.8);
  EXPECT_DOUBLE_EQ(gated.total, 0.2 + 0.01 * -0.3);
}

TEST(Generator, NegativeWeightsRejected) {
  EXPECT_THROW(combine_generator_loss(0.1, 0.1, 0.1, 1.0, LossWeights{-1.0, 0.01, 0.1}), ParameterError);
}

TEST(Generator, BreakdownSumsToTotal) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const GeneratorBatch b = random_batch(rng);
    const GeneratorLoss g = generator_loss(b, LossWeights{});
    EXPECT_DOUBLE_EQ(g.total, g.reconstruction_contribution + g.adversarial_contribution + g.counting_contribution);
    EXPECT_DOUBLE_EQ(g.reconstruction, reconstruction_loss(b));
    EXPECT_DOUBLE_EQ(g.adversarial, adversarial_loss_generator(b.fake_probs));
    EXPECT_DOUBLE_EQ(g.counting, counting_loss(b));
  }
}

TEST(Generator, LinearInEachWeight) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> w(0.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const GeneratorBatch b = random_batch(rng);
    const LossWeights base{w(rng), w(rng), w(rng)};
    const GeneratorLoss g = generator_loss(b, base);
    LossWeights twice = base;
    twice.reconstruction *= 2.0;
    GeneratorLoss d = generator_loss(b, twice);
    EXPECT_DOUBLE_EQ(d.reconstruction_contribution, 2.0 * g.reconstruction_contribution);
    EXPECT_EQ(d.adversarial_contribution, g.adversarial_contribution);
    EXPECT_EQ(d.counting_contribution, g.counting_contribution);
    twice = base;
    twice.adversarial *= 2.0;
    d = generator_loss(b, twice);
    EXPECT_DOUBLE_EQ(d.adversarial_contribution, 2.0 * g.adversarial_contribution);
    EXPECT_EQ(d.reconstruction_contribution, g.reconstruction_contribution);
    twice = base;
    twice.counting *= 2.0;
    d = generator_loss(b, twice);
    EXPECT_DOUBLE_EQ(d.counting_contribution, 2.0 * g.counting_contribution);
    EXPECT_EQ(d.reconstruction_contribution, g.reconstruction_contribution);
  }
}

TEST(Generator, LossRangesOnRandomBatches) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const GeneratorBatch b = random_batch(rng);
    const double c = counting_loss(b);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(reconstruction_loss(b), 0.0);
    EXPECT_TRUE(std::isfinite(generator_loss(b, LossWeights{}).total));
    EXPECT_TRUE(std::isfinite(discriminator_loss(b.fake_probs, b.fake_probs)));
  }
}

TEST(CounterAccuracy, Examples) {
  const std::vector<double> truth{3, 7, 10, 13};
  for (double tol : {0.0, 1.0, 2.0}) EXPECT_EQ(counter_accuracy(truth, truth, tol), 1.0);
  const std::vector<double> plus_one{4, 8, 11, 14};
  EXPECT_EQ(counter_accuracy(truth, plus_one, 0), 0.0);
  EXPECT_EQ(counter_accuracy(truth, plus_one, 1), 1.0);
  const std::vector<double> mixed{3, 8, 12, 16};  // deltas 0, 1, 2, 3
  EXPECT_EQ(counter_accuracy(truth, mixed, 0), 0.25);
  EXPECT_EQ(counter_accuracy(truth, mixed, 1), 0.5);
  EXPECT_EQ(counter_accuracy(truth, mixed, 2), 0.75);
  EXPECT_THROW(counter_accuracy(truth, std::vector<double>{1}, 0), ParameterError);
}

TEST(CounterAccuracy, MonotoneInTolerance) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const GeneratorBatch b = random_batch(rng);
    double prev = 0.0;
    for (int tol = 0; tol <= 20; ++tol) {
      const double a = counter_accuracy(b.true_counts, b.pred_counts, tol);
      EXPECT_GE(a, prev);
      prev = a;
    }
    EXPECT_EQ(prev, 1.0);
  }
}

TEST(LossBatch, JsonRoundTrip) {
  const auto in = nlohmann::json::parse(R"({
    "real_designs": [[[1, 1], [0, 0]], [[0, 1], [1, 0]]],
    "fake_designs": [[[1, 0], [0, 0]], [[0, 1], [1, 0]]],
    "fake_probs": [0.5, 0.5],
    "real_probs": [0.5, 0.5],
    "true_counts": [4, 4],
    "pred_counts": [5, 3],
    "counter_accuracy": 0.9
  })");
  const auto out = evaluate_loss_batch(in);
  EXPECT_DOUBLE_EQ(out["reconstruction"].get<double>(), 0.125);
  EXPECT_DOUBLE_EQ(out["adversarial_generator"].get<double>(), std::log(0.5));
  EXPECT_EQ(out["counting"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(out["discriminator"].get<double>(), -2.0 * std::log(0.5));
  EXPECT_DOUBLE_EQ(out["generator"]["total"].get<double>(), 0.125 + 0.01 * std::log(0.5) + 0.1 * 0.9 * 0.5);
  EXPECT_EQ(out["counter_accuracy"]["0"].get<double>(), 0.0);
  EXPECT_EQ(out["counter_accuracy"]["1"].get<double>(), 1.0);
}

TEST(LossBatch, DefaultsAndErrors) {
  auto in = nlohmann::json::parse(R"({
    "real_designs": [[[1]]], "fake_designs": [[[1]]], "fake_probs": [0.2],
    "true_counts": [3], "pred_counts": [3], "weights": {"lambda1": 2.0}
  })");
  const auto out = evaluate_loss_batch(in);
  EXPECT_EQ(out["counter_accuracy_used"].get<double>(), 1.0);
  EXPECT_EQ(out["weights"]["lambda1"].get<double>(), 2.0);
  EXPECT_EQ(out["weights"]["lambda2"].get<double>(), 0.01);
  EXPECT_FALSE(out.contains("discriminator"));
  in.erase("fake_probs");
  EXPECT_THROW(evaluate_loss_batch(in), ParameterError);
}

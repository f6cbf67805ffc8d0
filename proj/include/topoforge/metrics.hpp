#pragma once

// Generator/discriminator loss terms and counter accuracy, evaluated on plain
// batches (no autodiff).

#include <span>
#include <vector>

#include <json.hpp>

#include "topoforge/fem.hpp"

namespace topoforge {

inline constexpr double kLogClamp = 1e-7;

struct LossWeights {
  double reconstruction = 1.0;   // lambda_1
  double adversarial = 0.01;     // lambda_2
  double counting = 0.1;         // lambda_3

  void validate() const;
};

struct GeneratorBatch {
  std::vector<Field> real_designs;
  std::vector<Field> fake_designs;
  std::vector<double> fake_probs;  // D(G(z/c))
  std::vector<double> true_counts;
  std::vector<double> pred_counts;
  double counter_accuracy = 1.0;

  // Throws ParameterError on length or shape mismatches and out-of-range probabilities.
  void validate() const;
};

// Mean over samples of the per-pixel mean squared error.
double reconstruction_loss(const GeneratorBatch& batch);

// Fraction of samples with pred >= true (pred > true when `strict`).
double counting_loss(const GeneratorBatch& batch, bool strict = false);

// Mean of log(1 - D(G(z/c))) with D clamped to [eps, 1 - eps].
double adversarial_loss_generator(std::span<const double> fake_probs);

// -(mean log D(x/c) + mean log(1 - D(G(z/c)))), clamped as above.
double discriminator_loss(std::span<const double> real_probs, std::span<const double> fake_probs);

struct GeneratorLoss {
  double total = 0.0;
  double reconstruction = 0.0;  // raw term values
  double adversarial = 0.0;
  double counting = 0.0;
  double reconstruction_contribution = 0.0;  // weighted
  double adversarial_contribution = 0.0;
  double counting_contribution = 0.0;
};

GeneratorLoss combine_generator_loss(double reconstruction, double adversarial, double counting,
                                     double counter_accuracy, const LossWeights& weights);

GeneratorLoss generator_loss(const GeneratorBatch& batch, const LossWeights& weights, bool strict_counting = false);

// Fraction of samples with |pred - true| <= tolerance_bars.
double counter_accuracy(std::span<const double> true_counts, std::span<const double> pred_counts,
                        double tolerance_bars);

// Evaluates every loss term of a JSON batch (see README for the schema).
nlohmann::json evaluate_loss_batch(const nlohmann::json& batch);

}  // namespace topoforge

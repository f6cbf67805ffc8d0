#include "topoforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topoforge/errors.hpp"

namespace topoforge {

namespace {

double clamped_log(double p) { return std::log(std::clamp(p, kLogClamp, 1.0 - kLogClamp)); }

void check_probs(std::span<const double> probs, const char* what) {
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(std::string(what) + " must lie in [0, 1]");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(reconstruction >= 0.0 && adversarial >= 0.0 && counting >= 0.0)) {
    throw ParameterError("loss weights must be non-negative");
  }
}

void GeneratorBatch::validate() const {
  const std::size_t n = real_designs.size();
  if (n == 0) throw ParameterError("generator batch is empty");
  if (fake_designs.size() != n || fake_probs.size() != n || true_counts.size() != n || pred_counts.size() != n) {
    throw ParameterError("generator batch lists differ in length");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (real_designs[k].rows() != fake_designs[k].rows() || real_designs[k].cols() != fake_designs[k].cols() ||
        real_designs[k].rows() != real_designs[0].rows() || real_designs[k].cols() != real_designs[0].cols()) {
      throw ParameterError("design " + std::to_string(k) + " dimension mismatch");
    }
  }
  check_probs(fake_probs, "discriminator probabilities");
  if (!(counter_accuracy >= 0.0 && counter_accuracy <= 1.0)) {
    throw ParameterError("counter accuracy must lie in [0, 1]");
  }
}

double reconstruction_loss(const GeneratorBatch& batch) {
  batch.validate();
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.real_designs.size(); ++k) {
    sum += (batch.real_designs[k] - batch.fake_designs[k]).array().square().mean();
  }
  return sum / static_cast<double>(batch.real_designs.size());
}

double counting_loss(const GeneratorBatch& batch, bool strict) {
  batch.validate();
  std::size_t hits = 0;
  for (std::size_t k = 0; k < batch.true_counts.size(); ++k) {
    const double pred = batch.pred_counts[k];
    const double truth = batch.true_counts[k];
    if (strict ? pred > truth : pred >= truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.true_counts.size());
}

double adversarial_loss_generator(std::span<const double> fake_probs) {
  if (fake_probs.empty()) throw ParameterError("no discriminator outputs");
  check_probs(fake_probs, "discriminator probabilities");
  double sum = 0.0;
  for (double p : fake_probs) sum += clamped_log(1.0 - p);
  return sum / static_cast<double>(fake_probs.size());
}

double discriminator_loss(std::span<const double> real_probs, std::span<const double> fake_probs) {
  if (real_probs.empty() || fake_probs.empty()) throw ParameterError("no discriminator outputs");
  check_probs(real_probs, "discriminator probabilities");
  double real = 0.0;
  for (double p : real_probs) real += clamped_log(p);
  real /= static_cast<double>(real_probs.size());
  return -(real + adversarial_loss_generator(fake_probs));
}

GeneratorLoss combine_generator_loss(double reconstruction, double adversarial, double counting,
                                     double counter_accuracy, const LossWeights& weights) {
  weights.validate();
  GeneratorLoss out;
  out.reconstruction = reconstruction;
  out.adversarial = adversarial;
  out.counting = counting;
  out.reconstruction_contribution = weights.reconstruction * reconstruction;
  out.adversarial_contribution = weights.adversarial * adversarial;
  out.counting_contribution = weights.counting * counter_accuracy * counting;
  out.total = out.reconstruction_contribution + out.adversarial_contribution + out.counting_contribution;
  return out;
}

GeneratorLoss generator_loss(const GeneratorBatch& batch, const LossWeights& weights, bool strict_counting) {
  return combine_generator_loss(reconstruction_loss(batch), adversarial_loss_generator(batch.fake_probs),
                                counting_loss(batch, strict_counting), batch.counter_accuracy, weights);
}

double counter_accuracy(std::span<const double> true_counts, std::span<const double> pred_counts,
                        double tolerance_bars) {
  if (true_counts.size() != pred_counts.size()) throw ParameterError("count lists differ in length");
  if (true_counts.empty()) throw ParameterError("no counts to compare");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < true_counts.size(); ++k) {
    if (std::abs(pred_counts[k] - true_counts[k]) <= tolerance_bars) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(true_counts.size());
}

namespace {

Field field_from_json(const nlohmann::json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Field f(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows.at(i).size()) != c) throw ParameterError("ragged design rows");
    for (Eigen::Index j = 0; j < c; ++j) f(i, j) = rows.at(i).at(j).get<double>();
  }
  return f;
}

}  // namespace

nlohmann::json evaluate_loss_batch(const nlohmann::json& in) {
  GeneratorBatch batch;
  try {
    for (const auto& d : in.at("real_designs")) batch.real_designs.push_back(field_from_json(d));
    for (const auto& d : in.at("fake_designs")) batch.fake_designs.push_back(field_from_json(d));
    batch.fake_probs = in.at("fake_probs").get<std::vector<double>>();
    batch.true_counts = in.at("true_counts").get<std::vector<double>>();
    batch.pred_counts = in.at("pred_counts").get<std::vector<double>>();
    batch.counter_accuracy = in.contains("counter_accuracy")
                                 ? in.at("counter_accuracy").get<double>()
                                 : counter_accuracy(batch.true_counts, batch.pred_counts, 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed loss batch: ") + e.what());
  }
  LossWeights weights;
  if (in.contains("weights")) {
    const auto& w = in.at("weights");
    weights.reconstruction = w.value("lambda1", weights.reconstruction);
    weights.adversarial = w.value("lambda2", weights.adversarial);
    weights.counting = w.value("lambda3", weights.counting);
  }
  const bool strict = in.value("strict_counting", false);

  const GeneratorLoss g = generator_loss(batch, weights, strict);
  nlohmann::json out;
  out["reconstruction"] = g.reconstruction;
  out["adversarial_generator"] = g.adversarial;
  out["counting"] = g.counting;
  out["counter_accuracy_used"] = batch.counter_accuracy;
  out["generator"] = {{"total", g.total},
                      {"reconstruction", g.reconstruction_contribution},
                      {"adversarial", g.adversarial_contribution},
                      {"counting", g.counting_contribution}};
  out["weights"] = {{"lambda1", weights.reconstruction}, {"lambda2", weights.adversarial}, {"lambda3", weights.counting}};
  if (in.contains("real_probs")) {
    out["discriminator"] = discriminator_loss(in.at("real_probs").get<std::vector<double>>(), batch.fake_probs);
  }
  for (int tol : {0, 1, 2}) {
    out["counter_accuracy"][std::to_string(tol)] = counter_accuracy(batch.true_counts, batch.pred_counts, tol);
  }
  return out;
}

}  // namespace topoforge

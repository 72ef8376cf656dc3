#include "flock/task.hpp"

#include <stdexcept>

#include "flock/rng.hpp"

namespace flock {
namespace {

void check_dim(std::size_t weights, const ClientDataset& data) {
  if (weights != data.dim) throw std::invalid_argument("dimension mismatch with dataset");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

}  // namespace

TaskSpec make_task(const TaskConfig& config, std::uint64_t seed) {
  if (config.dim < 1) throw std::invalid_argument("task dim must be >= 1");
  TaskSpec task{config, {}};
  Rng rng(seed);
  task.true_weights.resize(static_cast<std::size_t>(config.dim));
  for (auto& w : task.true_weights) w = rng.normal();
  return task;
}

ClientDataset generate_client_data(const TaskSpec& task, std::uint64_t seed, DataRole role) {
  const int rows = role == DataRole::kTrain ? task.config.n_train : task.config.n_test;
  return generate_client_data(task, seed, role, static_cast<std::size_t>(rows));
}

ClientDataset generate_client_data(const TaskSpec& task, std::uint64_t seed, DataRole role,
                                   std::size_t rows) {
  if (rows == 0) throw std::invalid_argument("dataset must have at least one row");
  const std::size_t dim = task.true_weights.size();
  ClientDataset data;
  data.rows = rows;
  data.dim = dim;
  data.role = role;
  data.features.resize(rows * dim);
  data.targets.resize(rows);
  Rng rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < dim; ++j) data.features[i * dim + j] = rng.normal();
    const double noise = task.config.noise_sigma * rng.normal();
    data.targets[i] = dot(data.row(i), task.true_weights) + noise;
  }
  return data;
}

double mse(std::span<const double> weights, const ClientDataset& data) {
  check_dim(weights.size(), data);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    const double r = dot(data.row(i), weights) - data.targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(data.rows);
}

std::vector<double> mse_gradient(std::span<const double> weights, const ClientDataset& data) {
  check_dim(weights.size(), data);
  std::vector<double> grad(data.dim, 0.0);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto x = data.row(i);
    const double r = dot(x, weights) - data.targets[i];
    for (std::size_t j = 0; j < data.dim; ++j) grad[j] += r * x[j];
  }
  const double scale = 2.0 / static_cast<double>(data.rows);
  for (auto& g : grad) g *= scale;
  return grad;
}

ParamVector honest_train(const ParamVector& global, const ClientDataset& data, const TaskSpec& task) {
  if (data.role != DataRole::kTrain) throw std::invalid_argument("honest_train needs training data");
  check_dim(global.dim(), data);
  std::vector<double> w = dequantize(global);
  for (int step = 0; step < task.config.local_steps; ++step) {
    const auto grad = mse_gradient(w, data);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= task.config.lr * grad[j];
  }
  return quantize(w);
}

double evaluate(const ParamVector& params, const ClientDataset& data) {
  if (data.role != DataRole::kTest) throw std::invalid_argument("evaluate needs test data");
  return mse(dequantize(params), data);
}

}  // namespace flock

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flock/model.hpp"

namespace flock {

enum class DataRole { kTrain, kTest };

/// Row-major n x d feature matrix with one target per row.
struct ClientDataset {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<double> targets;
  DataRole role = DataRole::kTrain;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
};

/// Hyperparameters of the synthetic linear-regression task.
struct TaskConfig {
  int dim = 16;
  double noise_sigma = 0.1;
  int n_train = 256;
  int n_test = 128;
  double lr = 0.001;
  int local_steps = 10;
};

struct TaskSpec {
  TaskConfig config;
  std::vector<double> true_weights;
};

/// w* with i.i.d. standard normal coordinates.
TaskSpec make_task(const TaskConfig& config, std::uint64_t seed);

/// Features i.i.d. N(0, 1); targets x . w* + N(0, noise_sigma^2).
ClientDataset generate_client_data(const TaskSpec& task, std::uint64_t seed, DataRole role);
ClientDataset generate_client_data(const TaskSpec& task, std::uint64_t seed, DataRole role,
                                   std::size_t rows);

double mse(std::span<const double> weights, const ClientDataset& data);

/// Gradient of the mean squared error: (2/n) X^T (X w - y).
std::vector<double> mse_gradient(std::span<const double> weights, const ClientDataset& data);

/// local_steps of full-batch gradient descent from `global`, re-quantized.
ParamVector honest_train(const ParamVector& global, const ClientDataset& data, const TaskSpec& task);

/// MSE of the dequantized parameters on a test set.
double evaluate(const ParamVector& params, const ClientDataset& data);

}  // namespace flock

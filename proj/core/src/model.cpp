#include "flock/model.hpp"

#include <cmath>
#include <stdexcept>

namespace flock {

ParamVector quantize(std::span<const double> weights) {
  std::vector<std::int64_t> values;
  values.reserve(weights.size());
  for (const double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("quantize: non-finite weight");
    const double scaled = std::floor(w * static_cast<double>(ParamVector::kScale) + 0.5);
    if (std::fabs(scaled) > static_cast<double>(ParamVector::kLimit)) throw std::invalid_argument("quantize: weight out of range");
    values.push_back(static_cast<std::int64_t>(scaled));
  }
  return ParamVector(std::move(values));
}

std::vector<double> dequantize(const ParamVector& params) {
  std::vector<double> out;
  out.reserve(params.dim());
  for (const auto v : params.values()) {
    out.push_back(static_cast<double>(v) / static_cast<double>(ParamVector::kScale));
  }
  return out;
}

ParamVector fedavg(std::span<const ParamVector> updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg: no updates");
  const std::size_t dim = updates.front().dim();
  for (const auto& u : updates) {
    if (u.dim() != dim) throw std::invalid_argument("fedavg: dimension mismatch");
  }
  const auto count = static_cast<std::int64_t>(updates.size());
  std::vector<std::int64_t> out(dim, 0);
  for (std::size_t i = 0; i < dim; ++i) {
    std::int64_t sum = 0;
    for (const auto& u : updates) {
      if (__builtin_add_overflow(sum, u[i], &sum)) throw std::overflow_error("fedavg: sum overflow");
    }
    out[i] = floor_div(sum, count);
  }
  return ParamVector(std::move(out));
}

bool validity_vote(std::span<const ParamVector> updates, const ParamVector& published,
                   int n_miners) {
  if (n_miners < 1) throw std::invalid_argument("validity_vote: n_miners must be >= 1");
  if (updates.empty()) return false;
  int approvals = 0;
  for (int miner = 0; miner < n_miners; ++miner) {
    bool approve = false;
    try {
      approve = fedavg(updates) == published;
    } catch (const std::exception&) {
      approve = false;
    }
    approvals += approve ? 1 : 0;
  }
  return approvals == n_miners;
}

}  // namespace flock

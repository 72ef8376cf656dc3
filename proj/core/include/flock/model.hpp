#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace flock {

/// Fixed-point model weights, 16 fractional bits.
///
/// This is the unit proposers submit and miners aggregate. Integer values
/// make aggregation exact, so every honest recomputation agrees bit for bit.
class ParamVector {
 public:
  static constexpr int kFractionBits = 16;
  static constexpr std::int64_t kScale = std::int64_t{1} << kFractionBits;
  // Largest representable magnitude in raw units; leaves headroom for
  // summing 2^16 vectors in 64 bits.
  static constexpr std::int64_t kLimit = std::int64_t{1} << 46;

  ParamVector() = default;
  explicit ParamVector(std::vector<std::int64_t> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<std::int64_t> values) : values_(values) {}

  static ParamVector zeros(std::size_t dim) { return ParamVector(std::vector<std::int64_t>(dim, 0)); }

  std::size_t dim() const { return values_.size(); }
  std::int64_t operator[](std::size_t i) const { return values_[i]; }
  std::int64_t& operator[](std::size_t i) { return values_[i]; }
  std::span<const std::int64_t> values() const { return values_; }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<std::int64_t> values_;
};

/// Clamps a raw lattice value to [-kLimit, kLimit].
constexpr std::int64_t saturate(std::int64_t raw) {
  return raw > ParamVector::kLimit ? ParamVector::kLimit : (raw < -ParamVector::kLimit ? -ParamVector::kLimit : raw);
}

/// value_i = floor(x_i * 2^16 + 0.5). Throws std::invalid_argument for
/// non-finite input or magnitudes that do not fit the lattice.
ParamVector quantize(std::span<const double> weights);
std::vector<double> dequantize(const ParamVector& params);

/// Floor (toward negative infinity) of a / b for b > 0.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Uniform FedAvg: exact integer sum divided by the count, floored.
/// Throws std::invalid_argument on an empty list or mismatched dims.
ParamVector fedavg(std::span<const ParamVector> updates);

/// Each of `n_miners` honest miners recomputes fedavg(updates) and approves
/// iff it equals `published` exactly; true iff every miner approves.
bool validity_vote(std::span<const ParamVector> updates, const ParamVector& published,
                   int n_miners);

}  // namespace flock

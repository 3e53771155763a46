#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cvsim {

/// Deterministic random stream. Streams for independent shots and labels are
/// derived from a master seed with split(), never by sharing one engine.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Stream keyed by (master, shot, label):
  ///   seed = mix(mix(master ^ mix(shot)) ^ fnv1a(label))
  /// where mix is the splitmix64 finalizer. Adding a new label leaves every
  /// existing (shot, label) stream unchanged.
  static RngStream split(std::uint64_t master, std::uint64_t shot, std::string_view label);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace cvsim

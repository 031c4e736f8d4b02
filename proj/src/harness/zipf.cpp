// Copyright 2026 The loco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "loco/harness/zipf.hpp"

#include <cmath>

#include "loco/common.hpp"

namespace loco::harness {

double ZipfianGenerator::zeta(std::uint64_t n, double theta) {
  double sum = 0;
  for (std::uint64_t i = 1; i <= n; ++i) sum += 1.0 / std::pow(static_cast<double>(i), theta);
  return sum;
}

ZipfianGenerator::ZipfianGenerator(std::uint64_t items, double theta)
    : items_(items), theta_(theta) {
  if (items < 2) throw UsageError("zipfian generator needs at least 2 items");
  if (!(theta > 0 && theta < 1)) throw UsageError("zipfian theta must lie in (0, 1)");
  zetan_ = zeta(items, theta);
  zeta2_ = zeta(2, theta);
  alpha_ = 1.0 / (1.0 - theta);
  eta_ = (1 - std::pow(2.0 / static_cast<double>(items), 1 - theta)) / (1 - zeta2_ / zetan_);
  half_pow_theta_ = std::pow(0.5, theta);
}

std::uint64_t ZipfianGenerator::next(double u) const {
  double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + half_pow_theta_) return 1;
  auto r = static_cast<std::uint64_t>(static_cast<double>(items_) *
                                      std::pow(eta_ * u - eta_ + 1, alpha_));
  return std::min(r, items_ - 1);
}

double ZipfianGenerator::mass(std::uint64_t rank) const {
  return 1.0 / std::pow(static_cast<double>(rank + 1), theta_) / zetan_;
}

KeyChooser::KeyChooser(KeyDistribution dist, std::uint64_t keyspace, double theta, bool scramble)
    : dist_(dist),
      keyspace_(keyspace),
      zipf_(std::max<std::uint64_t>(keyspace, 2), theta),
      scramble_(scramble) {
  if (keyspace == 0) throw UsageError("keyspace must be positive");
}

std::uint64_t KeyChooser::place(std::uint64_t rank) const {
  return scramble_ ? mix64(rank) % keyspace_ : rank % keyspace_;
}

}  // namespace loco::harness

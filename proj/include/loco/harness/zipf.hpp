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

#pragma once

#include <cstdint>
#include <random>

namespace loco::harness {

// The YCSB-C Zipfian generator over ranks [0, items).
class ZipfianGenerator {
 public:
  static constexpr double kDefaultTheta = 0.99;

  explicit ZipfianGenerator(std::uint64_t items, double theta = kDefaultTheta);

  // Maps a uniform u in [0, 1) to a rank.
  std::uint64_t next(double u) const;

  template <typename Rng>
  std::uint64_t operator()(Rng& rng) const {
    return next(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  }

  // Exact probability of rank under the discrete Zipf law this approximates.
  double mass(std::uint64_t rank) const;

  std::uint64_t items() const { return items_; }
  double theta() const { return theta_; }
  double zetan() const { return zetan_; }

  static double zeta(std::uint64_t n, double theta);

 private:
  std::uint64_t items_;
  double theta_;
  double zetan_;
  double zeta2_;
  double alpha_;
  double eta_;
  double half_pow_theta_;
};

enum class KeyDistribution { kUniform, kZipfian };

// Draws key indices in [0, keyspace). Zipfian ranks are scattered over the
// keyspace with mix64 so hot keys do not cluster on one lock stripe.
class KeyChooser {
 public:
  KeyChooser(KeyDistribution dist, std::uint64_t keyspace,
             double theta = ZipfianGenerator::kDefaultTheta, bool scramble = true);

  template <typename Rng>
  std::uint64_t operator()(Rng& rng) const {
    if (dist_ == KeyDistribution::kUniform) {
      return std::uniform_int_distribution<std::uint64_t>(0, keyspace_ - 1)(rng);
    }
    return place(zipf_(rng));
  }

 private:
  std::uint64_t place(std::uint64_t rank) const;

  KeyDistribution dist_;
  std::uint64_t keyspace_;
  ZipfianGenerator zipf_;
  bool scramble_;
};

}  // namespace loco::harness

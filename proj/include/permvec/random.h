// Copyright 2026 The permvec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace permvec {

/// Seeded generator with portable derived distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std:: distribution classes are not (their algorithms are
/// implementation-defined), so every distribution used by the generators is
/// derived here from raw 64-bit draws.
class Rng {
 public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() {
        return engine_();
    }
    /// Uniform integer in [0, bound). Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform integer in [lo, hi].
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
        return lo + below(hi - lo + 1);
    }
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();
    /// Poisson(mean). Knuth's product method below 30, transformed
    /// rejection above.
    std::uint64_t poisson(double mean);
    /// `count` distinct values from [0, n), ascending. Floyd's algorithm.
    std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t count);

 private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace permvec

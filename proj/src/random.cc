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

#include "permvec/random.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "permvec/types.h"

namespace permvec {

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) {
        throw DomainError("Rng::below: empty range");
    }
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::poisson(double mean) {
    if (!(mean >= 0.0)) {
        throw DomainError("Rng::poisson: negative mean");
    }
    if (mean == 0.0) {
        return 0;
    }
    if (mean < 30.0) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }
    // PTRS (Hörmann 1993).
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) {
            return static_cast<std::uint64_t>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

std::vector<std::uint32_t> Rng::sample_distinct(std::uint32_t n, std::uint32_t count) {
    if (count > n) {
        throw DomainError("Rng::sample_distinct: count exceeds population");
    }
    std::vector<std::uint32_t> out;
    out.reserve(count);
    if (count * 2 > n) {
        // Dense case: partial Fisher-Yates over the whole population.
        std::vector<std::uint32_t> pool(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            pool[i] = i;
        }
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto j = i + static_cast<std::uint32_t>(below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        std::unordered_set<std::uint32_t> chosen;
        chosen.reserve(count * 2);
        for (std::uint32_t j = n - count; j < n; ++j) {
            auto t = static_cast<std::uint32_t>(below(static_cast<std::uint64_t>(j) + 1));
            if (!chosen.insert(t).second) {
                chosen.insert(j);
                t = j;
            }
            out.push_back(t);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace permvec

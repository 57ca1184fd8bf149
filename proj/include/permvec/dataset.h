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
#include <span>
#include <string>
#include <vector>

namespace permvec {

/// Row-major float vectors of one dimension.
struct VectorSet {
    std::size_t dim = 0;
    std::vector<float> data;

    [[nodiscard]] std::size_t size() const {
        return dim == 0 ? 0 : data.size() / dim;
    }
    [[nodiscard]] std::span<const float> row(std::size_t i) const {
        return {data.data() + i * dim, dim};
    }
    void append(std::span<const float> v);
};

/// i.i.d. standard normal entries.
VectorSet gen_vectors(std::size_t n, std::size_t dim, std::uint64_t seed);

/// fvecs: per record a little-endian int32 d followed by d float32 values.
VectorSet read_fvecs(const std::string& path, std::size_t max_rows = 0);
void write_fvecs(const std::string& path, const VectorSet& vs);
/// bvecs: int32 d followed by d unsigned bytes; converted to float.
VectorSet read_bvecs(const std::string& path, std::size_t max_rows = 0);

}  // namespace permvec

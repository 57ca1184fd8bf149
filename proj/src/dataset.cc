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

#include "permvec/dataset.h"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "permvec/random.h"
#include "permvec/types.h"

namespace permvec {

static_assert(std::endian::native == std::endian::little, "vector file IO assumes a little-endian host");

void VectorSet::append(std::span<const float> v) {
    if (dim == 0) {
        dim = v.size();
    }
    if (v.size() != dim || dim == 0) {
        throw DomainError(fmt::format("vector of dim {} appended to set of dim {}", v.size(), dim));
    }
    data.insert(data.end(), v.begin(), v.end());
}

VectorSet gen_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
    if (n == 0 || dim == 0) {
        throw DomainError("gen_vectors: n and dim must be >= 1");
    }
    Rng rng(seed);
    VectorSet vs;
    vs.dim = dim;
    vs.data.resize(n * dim);
    for (auto& x : vs.data) {
        x = static_cast<float>(rng.normal());
    }
    return vs;
}

namespace {

template <typename Scalar>
VectorSet read_vecs(const std::string& path, std::size_t max_rows) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DomainError("cannot open " + path);
    }
    VectorSet vs;
    std::vector<Scalar> buf;
    std::int32_t d = 0;
    while ((max_rows == 0 || vs.size() < max_rows) && in.read(reinterpret_cast<char*>(&d), sizeof d)) {
        if (d <= 0 || (vs.dim != 0 && static_cast<std::size_t>(d) != vs.dim)) {
            throw DomainError(fmt::format("{}: bad record dimension {}", path, d));
        }
        vs.dim = static_cast<std::size_t>(d);
        buf.resize(vs.dim);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(vs.dim * sizeof(Scalar)))) {
            throw DomainError(path + ": truncated record");
        }
        for (Scalar x : buf) {
            vs.data.push_back(static_cast<float>(x));
        }
    }
    return vs;
}

}  // namespace

VectorSet read_fvecs(const std::string& path, std::size_t max_rows) {
    return read_vecs<float>(path, max_rows);
}

VectorSet read_bvecs(const std::string& path, std::size_t max_rows) {
    return read_vecs<std::uint8_t>(path, max_rows);
}

void write_fvecs(const std::string& path, const VectorSet& vs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DomainError("cannot write " + path);
    }
    const auto d = static_cast<std::int32_t>(vs.dim);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        out.write(reinterpret_cast<const char*>(&d), sizeof d);
        out.write(reinterpret_cast<const char*>(vs.row(i).data()), static_cast<std::streamsize>(vs.dim * sizeof(float)));
    }
}

}  // namespace permvec

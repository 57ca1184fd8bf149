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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace permvec {

using DocId = std::uint32_t;
using RoleId = std::uint32_t;
using UserId = std::uint32_t;
using PartitionId = std::uint32_t;

/// Sorted ascending, deduplicated list of document ids.
using DocList = std::vector<DocId>;

/// Raised for caller errors: unknown ids, invalid parameters, malformed input.
class DomainError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an internal invariant is found broken.
class InternalError : public std::logic_error {
 public:
    using std::logic_error::logic_error;
};

/// Dense membership bitmap over a document id space.
class DocBitmap {
 public:
    DocBitmap() = default;
    explicit DocBitmap(std::size_t universe) : bits_((universe + 63) / 64, 0), universe_(universe) {}
    DocBitmap(std::size_t universe, std::span<const DocId> docs) : DocBitmap(universe) {
        for (DocId d : docs) {
            set(d);
        }
    }

    static DocBitmap full(std::size_t universe) {
        DocBitmap b(universe);
        for (std::size_t d = 0; d < universe; ++d) {
            b.set(static_cast<DocId>(d));
        }
        return b;
    }

    void set(DocId d) {
        bits_[d >> 6] |= (std::uint64_t{1} << (d & 63));
    }
    void reset(DocId d) {
        bits_[d >> 6] &= ~(std::uint64_t{1} << (d & 63));
    }
    [[nodiscard]] bool test(DocId d) const {
        return d < universe_ && (bits_[d >> 6] >> (d & 63)) & 1U;
    }
    [[nodiscard]] std::span<const std::uint64_t> words() const {
        return bits_;
    }
    [[nodiscard]] std::span<std::uint64_t> words() {
        return bits_;
    }
    [[nodiscard]] std::size_t universe() const {
        return universe_;
    }
    [[nodiscard]] std::size_t count() const {
        std::size_t c = 0;
        for (auto w : bits_) {
            c += static_cast<std::size_t>(std::popcount(w));
        }
        return c;
    }

 private:
    std::vector<std::uint64_t> bits_;
    std::size_t universe_ = 0;
};

// Linear-merge helpers over sorted DocLists.
DocList union_of(std::span<const DocId> a, std::span<const DocId> b);
DocList intersection_of(std::span<const DocId> a, std::span<const DocId> b);
std::size_t intersection_size(std::span<const DocId> a, std::span<const DocId> b);
bool is_subset(std::span<const DocId> sub, std::span<const DocId> super);

}  // namespace permvec

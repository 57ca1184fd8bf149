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
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "permvec/dataset.h"
#include "permvec/types.h"

namespace permvec {

struct PartitionPlan;

enum class Metric { euclidean, cosine };

struct HnswParams {
    std::size_t M = 16;
    std::size_t ef_construction = 64;
    Metric metric = Metric::euclidean;
};

struct Hit {
    DocId doc = 0;
    float dist = 0.0F;

    friend bool operator<(const Hit& a, const Hit& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.doc < b.doc);
    }
    friend bool operator==(const Hit& a, const Hit& b) = default;
};

struct SearchResult {
    std::vector<Hit> hits;   // ascending (dist, doc)
    std::size_t visited = 0; // distance evaluations
};

/// Hierarchical navigable small world graph over one partition.
///
/// Reported distances are Euclidean (not squared) or 1 - cos. Searches are
/// const and may run concurrently; insert and remove need exclusive access.
class HnswIndex {
 public:
    HnswIndex() = default;
    HnswIndex(HnswIndex&&) noexcept;
    HnswIndex& operator=(HnswIndex&&) noexcept;
    ~HnswIndex();

    /// `vectors` row i belongs to doc_ids[i].
    static HnswIndex build(const VectorSet& vectors, std::span<const DocId> doc_ids, const HnswParams& params,
                           std::uint64_t seed);
    /// Gathers the rows of `docs` from a dataset indexed by DocId.
    static HnswIndex build_for_docs(const VectorSet& dataset, std::span<const DocId> docs, const HnswParams& params,
                                    std::uint64_t seed);

    [[nodiscard]] SearchResult search(std::span<const float> query, std::size_t ef_search, std::size_t k) const;
    /// Plain search of width ef_search, then drop docs not in `allowed`.
    [[nodiscard]] SearchResult search_filtered(std::span<const float> query, std::size_t ef_search, std::size_t k,
                                               const DocBitmap& allowed) const;

    void insert(DocId doc, std::span<const float> vec);
    /// Tombstones the doc; rebuilds once tombstones exceed 20% of nodes.
    void remove(DocId doc);
    [[nodiscard]] bool contains(DocId doc) const;

    [[nodiscard]] std::size_t size() const {
        return num_nodes_ - num_deleted_;
    }
    [[nodiscard]] std::size_t dim() const {
        return dim_;
    }
    [[nodiscard]] std::size_t tombstones() const {
        return num_deleted_;
    }
    [[nodiscard]] std::size_t max_level() const {
        return static_cast<std::size_t>(std::max(max_level_, 0));
    }
    /// Live doc ids, ascending.
    [[nodiscard]] std::vector<DocId> doc_ids() const;
    /// Neighbors of the node holding `doc` at `level`, as doc ids.
    [[nodiscard]] std::vector<DocId> neighbors(DocId doc, std::size_t level) const;
    /// Checks structural invariants; throws InternalError.
    void check() const;

 private:
    struct VisitedList;
    using Candidate = std::pair<float, std::uint32_t>;

    [[nodiscard]] SearchResult run(std::span<const float> query, std::size_t ef_search, std::size_t k,
                                   const DocBitmap* allowed) const;
    void init(std::size_t dim, const HnswParams& params, std::uint64_t seed);
    void add_point(DocId doc, std::span<const float> vec);
    int random_level();
    [[nodiscard]] float dist_to(std::span<const float> q, std::uint32_t node) const;
    [[nodiscard]] float dist_nodes(std::uint32_t a, std::uint32_t b) const;
    [[nodiscard]] std::vector<Candidate> search_layer(std::span<const float> q, std::uint32_t entry, std::size_t ef,
                                                      int level, std::size_t& evals) const;
    [[nodiscard]] std::vector<Candidate> search_base(std::span<const float> q, std::size_t ef,
                                                     std::size_t& evals) const;
    std::vector<std::uint32_t> select_neighbors(std::vector<Candidate> candidates, std::size_t m) const;
    [[nodiscard]] std::span<const std::uint32_t> links(std::uint32_t node, int level) const;
    void set_links(std::uint32_t node, int level, std::span<const std::uint32_t> ids);
    [[nodiscard]] std::vector<float> prepare(std::span<const float> v) const;
    void rebuild();
    std::unique_ptr<VisitedList> acquire_visited() const;
    void release_visited(std::unique_ptr<VisitedList> v) const;

    HnswParams params_;
    std::uint64_t seed_ = 0;
    std::size_t dim_ = 0;
    std::size_t max_m_ = 0;
    std::size_t max_m0_ = 0;
    double level_mult_ = 0.0;
    std::mt19937_64 level_rng_;

    std::size_t num_nodes_ = 0;
    std::size_t num_deleted_ = 0;
    std::vector<float> vectors_;
    std::vector<DocId> doc_of_;
    std::vector<int> level_of_;
    std::vector<std::uint8_t> deleted_;
    std::vector<std::uint32_t> level0_;               // per node: count then max_m0_ ids
    std::vector<std::vector<std::uint32_t>> upper_;  // per node: per level count then max_m_ ids
    std::unordered_map<DocId, std::uint32_t> node_of_;
    std::uint32_t entry_ = 0;
    int max_level_ = -1;

    mutable std::unique_ptr<std::mutex> pool_mutex_ = std::make_unique<std::mutex>();
    mutable std::vector<std::unique_ptr<VisitedList>> pool_;
};

/// Exact top-k by full scan over rows of `vectors` (row i is doc_ids[i]),
/// optionally restricted to `allowed`. Ties break by ascending DocId.
SearchResult brute_force_topk(const VectorSet& vectors, std::span<const DocId> doc_ids, std::span<const float> query,
                              std::size_t k, const DocBitmap* allowed = nullptr, Metric metric = Metric::euclidean);

enum class MemoryMode { physical, logical };

/// physical: b_f * sum_j |pi_j| * (d + 3M); logical: b_f * (|D| d + 3M sum_j |pi_j|).
double index_memory_bytes(const PartitionPlan& plan, std::size_t dim, std::size_t M, double bytes_per_scalar,
                          MemoryMode mode);

}  // namespace permvec

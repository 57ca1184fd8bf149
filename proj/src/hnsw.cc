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

#include "permvec/hnsw.h"

#include <algorithm>
#include <cmath>
#include <queue>

#include <fmt/format.h>

#include "permvec/plan.h"

namespace permvec {

namespace {

float l2sq(const float* a, const float* b, std::size_t d) {
    float s0 = 0.0F;
    float s1 = 0.0F;
    float s2 = 0.0F;
    float s3 = 0.0F;
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) {
        const float t0 = a[i] - b[i];
        const float t1 = a[i + 1] - b[i + 1];
        const float t2 = a[i + 2] - b[i + 2];
        const float t3 = a[i + 3] - b[i + 3];
        s0 += t0 * t0;
        s1 += t1 * t1;
        s2 += t2 * t2;
        s3 += t3 * t3;
    }
    for (; i < d; ++i) {
        const float t = a[i] - b[i];
        s0 += t * t;
    }
    return (s0 + s1) + (s2 + s3);
}

float dot(const float* a, const float* b, std::size_t d) {
    float s0 = 0.0F;
    float s1 = 0.0F;
    float s2 = 0.0F;
    float s3 = 0.0F;
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < d; ++i) {
        s0 += a[i] * b[i];
    }
    return (s0 + s1) + (s2 + s3);
}

float raw_distance(Metric m, const float* a, const float* b, std::size_t d) {
    return m == Metric::euclidean ? l2sq(a, b, d) : 1.0F - dot(a, b, d);
}

float reported(Metric m, float raw) {
    return m == Metric::euclidean ? std::sqrt(raw) : std::max(0.0F, raw);
}

std::vector<float> normalized(std::span<const float> v) {
    std::vector<float> out(v.begin(), v.end());
    const float n = std::sqrt(dot(out.data(), out.data(), out.size()));
    if (n > 0.0F) {
        for (auto& x : out) {
            x /= n;
        }
    }
    return out;
}

}  // namespace

struct HnswIndex::VisitedList {
    std::vector<std::uint16_t> tags;
    std::uint16_t epoch = 0;

    void reset(std::size_t n) {
        if (tags.size() < n) {
            tags.resize(n, 0);
        }
        if (++epoch == 0) {
            std::fill(tags.begin(), tags.end(), 0);
            epoch = 1;
        }
    }
    bool visit(std::uint32_t node) {
        if (tags[node] == epoch) {
            return false;
        }
        tags[node] = epoch;
        return true;
    }
};

HnswIndex::HnswIndex(HnswIndex&&) noexcept = default;
HnswIndex& HnswIndex::operator=(HnswIndex&&) noexcept = default;
HnswIndex::~HnswIndex() = default;

void HnswIndex::init(std::size_t dim, const HnswParams& params, std::uint64_t seed) {
    if (params.M < 2) {
        throw DomainError("hnsw: M must be >= 2");
    }
    if (params.ef_construction < params.M) {
        throw DomainError("hnsw: ef_construction must be >= M");
    }
    if (dim == 0) {
        throw DomainError("hnsw: dimension must be >= 1");
    }
    params_ = params;
    seed_ = seed;
    dim_ = dim;
    max_m_ = params.M;
    max_m0_ = 2 * params.M;
    level_mult_ = 1.0 / std::log(static_cast<double>(params.M));
    level_rng_.seed(seed);
    num_nodes_ = 0;
    num_deleted_ = 0;
    vectors_.clear();
    doc_of_.clear();
    level_of_.clear();
    deleted_.clear();
    level0_.clear();
    upper_.clear();
    node_of_.clear();
    entry_ = 0;
    max_level_ = -1;
}

HnswIndex HnswIndex::build(const VectorSet& vectors, std::span<const DocId> doc_ids, const HnswParams& params,
                           std::uint64_t seed) {
    if (vectors.size() != doc_ids.size()) {
        throw DomainError(fmt::format("hnsw: {} vectors for {} doc ids", vectors.size(), doc_ids.size()));
    }
    if (doc_ids.empty()) {
        throw DomainError("hnsw: build needs at least one vector");
    }
    HnswIndex idx;
    idx.init(vectors.dim, params, seed);
    idx.vectors_.reserve(vectors.data.size());
    idx.node_of_.reserve(doc_ids.size());
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        idx.add_point(doc_ids[i], vectors.row(i));
    }
    return idx;
}

HnswIndex HnswIndex::build_for_docs(const VectorSet& dataset, std::span<const DocId> docs, const HnswParams& params,
                                    std::uint64_t seed) {
    VectorSet rows;
    rows.dim = dataset.dim;
    rows.data.reserve(docs.size() * dataset.dim);
    for (DocId d : docs) {
        if (d >= dataset.size()) {
            throw DomainError(fmt::format("hnsw: doc {} has no vector (dataset size {})", d, dataset.size()));
        }
        rows.append(dataset.row(d));
    }
    return build(rows, docs, params, seed);
}

std::vector<float> HnswIndex::prepare(std::span<const float> v) const {
    if (v.size() != dim_) {
        throw DomainError(fmt::format("hnsw: vector of dim {} for index of dim {}", v.size(), dim_));
    }
    if (params_.metric == Metric::cosine) {
        return normalized(v);
    }
    return {v.begin(), v.end()};
}

int HnswIndex::random_level() {
    const double u = static_cast<double>((level_rng_() >> 11) + 1) * 0x1.0p-53;
    return static_cast<int>(-std::log(u) * level_mult_);
}

float HnswIndex::dist_to(std::span<const float> q, std::uint32_t node) const {
    return raw_distance(params_.metric, q.data(), vectors_.data() + static_cast<std::size_t>(node) * dim_, dim_);
}

float HnswIndex::dist_nodes(std::uint32_t a, std::uint32_t b) const {
    return raw_distance(params_.metric, vectors_.data() + static_cast<std::size_t>(a) * dim_,
                        vectors_.data() + static_cast<std::size_t>(b) * dim_, dim_);
}

std::span<const std::uint32_t> HnswIndex::links(std::uint32_t node, int level) const {
    if (level == 0) {
        const std::uint32_t* p = level0_.data() + static_cast<std::size_t>(node) * (max_m0_ + 1);
        return {p + 1, p[0]};
    }
    const std::uint32_t* p = upper_[node].data() + static_cast<std::size_t>(level - 1) * (max_m_ + 1);
    return {p + 1, p[0]};
}

void HnswIndex::set_links(std::uint32_t node, int level, std::span<const std::uint32_t> ids) {
    std::uint32_t* p = level == 0 ? level0_.data() + static_cast<std::size_t>(node) * (max_m0_ + 1)
                                  : upper_[node].data() + static_cast<std::size_t>(level - 1) * (max_m_ + 1);
    p[0] = static_cast<std::uint32_t>(ids.size());
    std::copy(ids.begin(), ids.end(), p + 1);
}

std::unique_ptr<HnswIndex::VisitedList> HnswIndex::acquire_visited() const {
    std::unique_ptr<VisitedList> v;
    {
        std::lock_guard lock(*pool_mutex_);
        if (!pool_.empty()) {
            v = std::move(pool_.back());
            pool_.pop_back();
        }
    }
    if (!v) {
        v = std::make_unique<VisitedList>();
    }
    v->reset(num_nodes_);
    return v;
}

void HnswIndex::release_visited(std::unique_ptr<VisitedList> v) const {
    std::lock_guard lock(*pool_mutex_);
    pool_.push_back(std::move(v));
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(std::span<const float> q, std::uint32_t entry,
                                                          std::size_t ef, int level, std::size_t& evals) const {
    auto visited = acquire_visited();
    std::priority_queue<Candidate> top;
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    visited->visit(entry);
    const float d0 = dist_to(q, entry);
    ++evals;
    top.emplace(d0, entry);
    frontier.emplace(d0, entry);
    float bound = d0;
    while (!frontier.empty()) {
        const auto [cd, c] = frontier.top();
        if (cd > bound && top.size() >= ef) {
            break;
        }
        frontier.pop();
        for (std::uint32_t n : links(c, level)) {
            if (!visited->visit(n)) {
                continue;
            }
            const float dn = dist_to(q, n);
            ++evals;
            if (top.size() < ef || dn < bound) {
                frontier.emplace(dn, n);
                top.emplace(dn, n);
                if (top.size() > ef) {
                    top.pop();
                }
                bound = top.top().first;
            }
        }
    }
    release_visited(std::move(visited));
    std::vector<Candidate> out;
    out.reserve(top.size());
    while (!top.empty()) {
        out.push_back(top.top());
        top.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_base(std::span<const float> q, std::size_t ef,
                                                         std::size_t& evals) const {
    std::uint32_t cur = entry_;
    float cur_d = dist_to(q, cur);
    ++evals;
    for (int level = max_level_; level > 0; --level) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::uint32_t n : links(cur, level)) {
                const float d = dist_to(q, n);
                ++evals;
                if (d < cur_d) {
                    cur_d = d;
                    cur = n;
                    changed = true;
                }
            }
        }
    }
    return search_layer(q, cur, ef, 0, evals);
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(std::vector<Candidate> candidates, std::size_t m) const {
    std::sort(candidates.begin(), candidates.end());
    std::vector<std::uint32_t> kept;
    if (candidates.size() <= m) {
        for (const auto& c : candidates) {
            kept.push_back(c.second);
        }
        return kept;
    }
    for (const auto& [d, e] : candidates) {
        if (kept.size() >= m) {
            break;
        }
        bool good = true;
        for (std::uint32_t r : kept) {
            if (dist_nodes(e, r) < d) {
                good = false;
                break;
            }
        }
        if (good) {
            kept.push_back(e);
        }
    }
    return kept;
}

void HnswIndex::add_point(DocId doc, std::span<const float> vec) {
    if (node_of_.contains(doc)) {
        throw DomainError(fmt::format("hnsw: doc {} already indexed", doc));
    }
    const std::vector<float> v = prepare(vec);
    const auto node = static_cast<std::uint32_t>(num_nodes_++);
    const int level = random_level();
    vectors_.insert(vectors_.end(), v.begin(), v.end());
    doc_of_.push_back(doc);
    level_of_.push_back(level);
    deleted_.push_back(0);
    level0_.resize(level0_.size() + max_m0_ + 1, 0);
    upper_.emplace_back(static_cast<std::size_t>(level) * (max_m_ + 1), 0);
    node_of_.emplace(doc, node);

    if (max_level_ < 0) {
        entry_ = node;
        max_level_ = level;
        return;
    }
    std::size_t evals = 0;
    std::uint32_t cur = entry_;
    float cur_d = dist_to(v, cur);
    for (int l = max_level_; l > level; --l) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::uint32_t n : links(cur, l)) {
                const float d = dist_to(v, n);
                if (d < cur_d) {
                    cur_d = d;
                    cur = n;
                    changed = true;
                }
            }
        }
    }
    for (int l = std::min(level, max_level_); l >= 0; --l) {
        auto cands = search_layer(v, cur, params_.ef_construction, l, evals);
        cur = cands.front().second;
        const auto chosen = select_neighbors(cands, max_m_);
        set_links(node, l, chosen);
        const std::size_t cap = l == 0 ? max_m0_ : max_m_;
        for (std::uint32_t n : chosen) {
            const auto existing = links(n, l);
            if (existing.size() < cap) {
                std::vector<std::uint32_t> grown(existing.begin(), existing.end());
                grown.push_back(node);
                set_links(n, l, grown);
                continue;
            }
            std::vector<Candidate> pool;
            pool.reserve(existing.size() + 1);
            pool.emplace_back(dist_nodes(n, node), node);
            for (std::uint32_t e : existing) {
                pool.emplace_back(dist_nodes(n, e), e);
            }
            set_links(n, l, select_neighbors(std::move(pool), cap));
        }
    }
    if (level > max_level_) {
        entry_ = node;
        max_level_ = level;
    }
}

SearchResult HnswIndex::search(std::span<const float> query, std::size_t ef_search, std::size_t k) const {
    return run(query, ef_search, k, nullptr);
}

SearchResult HnswIndex::search_filtered(std::span<const float> query, std::size_t ef_search, std::size_t k,
                                        const DocBitmap& allowed) const {
    return run(query, ef_search, k, &allowed);
}

SearchResult HnswIndex::run(std::span<const float> query, std::size_t ef_search, std::size_t k,
                            const DocBitmap* allowed) const {
    SearchResult res;
    if (num_nodes_ == 0 || k == 0) {
        return res;
    }
    const std::vector<float> q = prepare(query);
    const auto cands = search_base(q, std::max(ef_search, k), res.visited);
    for (const auto& [d, node] : cands) {
        if (deleted_[node] || (allowed != nullptr && !allowed->test(doc_of_[node]))) {
            continue;
        }
        res.hits.push_back({doc_of_[node], reported(params_.metric, d)});
    }
    std::sort(res.hits.begin(), res.hits.end());
    if (res.hits.size() > k) {
        res.hits.resize(k);
    }
    return res;
}

void HnswIndex::insert(DocId doc, std::span<const float> vec) {
    if (dim_ == 0) {
        throw DomainError("hnsw: insert into an uninitialized index");
    }
    add_point(doc, vec);
}

void HnswIndex::remove(DocId doc) {
    auto it = node_of_.find(doc);
    if (it == node_of_.end()) {
        throw DomainError(fmt::format("hnsw: doc {} not indexed", doc));
    }
    const std::uint32_t node = it->second;
    node_of_.erase(it);
    deleted_[node] = 1;
    ++num_deleted_;
    if (num_deleted_ * 5 > num_nodes_) {
        rebuild();
    }
}

bool HnswIndex::contains(DocId doc) const {
    return node_of_.contains(doc);
}

void HnswIndex::rebuild() {
    std::vector<DocId> docs;
    std::vector<float> vecs;
    for (std::uint32_t n = 0; n < num_nodes_; ++n) {
        if (deleted_[n]) {
            continue;
        }
        docs.push_back(doc_of_[n]);
        vecs.insert(vecs.end(), vectors_.begin() + static_cast<std::ptrdiff_t>(n * dim_),
                    vectors_.begin() + static_cast<std::ptrdiff_t>((n + 1) * dim_));
    }
    const std::size_t dim = dim_;
    init(dim, params_, seed_);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        add_point(docs[i], std::span<const float>(vecs.data() + i * dim, dim));
    }
}

std::vector<DocId> HnswIndex::doc_ids() const {
    std::vector<DocId> out;
    out.reserve(size());
    for (std::uint32_t n = 0; n < num_nodes_; ++n) {
        if (!deleted_[n]) {
            out.push_back(doc_of_[n]);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<DocId> HnswIndex::neighbors(DocId doc, std::size_t level) const {
    auto it = node_of_.find(doc);
    if (it == node_of_.end()) {
        throw DomainError(fmt::format("hnsw: doc {} not indexed", doc));
    }
    std::vector<DocId> out;
    if (static_cast<int>(level) > level_of_[it->second]) {
        return out;
    }
    for (std::uint32_t n : links(it->second, static_cast<int>(level))) {
        out.push_back(doc_of_[n]);
    }
    return out;
}

void HnswIndex::check() const {
    if (num_nodes_ == 0) {
        return;
    }
    if (level_of_[entry_] != max_level_) {
        throw InternalError("hnsw: entry point is not on the top level");
    }
    for (std::uint32_t n = 0; n < num_nodes_; ++n) {
        if (level_of_[n] > max_level_) {
            throw InternalError("hnsw: node above the top level");
        }
        for (int l = 0; l <= level_of_[n]; ++l) {
            const auto ids = links(n, l);
            if (ids.size() > (l == 0 ? max_m0_ : max_m_)) {
                throw InternalError("hnsw: neighbor list over capacity");
            }
            for (std::uint32_t e : ids) {
                if (e >= num_nodes_ || e == n || level_of_[e] < l) {
                    throw InternalError(fmt::format("hnsw: bad edge {} -> {} at level {}", n, e, l));
                }
            }
        }
    }
}

SearchResult brute_force_topk(const VectorSet& vectors, std::span<const DocId> doc_ids, std::span<const float> query,
                              std::size_t k, const DocBitmap* allowed, Metric metric) {
    if (vectors.size() != doc_ids.size()) {
        throw DomainError("brute_force_topk: vectors and doc ids differ in length");
    }
    if (query.size() != vectors.dim) {
        throw DomainError("brute_force_topk: query dimension mismatch");
    }
    SearchResult res;
    const std::vector<float> q = metric == Metric::cosine ? normalized(query) : std::vector<float>(query.begin(), query.end());
    std::vector<Hit> all;
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        if (allowed != nullptr && !allowed->test(doc_ids[i])) {
            continue;
        }
        float raw = 0.0F;
        if (metric == Metric::cosine) {
            const auto v = normalized(vectors.row(i));
            raw = raw_distance(metric, q.data(), v.data(), q.size());
        } else {
            raw = raw_distance(metric, q.data(), vectors.row(i).data(), q.size());
        }
        ++res.visited;
        all.push_back({doc_ids[i], reported(metric, raw)});
    }
    const std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end());
    all.resize(keep);
    res.hits = std::move(all);
    return res;
}

double index_memory_bytes(const PartitionPlan& plan, std::size_t dim, std::size_t M, double bytes_per_scalar,
                          MemoryMode mode) {
    if (plan.size() == 0) {
        throw DomainError("index_memory_bytes: empty plan");
    }
    const double total = static_cast<double>(plan.total_docs());
    const double d = static_cast<double>(dim);
    const double links = 3.0 * static_cast<double>(M);
    if (mode == MemoryMode::physical) {
        return bytes_per_scalar * total * (d + links);
    }
    return bytes_per_scalar * (static_cast<double>(plan.num_docs) * d + links * total);
}

}  // namespace permvec

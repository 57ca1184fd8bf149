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

#include "permvec/query_engine.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "permvec/partitioner.h"

namespace permvec {

namespace {

constexpr std::uint32_t kNoSlot = std::numeric_limits<std::uint32_t>::max();

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void require_nonempty(const QueryWorkload& w, const char* what) {
    if (w.queries.empty()) {
        throw DomainError(fmt::format("{}: empty workload", what));
    }
}

}  // namespace

const DocBitmap& Deployment::auth_of(UserId u) const {
    if (u >= auth_slot.size() || auth_slot[u] == kNoSlot) {
        throw DomainError(fmt::format("user {} is not deployed", u));
    }
    return auth_bits[auth_slot[u]];
}

void Deployment::refresh_auth() {
    auth_bits.clear();
    auth_slot.assign(policy.num_users(), kNoSlot);
    const std::size_t universe = std::max(policy.num_docs(), vectors ? vectors->size() : 0);
    std::map<std::vector<RoleId>, std::uint32_t> slot_of;
    for (UserId u : policy.active_users()) {
        const auto& roles = policy.roles_of(u);
        auto [it, fresh] = slot_of.try_emplace(roles, static_cast<std::uint32_t>(auth_bits.size()));
        if (fresh) {
            auth_bits.emplace_back(universe, auth_user(policy, u));
        }
        auth_slot[u] = it->second;
    }
}

std::uint64_t partition_seed(std::uint64_t seed, PartitionId p) {
    // splitmix64 finalizer over (seed, p).
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(p) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Deployment deploy(RbacPolicy policy, PartitionPlan plan, std::shared_ptr<const VectorSet> vectors,
                  const HnswParams& hnsw, std::size_t ef_s, std::uint64_t seed) {
    if (!vectors) {
        throw DomainError("deploy: no vectors");
    }
    if (vectors->size() < policy.num_docs()) {
        throw DomainError(
            fmt::format("deploy: {} vectors for a policy over {} docs", vectors->size(), policy.num_docs()));
    }
    if (ef_s == 0) {
        throw DomainError("deploy: ef_s must be positive");
    }
    Deployment dep;
    dep.routing = build_routing(policy, plan);
    dep.policy = std::move(policy);
    dep.plan = std::move(plan);
    dep.vectors = std::move(vectors);
    dep.hnsw = hnsw;
    dep.seed = seed;
    dep.ef_s = ef_s;
    dep.indexes.reserve(dep.plan.size());
    for (PartitionId p = 0; p < dep.plan.size(); ++p) {
        dep.indexes.push_back(
            HnswIndex::build_for_docs(*dep.vectors, dep.plan.partitions[p], hnsw, partition_seed(seed, p)));
    }
    dep.refresh_auth();
    return dep;
}

std::pair<SearchResult, QueryStats> execute(const Deployment& dep, UserId u, std::span<const float> query,
                                            std::size_t k) {
    if (k == 0) {
        throw DomainError("execute: k must be positive");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const DocBitmap& allowed = dep.auth_of(u);
    const auto& route = dep.routing.of_user(u);
    const std::size_t ef = std::max(dep.ef_s, k);

    QueryStats stats;
    std::vector<Hit> merged;
    for (PartitionId p : route) {
        auto part = dep.indexes.at(p).search_filtered(query, ef, k, allowed);
        stats.distance_evals += part.visited;
        merged.insert(merged.end(), part.hits.begin(), part.hits.end());
    }
    stats.partitions_touched = route.size();

    // Replicated docs keep their smallest distance.
    std::sort(merged.begin(), merged.end(), [](const Hit& a, const Hit& b) {
        return a.doc < b.doc || (a.doc == b.doc && a.dist < b.dist);
    });
    merged.erase(std::unique(merged.begin(), merged.end(), [](const Hit& a, const Hit& b) { return a.doc == b.doc; }),
                 merged.end());
    const std::size_t keep = std::min(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep), merged.end());
    merged.resize(keep);

    SearchResult res;
    res.hits = std::move(merged);
    res.visited = stats.distance_evals;
    stats.wall_seconds = seconds_since(t0);
    return {std::move(res), stats};
}

GroundTruth compute_ground_truth(const RbacPolicy& policy, const QueryWorkload& workload, const VectorSet& dataset,
                                 Metric metric) {
    std::vector<DocId> ids(dataset.size());
    std::iota(ids.begin(), ids.end(), DocId{0});
    std::map<std::vector<RoleId>, DocBitmap> bits;
    GroundTruth truth;
    truth.reserve(workload.queries.size());
    for (const auto& q : workload.queries) {
        if (q.vec >= dataset.size()) {
            throw DomainError(fmt::format("query row {} outside dataset of {}", q.vec, dataset.size()));
        }
        const auto& roles = policy.roles_of(q.user);
        auto it = bits.find(roles);
        if (it == bits.end()) {
            it = bits.emplace(roles, DocBitmap(dataset.size(), auth_user(policy, q.user))).first;
        }
        auto res = brute_force_topk(dataset, ids, dataset.row(q.vec), workload.k, &it->second, metric);
        std::vector<DocId> docs;
        docs.reserve(res.hits.size());
        for (const auto& h : res.hits) {
            docs.push_back(h.doc);
        }
        truth.push_back(std::move(docs));
    }
    return truth;
}

double recall_of(const SearchResult& res, const std::vector<DocId>& truth) {
    if (truth.empty()) {
        return 1.0;
    }
    std::size_t found = 0;
    for (const auto& h : res.hits) {
        if (std::find(truth.begin(), truth.end(), h.doc) != truth.end()) {
            ++found;
        }
    }
    return static_cast<double>(found) / static_cast<double>(truth.size());
}

double measure_recall(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset) {
    require_nonempty(workload, "measure_recall");
    return measure_recall(dep, workload, dataset, compute_ground_truth(dep.policy, workload, dataset, dep.hnsw.metric));
}

double measure_recall(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                      const GroundTruth& truth) {
    require_nonempty(workload, "measure_recall");
    if (truth.size() != workload.queries.size()) {
        throw DomainError("measure_recall: ground truth does not match the workload");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < workload.queries.size(); ++i) {
        const auto& q = workload.queries[i];
        auto [res, stats] = execute(dep, q.user, dataset.row(q.vec), workload.k);
        sum += recall_of(res, truth[i]);
    }
    return sum / static_cast<double>(workload.queries.size());
}

LatencyReport measure_latency(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                              std::size_t repeats) {
    require_nonempty(workload, "measure_latency");
    if (repeats < 2) {
        throw DomainError("measure_latency: repeats must be at least 2");
    }
    double secs = 0.0;
    double evals = 0.0;
    for (const auto& q : workload.queries) {
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            auto [res, stats] = execute(dep, q.user, dataset.row(q.vec), workload.k);
            if (rep == 0) {
                continue;
            }
            secs += stats.wall_seconds;
            evals += static_cast<double>(stats.distance_evals);
        }
    }
    const double n = static_cast<double>(workload.queries.size() * (repeats - 1));
    return {secs / n, evals / n};
}

std::vector<QueryRecord> run_queries(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                                     const GroundTruth& truth, std::size_t repeats) {
    if (repeats < 2) {
        throw DomainError("run_queries: repeats must be at least 2");
    }
    if (truth.size() != workload.queries.size()) {
        throw DomainError("run_queries: ground truth does not match the workload");
    }
    std::vector<QueryRecord> out;
    out.reserve(workload.queries.size());
    for (std::size_t i = 0; i < workload.queries.size(); ++i) {
        const auto& q = workload.queries[i];
        QueryRecord rec{i, q.user, workload.k, 0.0, 0, 0.0};
        double secs = 0.0;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            auto [res, stats] = execute(dep, q.user, dataset.row(q.vec), workload.k);
            if (rep == 0) {
                rec.recall = recall_of(res, truth[i]);
                continue;
            }
            secs += stats.wall_seconds;
            rec.dist_evals = stats.distance_evals;
        }
        rec.wall_us = secs / static_cast<double>(repeats - 1) * 1e6;
        out.push_back(rec);
    }
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) {
        throw DomainError("cannot write " + p.string());
    }
    return os;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) {
        throw DomainError("cannot read " + p.string());
    }
    return is;
}

}  // namespace

void save_deployment(const Deployment& dep, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    {
        auto os = open_out(root / "policy.txt");
        write_policy(os, dep.policy);
    }
    {
        auto os = open_out(root / "plan.txt");
        write_plan(os, dep.plan);
    }
    {
        auto os = open_out(root / "routing.txt");
        write_routing(os, dep.routing, dep.policy);
    }
    {
        auto os = open_out(root / "deploy.txt");
        os << "M=" << dep.hnsw.M << '\n'
           << "ef_construction=" << dep.hnsw.ef_construction << '\n'
           << "metric=" << (dep.hnsw.metric == Metric::cosine ? "cosine" : "euclidean") << '\n'
           << "ef_s=" << dep.ef_s << '\n'
           << "seed=" << dep.seed << '\n';
    }
    write_fvecs((root / "vectors.fvecs").string(), *dep.vectors);
}

Deployment load_deployment(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    RbacPolicy policy;
    {
        auto is = open_in(root / "policy.txt");
        policy = read_policy(is);
    }
    PartitionPlan plan;
    {
        auto is = open_in(root / "plan.txt");
        plan = read_plan(is, policy);
    }
    HnswParams hnsw;
    std::size_t ef_s = 10;
    std::uint64_t seed = 0;
    {
        auto is = open_in(root / "deploy.txt");
        std::string line;
        while (std::getline(is, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                continue;
            }
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 1);
            if (key == "M") {
                hnsw.M = std::stoul(val);
            } else if (key == "ef_construction") {
                hnsw.ef_construction = std::stoul(val);
            } else if (key == "metric") {
                if (val != "euclidean" && val != "cosine") {
                    throw DomainError("deploy.txt: unknown metric " + val);
                }
                hnsw.metric = val == "cosine" ? Metric::cosine : Metric::euclidean;
            } else if (key == "ef_s") {
                ef_s = std::stoul(val);
            } else if (key == "seed") {
                seed = std::stoull(val);
            } else {
                throw DomainError("deploy.txt: unknown key " + key);
            }
        }
    }
    auto vectors = std::make_shared<const VectorSet>(read_fvecs((root / "vectors.fvecs").string()));
    Deployment dep = deploy(std::move(policy), std::move(plan), std::move(vectors), hnsw, ef_s, seed);
    if (fs::exists(root / "routing.txt")) {
        auto is = open_in(root / "routing.txt");
        auto stored = read_routing(is, dep.policy);
        // Incremental updates may leave routes a fresh cover would not pick;
        // keep them as long as they still cover auth(u).
        for (UserId u : dep.policy.active_users()) {
            DocList covered;
            for (PartitionId p : stored.user_routes[u]) {
                if (p >= dep.plan.size()) {
                    throw DomainError(fmt::format("routing.txt: user {} routed to unknown partition {}", u, p));
                }
                covered = union_of(covered, dep.plan.partitions[p]);
            }
            if (!is_subset(auth_user(dep.policy, u), covered)) {
                throw DomainError(fmt::format("routing.txt: route of user {} does not cover its documents", u));
            }
            dep.routing.user_routes[u] = std::move(stored.user_routes[u]);
        }
    }
    return dep;
}

}  // namespace permvec

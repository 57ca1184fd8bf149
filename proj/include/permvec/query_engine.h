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

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "permvec/dataset.h"
#include "permvec/hnsw.h"
#include "permvec/plan.h"
#include "permvec/rbac.h"
#include "permvec/workload.h"

namespace permvec {

/// A plan with one built index per partition, ready to serve queries.
struct Deployment {
    RbacPolicy policy;
    PartitionPlan plan;
    RoutingTable routing;
    std::vector<HnswIndex> indexes;
    std::shared_ptr<const VectorSet> vectors;  // row i is DocId i
    HnswParams hnsw;
    std::uint64_t seed = 0;
    std::size_t ef_s = 10;

    // Auth bitmap per distinct role set, and each user's slot in it.
    std::vector<DocBitmap> auth_bits;
    std::vector<std::uint32_t> auth_slot;

    [[nodiscard]] const DocBitmap& auth_of(UserId u) const;
    /// Recomputes the auth bitmaps after a policy change.
    void refresh_auth();
};

/// Index seed for partition p of a deployment seeded with `seed`.
std::uint64_t partition_seed(std::uint64_t seed, PartitionId p);

/// Builds routing and every partition index.
Deployment deploy(RbacPolicy policy, PartitionPlan plan, std::shared_ptr<const VectorSet> vectors,
                  const HnswParams& hnsw, std::size_t ef_s, std::uint64_t seed);

struct QueryStats {
    double wall_seconds = 0.0;
    std::size_t distance_evals = 0;
    std::size_t partitions_touched = 0;
};

/// Searches every routed partition with post-filtering, merges by doc
/// (keeping the smaller distance), returns the global top-k.
std::pair<SearchResult, QueryStats> execute(const Deployment& dep, UserId u, std::span<const float> query,
                                            std::size_t k);

/// Exact top-k doc ids over the full dataset restricted to auth(u), one
/// list per workload query.
using GroundTruth = std::vector<std::vector<DocId>>;
GroundTruth compute_ground_truth(const RbacPolicy& policy, const QueryWorkload& workload, const VectorSet& dataset,
                                 Metric metric = Metric::euclidean);

/// |hits ∩ truth| / |truth| where |truth| = min(k, |auth|).
double recall_of(const SearchResult& res, const std::vector<DocId>& truth);

double measure_recall(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset);
double measure_recall(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                      const GroundTruth& truth);

struct LatencyReport {
    double mean_wall_seconds = 0.0;
    double mean_distance_evals = 0.0;
};

/// Runs each query `repeats` times and averages all but the first run.
LatencyReport measure_latency(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                              std::size_t repeats = 2);

struct QueryRecord {
    std::size_t qid = 0;
    UserId user = 0;
    std::size_t k = 0;
    double wall_us = 0.0;
    std::size_t dist_evals = 0;
    double recall = 0.0;
};

/// Per-query timing (warm-up run discarded), work and recall.
std::vector<QueryRecord> run_queries(const Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                                     const GroundTruth& truth, std::size_t repeats = 2);

/// Directory layout: policy.txt, plan.txt, routing.txt, deploy.txt,
/// vectors.fvecs. Indexes are rebuilt on load from the stored seed.
void save_deployment(const Deployment& dep, const std::string& dir);
Deployment load_deployment(const std::string& dir);

}  // namespace permvec

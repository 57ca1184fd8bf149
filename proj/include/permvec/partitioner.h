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

#include <cstddef>
#include <optional>
#include <vector>

#include "permvec/perf_model.h"
#include "permvec/plan.h"
#include "permvec/rbac.h"

namespace permvec {

/// How user costs are averaged in the objective.
enum class Objective {
    user_average,      // every user weighs 1
    role_average,      // every role's users share one unit of weight
    workload_weighted  // SplitConfig::user_weights, e.g. query counts
};

struct SplitConfig {
    double alpha = 1.5;    // memory budget, sum |pi| <= alpha |D|
    double epsilon = 0.9;  // recall target
    double eta = 0.0;      // tolerated user-cost regression per split
    std::size_t k = 10;
    std::size_t ef_cap = kDefaultEfCap;
    CostModel model;
    RecallParams recall;
    Objective objective = Objective::user_average;
    std::vector<double> user_weights;

    void validate() const;
};

/// Per-user weights implied by the objective.
std::vector<double> objective_weights(const RbacPolicy& policy, const SplitConfig& config);

/// Greedy cover of each user's (and role's) auth set by the fewest
/// partitions: repeatedly take the partition covering the most uncovered
/// docs, ties to the smaller partition, then the lower id. Roles whose docs
/// no partition set covers get an empty route.
RoutingTable build_routing(const RbacPolicy& policy, const PartitionPlan& plan);

/// The build_routing cover for a single doc set; empty when the plan
/// cannot cover it.
std::vector<PartitionId> route_auth(const PartitionPlan& plan, const DocList& auth);
/// sum |pi| / |D|.
double plan_memory_ratio(const PartitionPlan& plan, const RbacPolicy& policy);

struct PlanEval {
    RoutingTable routing;
    double memory_ratio = 0.0;
    double user_sel = 0.0;  // objective-weighted mean user selectivity
    double role_sel = 0.0;  // mean role selectivity
    EfSolution ef_user;
    EfSolution ef_role;
    double user_cost = 0.0;  // objective-weighted mean of user_cost at ef_user
    double role_cost = 0.0;  // mean role_cost at ef_role
};

PlanEval evaluate_plan(const RbacPolicy& policy, const PartitionPlan& plan, const SplitConfig& config);

/// Greedy split under the memory budget: starting from one partition
/// holding D, repeatedly peel roles off the largest splittable partition.
PartitionPlan greedy_split(const RbacPolicy& policy, const SplitConfig& config);

struct SplitCandidate {
    RoleId role = 0;
    long long delta_size = 0;   // change of sum |pi|
    double delta_role = 0.0;    // new minus old mean role cost
    double delta_user = 0.0;    // new minus old objective user cost
    bool within_budget = true;
    bool accepted = false;      // passes the cost gate and the budget
};

/// Highest-scoring accepted candidate: moves that shrink total size come
/// first (by improvement), the rest by improvement per added doc.
std::optional<RoleId> select_split(const std::vector<SplitCandidate>& candidates);

/// Best role to move from src to dst (dst == plan.size() opens a new
/// partition), or nullopt when no candidate passes the gate.
std::optional<RoleId> find_best_split(const RbacPolicy& policy, const PartitionPlan& plan, PartitionId src,
                                      PartitionId dst, const SplitConfig& config);

/// Reference evaluation of one move by rebuilding the plan and routing
/// from scratch. Slow; used to check the incremental evaluator.
SplitCandidate evaluate_split(const RbacPolicy& policy, const PartitionPlan& plan, RoleId r, PartitionId src,
                              PartitionId dst, const SplitConfig& config);

/// Applies a move to a plan (dst == plan.size() appends a partition).
PartitionPlan move_role(const RbacPolicy& policy, const PartitionPlan& plan, RoleId r, PartitionId src,
                        PartitionId dst);

struct ExhaustiveResult {
    PartitionPlan plan;
    double cost = 0.0;
    bool feasible = false;
};

/// Enumerates every grouping of the active roles (at most max_roles) and
/// returns the lowest objective user cost among plans within budget whose
/// modeled recall reaches epsilon.
ExhaustiveResult exhaustive_optimum(const RbacPolicy& policy, const SplitConfig& config, std::size_t max_roles = 6);

// Baselines.
PartitionPlan single_partition_plan(const RbacPolicy& policy);
PartitionPlan role_partition_plan(const RbacPolicy& policy);
/// One partition per distinct role combination among active users. Roles
/// repeat across partitions, so validate() does not apply.
PartitionPlan user_partition_plan(const RbacPolicy& policy);

/// Plan whose partitions are unions of the given role groups; a group
/// holding every active role becomes the whole document set.
PartitionPlan plan_from_groups(const RbacPolicy& policy, const std::vector<std::vector<RoleId>>& groups);

}  // namespace permvec

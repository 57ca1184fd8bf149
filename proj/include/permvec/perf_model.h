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
#include <iosfwd>
#include <vector>

#include "permvec/types.h"

namespace permvec {

class RbacPolicy;
struct PartitionPlan;
struct RoutingTable;

/// Search time per log-doc is a * ef_s + b, in seconds. Defaults come from
/// a reference fit on 64-d Gaussian data (M=16, ef_construction=64).
struct LatencyParams {
    double a = 5.1e-8;
    double b = 3.2e-6;
};

/// Piecewise recall curve: linear below ef_s = gamma k / s, shifted
/// sigmoid above.
struct RecallParams {
    double beta = 1.8;
    double gamma = 0.47;
};

enum class CostKind { hnsw_postfilter, acorn, hybrid };

struct CostModel {
    CostKind kind = CostKind::hnsw_postfilter;
    LatencyParams latency;
    double dim = 128.0;        // acorn
    double gamma_acorn = 32.0; // acorn neighbor expansion
    double c_pred = 1e-9;      // hybrid, per-vector predicate cost (s)
    double c_bf = 2e-8;        // hybrid, per-distance brute-force cost (s)

    static CostModel hnsw(LatencyParams lp);
    static CostModel acorn(double dim, double gamma_acorn);
    static CostModel hybrid(LatencyParams lp, double c_pred, double c_bf);
};

/// Cost of searching one partition of n docs at selectivity s.
double partition_cost(const CostModel& model, double n, double ef_s, double s, double k);

/// Selectivity where the hybrid model's post-filter and brute-force
/// branches cost the same; may exceed 1 (post-filter everywhere).
double hybrid_threshold(const CostModel& model, double n, double k);

/// Sum of partition_cost over P*(u); s is the user's per-partition ratio.
double user_cost(const CostModel& model, const RbacPolicy& policy, const PartitionPlan& plan,
                 const RoutingTable& routing, UserId u, double ef_s, double k);
double role_cost(const CostModel& model, const RbacPolicy& policy, const PartitionPlan& plan,
                 const RoutingTable& routing, RoleId r, double ef_s, double k);

double recall_estimate(const RecallParams& rp, double ef_s, double mean_sel, double k);

struct EfSolution {
    std::size_t ef_s = 0;
    bool capped = false;  // target not reachable at the cap
};

inline constexpr std::size_t kDefaultEfCap = 1000;

/// Smallest integer ef_s with recall_estimate >= target, clamped to [k, cap].
EfSolution solve_ef_s(const RecallParams& rp, double target, double mean_sel, std::size_t k,
                      std::size_t cap = kDefaultEfCap);

struct LatencySample {
    double partition_size = 0;
    double ef_s = 0;
    double seconds = 0;
};

struct LatencyFit {
    LatencyParams params;
    double r2 = 0.0;
};

/// Least squares of mean(seconds / log size) per ef_s against ef_s.
LatencyFit fit_latency(const std::vector<LatencySample>& samples);

struct RecallSample {
    double ef_s = 0;
    double mean_sel = 0;
    double k = 0;
    double recall = 0;
};

/// 50x50 grid over beta in (0,5], gamma in (0,1), then 20 rounds of
/// coordinate descent.
RecallParams fit_recall(const std::vector<RecallSample>& samples);
double recall_rmse(const RecallParams& rp, const std::vector<RecallSample>& samples);

struct ModelParams {
    CostModel cost;
    RecallParams recall;
};

/// key=value lines: a, b, beta, gamma, plus kind and the alternate model
/// constants when they are not the defaults.
void write_model_params(std::ostream& os, const ModelParams& mp);
ModelParams read_model_params(std::istream& is);

}  // namespace permvec

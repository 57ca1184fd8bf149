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
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "permvec/partitioner.h"
#include "permvec/perf_model.h"
#include "permvec/query_engine.h"
#include "permvec/workload.h"

namespace permvec {

enum class Method { rls, role_partition, user_partition, greedy };

const char* method_name(Method m);
Method parse_method(const std::string& s);

/// Experiment description. Text form is one `key = value` per line ('#'
/// starts a comment); list values are comma separated.
///
///   dataset          synthetic | path to .fvecs/.bvecs
///   n, dim           synthetic size (n also caps rows read from a file)
///   data_seed        synthetic vector seed
///   generator        tree | uniform | erbac
///   preset           alpha | beta
///   users, roles     policy size (roles ignored by erbac)
///   baselines        subset of rls, role_partition, user_partition, greedy
///   alpha_sweep      budgets for greedy
///   recall_target    epsilon in (0, 1)
///   k_list, seeds    cells to run
///   queries          queries per cell
///   params           model parameter file; empty uses built-in defaults
///   M, ef_construction, ef_cap
///   output           CSV path
struct ExperimentConfig {
    std::string dataset = "synthetic";
    std::size_t n = 20000;
    std::size_t dim = 64;
    std::uint64_t data_seed = 7;
    std::string generator = "tree";
    std::string preset = "alpha";
    std::size_t users = 1000;
    std::size_t roles = 100;
    std::vector<Method> baselines{Method::rls, Method::role_partition, Method::user_partition, Method::greedy};
    std::vector<double> alpha_sweep{1.0, 1.5, 2.0, 3.0};
    double recall_target = 0.9;
    std::vector<std::size_t> k_list{10};
    std::vector<std::uint64_t> seeds{1};
    std::size_t queries = 200;
    std::string params;
    std::size_t M = 16;
    std::size_t ef_construction = 64;
    std::size_t ef_cap = kDefaultEfCap;
    std::string output = "results.csv";

    void set(const std::string& key, const std::string& value);
    void validate() const;
};

ExperimentConfig read_experiment_config(std::istream& is);

/// Policy for a generator name and preset over `num_docs` documents.
RbacPolicy make_policy(const std::string& generator, const std::string& preset, std::size_t num_docs,
                       std::size_t num_users, std::size_t num_roles, std::uint64_t seed);

/// The config's vectors: synthetic Gaussian or read from disk.
std::shared_ptr<const VectorSet> load_vectors(const ExperimentConfig& cfg);

struct TuneResult {
    std::size_t ef_s = 0;
    double recall = 0.0;
    std::size_t model_estimate = 0;
    std::size_t iterations = 0;  // bisection steps after the window is set
    bool warning = false;        // target not met at the cap
};

/// Smallest ef_s whose measured mean recall reaches epsilon, to within
/// `resolution` times the model estimate. Sets dep.ef_s to the result.
TuneResult tune_ef_s(Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                     const GroundTruth& truth, double epsilon, const RecallParams& recall,
                     std::size_t cap = kDefaultEfCap, double resolution = 0.1);
TuneResult tune_ef_s(Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset, double epsilon,
                     const RecallParams& recall, std::size_t cap = kDefaultEfCap, double resolution = 0.1);

/// Mean of per-query user selectivity on the deployment.
double workload_selectivity(const Deployment& dep, const QueryWorkload& workload);

PartitionPlan build_plan(Method m, const RbacPolicy& policy, const SplitConfig& config);

struct ExperimentRow {
    std::string method;
    double alpha_target = 0.0;  // NaN for fixed baselines
    double alpha_measured = 0.0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::size_t ef_s = 0;
    double mean_recall = 0.0;
    double mean_wall_us = 0.0;
    double mean_dist_evals = 0.0;
    std::size_t num_partitions = 0;
    bool warning = false;
};

inline constexpr const char* kCsvHeader =
    "method,alpha_target,alpha_measured,k,seed,ef_s,mean_recall,mean_wall_us,mean_dist_evals,num_partitions";

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const ExperimentRow& row);

/// Runs every (seed, method/alpha, k) cell. `log`, when set, receives one
/// progress line per row.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, const ModelParams& model,
                                          std::ostream* log = nullptr);

// Fitting protocols.

struct LatencyProtocol {
    std::vector<std::size_t> ef_values{10, 20, 50, 100, 200, 400, 800};
    std::size_t queries = 1000;
    std::size_t k = 10;
    std::uint64_t seed = 1;
};

struct LatencyProtocolResult {
    std::vector<LatencySample> samples;
    LatencyFit fit;
};

/// One role per user, one partition per role, so every query searches a
/// single partition with selectivity 1. Times each query at each ef_s.
LatencyProtocolResult run_latency_protocol(std::shared_ptr<const VectorSet> vectors, const HnswParams& hnsw,
                                           const LatencyProtocol& proto);

struct RecallProtocol {
    std::vector<std::size_t> ef_values{10, 15, 20, 30, 40, 50, 70, 100, 150, 200, 300, 400, 600, 800, 1000};
    std::size_t queries = 1000;
    std::size_t k = 10;
    std::uint64_t seed = 1;
};

/// Mean recall per ef_s of a single shared index for the given policy.
std::vector<RecallSample> recall_samples(const RbacPolicy& policy, std::shared_ptr<const VectorSet> vectors,
                                         const HnswParams& hnsw, const RecallProtocol& proto);

/// A policy whose users see about `selectivity` of the documents.
RbacPolicy selectivity_policy(std::size_t num_docs, double selectivity, std::size_t num_users,
                              std::size_t num_roles, std::uint64_t seed);

}  // namespace permvec

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

#include "permvec/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace permvec {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ls(s);
    std::string item;
    while (std::getline(ls, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const auto x = std::stoull(v, &used);
        if (used == v.size()) {
            return static_cast<std::size_t>(x);
        }
    } catch (const std::exception&) {
    }
    throw DomainError(fmt::format("config: {} expects a count, got '{}'", key, v));
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == v.size()) {
            return x;
        }
    } catch (const std::exception&) {
    }
    throw DomainError(fmt::format("config: {} expects a number, got '{}'", key, v));
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::rls:
            return "rls";
        case Method::role_partition:
            return "role_partition";
        case Method::user_partition:
            return "user_partition";
        case Method::greedy:
            return "greedy";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    for (Method m : {Method::rls, Method::role_partition, Method::user_partition, Method::greedy}) {
        if (s == method_name(m)) {
            return m;
        }
    }
    throw DomainError("unknown method '" + s + "'");
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "dataset") {
        dataset = value;
    } else if (key == "n") {
        n = to_size(key, value);
    } else if (key == "dim") {
        dim = to_size(key, value);
    } else if (key == "data_seed") {
        data_seed = to_size(key, value);
    } else if (key == "generator") {
        generator = value;
    } else if (key == "preset") {
        preset = value;
    } else if (key == "users") {
        users = to_size(key, value);
    } else if (key == "roles") {
        roles = to_size(key, value);
    } else if (key == "baselines") {
        baselines.clear();
        for (const auto& s : split_list(value)) {
            baselines.push_back(parse_method(s));
        }
    } else if (key == "alpha_sweep") {
        alpha_sweep.clear();
        for (const auto& s : split_list(value)) {
            alpha_sweep.push_back(to_double(key, s));
        }
    } else if (key == "recall_target") {
        recall_target = to_double(key, value);
    } else if (key == "k_list") {
        k_list.clear();
        for (const auto& s : split_list(value)) {
            k_list.push_back(to_size(key, s));
        }
    } else if (key == "seeds") {
        seeds.clear();
        for (const auto& s : split_list(value)) {
            seeds.push_back(to_size(key, s));
        }
    } else if (key == "queries") {
        queries = to_size(key, value);
    } else if (key == "params") {
        params = value;
    } else if (key == "M") {
        M = to_size(key, value);
    } else if (key == "ef_construction") {
        ef_construction = to_size(key, value);
    } else if (key == "ef_cap") {
        ef_cap = to_size(key, value);
    } else if (key == "output") {
        output = value;
    } else {
        throw DomainError("config: unknown key '" + key + "'");
    }
}

void ExperimentConfig::validate() const {
    if (generator != "tree" && generator != "uniform" && generator != "erbac") {
        throw DomainError("config: generator must be tree, uniform or erbac");
    }
    if (preset != "alpha" && preset != "beta") {
        throw DomainError("config: preset must be alpha or beta");
    }
    if (baselines.empty()) {
        throw DomainError("config: no baselines");
    }
    const bool has_greedy = std::find(baselines.begin(), baselines.end(), Method::greedy) != baselines.end();
    if (has_greedy && alpha_sweep.empty()) {
        throw DomainError("config: empty alpha_sweep");
    }
    for (double a : alpha_sweep) {
        if (!(a >= 1.0)) {
            throw DomainError(fmt::format("config: alpha {} < 1", a));
        }
    }
    if (!(recall_target > 0.0 && recall_target < 1.0)) {
        throw DomainError("config: recall_target must be in (0, 1)");
    }
    if (k_list.empty() || seeds.empty()) {
        throw DomainError("config: k_list and seeds must be non-empty");
    }
    for (auto k : k_list) {
        if (k == 0 || k > ef_cap) {
            throw DomainError(fmt::format("config: k {} outside [1, ef_cap]", k));
        }
    }
    if (queries == 0 || n == 0 || users == 0 || M < 2 || ef_construction == 0) {
        throw DomainError("config: queries, n, users, M and ef_construction must be positive");
    }
    if (dataset == "synthetic" && dim == 0) {
        throw DomainError("config: dim must be positive");
    }
}

ExperimentConfig read_experiment_config(std::istream& is) {
    ExperimentConfig cfg;
    std::string line;
    while (std::getline(is, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError("config: expected key = value: " + line);
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RbacPolicy make_policy(const std::string& generator, const std::string& preset, std::size_t num_docs,
                       std::size_t num_users, std::size_t num_roles, std::uint64_t seed) {
    if (generator == "tree") {
        if (preset != "alpha") {
            throw DomainError("tree generator has only the alpha preset");
        }
        return gen_tree(tree_alpha(num_docs, num_users, num_roles), seed);
    }
    if (generator == "uniform") {
        if (preset != "alpha") {
            throw DomainError("uniform generator has only the alpha preset");
        }
        return gen_uniform(uniform_alpha(num_docs, num_users, num_roles), seed);
    }
    if (generator == "erbac") {
        return gen_erbac(preset == "beta" ? erbac_beta(num_docs, num_users) : erbac_alpha(num_docs, num_users), seed);
    }
    throw DomainError("unknown generator '" + generator + "'");
}

std::shared_ptr<const VectorSet> load_vectors(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synthetic") {
        return std::make_shared<const VectorSet>(gen_vectors(cfg.n, cfg.dim, cfg.data_seed));
    }
    const auto ends_with = [&](const char* suffix) {
        const std::string s(suffix);
        return cfg.dataset.size() >= s.size() && cfg.dataset.compare(cfg.dataset.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".bvecs")) {
        return std::make_shared<const VectorSet>(read_bvecs(cfg.dataset, cfg.n));
    }
    return std::make_shared<const VectorSet>(read_fvecs(cfg.dataset, cfg.n));
}

double workload_selectivity(const Deployment& dep, const QueryWorkload& workload) {
    if (workload.queries.empty()) {
        throw DomainError("workload_selectivity: empty workload");
    }
    std::map<UserId, double> cache;
    double sum = 0.0;
    for (const auto& q : workload.queries) {
        auto it = cache.find(q.user);
        if (it == cache.end()) {
            it = cache.emplace(q.user, user_selectivity(dep.policy, q.user, dep.plan, dep.routing)).first;
        }
        sum += it->second;
    }
    return sum / static_cast<double>(workload.queries.size());
}

TuneResult tune_ef_s(Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset,
                     const GroundTruth& truth, double epsilon, const RecallParams& recall, std::size_t cap,
                     double resolution) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw DomainError(fmt::format("tune_ef_s: epsilon {} outside (0, 1)", epsilon));
    }
    if (!(resolution > 0.0)) {
        throw DomainError("tune_ef_s: resolution must be positive");
    }
    const std::size_t k = workload.k;
    cap = std::max(cap, k);
    std::map<std::size_t, double> measured;
    const auto recall_at = [&](std::size_t ef) {
        auto it = measured.find(ef);
        if (it == measured.end()) {
            dep.ef_s = ef;
            it = measured.emplace(ef, measure_recall(dep, workload, dataset, truth)).first;
        }
        return it->second;
    };

    TuneResult res;
    const double sel = workload_selectivity(dep, workload);
    const std::size_t est = std::clamp(solve_ef_s(recall, epsilon, sel, k, cap).ef_s, k, cap);
    res.model_estimate = est;
    const auto tol =
        std::max<std::size_t>(1, static_cast<std::size_t>(resolution * static_cast<double>(est)));

    std::size_t lo = 0;  // fails the target (or below k)
    std::size_t hi = 0;  // meets it
    if (recall_at(est) >= epsilon) {
        hi = est;
        const auto shrunk = static_cast<std::size_t>(std::floor(0.6 * static_cast<double>(est)));
        lo = shrunk < k ? k - 1 : shrunk;
        if (lo >= k && recall_at(lo) >= epsilon) {
            // The window did not bracket; keep shrinking.
            while (lo >= k && recall_at(lo) >= epsilon) {
                hi = lo;
                const auto next = static_cast<std::size_t>(std::floor(0.6 * static_cast<double>(lo)));
                lo = next < k ? k - 1 : next;
            }
        }
    } else {
        lo = est;
        hi = std::min(cap, static_cast<std::size_t>(std::ceil(1.4 * static_cast<double>(est))));
        while (recall_at(hi) < epsilon) {
            if (hi == cap) {
                res.ef_s = cap;
                res.recall = recall_at(cap);
                res.warning = true;
                dep.ef_s = cap;
                return res;
            }
            lo = hi;
            hi = std::min(cap, static_cast<std::size_t>(std::ceil(1.4 * static_cast<double>(hi))));
        }
    }
    while (hi - lo > tol) {
        const std::size_t mid = lo + (hi - lo) / 2;
        ++res.iterations;
        if (mid >= k && recall_at(mid) >= epsilon) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    res.ef_s = hi;
    res.recall = recall_at(hi);
    dep.ef_s = hi;
    return res;
}

TuneResult tune_ef_s(Deployment& dep, const QueryWorkload& workload, const VectorSet& dataset, double epsilon,
                     const RecallParams& recall, std::size_t cap, double resolution) {
    const auto truth = compute_ground_truth(dep.policy, workload, dataset, dep.hnsw.metric);
    return tune_ef_s(dep, workload, dataset, truth, epsilon, recall, cap, resolution);
}

PartitionPlan build_plan(Method m, const RbacPolicy& policy, const SplitConfig& config) {
    switch (m) {
        case Method::rls:
            return single_partition_plan(policy);
        case Method::role_partition:
            return role_partition_plan(policy);
        case Method::user_partition:
            return user_partition_plan(policy);
        case Method::greedy:
            return greedy_split(policy, config);
    }
    throw DomainError("unknown method");
}

void write_csv_header(std::ostream& os) {
    os << kCsvHeader << '\n';
}

void write_csv_row(std::ostream& os, const ExperimentRow& row) {
    const std::string target = std::isnan(row.alpha_target) ? "" : fmt::format("{:.4g}", row.alpha_target);
    os << fmt::format("{},{},{:.4f},{},{},{},{:.4f},{:.2f},{:.1f},{}\n", row.method, target, row.alpha_measured,
                      row.k, row.seed, row.ef_s, row.mean_recall, row.mean_wall_us, row.mean_dist_evals,
                      row.num_partitions);
}

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, const ModelParams& model, std::ostream* log) {
    cfg.validate();
    const auto vectors = load_vectors(cfg);
    if (vectors->size() < cfg.n) {
        throw DomainError(fmt::format("dataset has {} rows, config asks for {}", vectors->size(), cfg.n));
    }
    const HnswParams hnsw{cfg.M, cfg.ef_construction, Metric::euclidean};
    std::vector<ExperimentRow> rows;

    for (std::uint64_t seed : cfg.seeds) {
        const RbacPolicy policy = make_policy(cfg.generator, cfg.preset, cfg.n, cfg.users, cfg.roles, seed);
        std::vector<QueryWorkload> workloads;
        std::vector<GroundTruth> truths;
        for (std::size_t k : cfg.k_list) {
            workloads.push_back(gen_queries(policy, cfg.n, cfg.queries, k, seed * 1000003 + k));
            truths.push_back(compute_ground_truth(policy, workloads.back(), *vectors));
        }

        struct Cell {
            Method method;
            double alpha;
        };
        std::vector<Cell> cells;
        for (Method m : cfg.baselines) {
            if (m == Method::greedy) {
                for (double a : cfg.alpha_sweep) {
                    cells.push_back({m, a});
                }
            } else {
                cells.push_back({m, std::numeric_limits<double>::quiet_NaN()});
            }
        }

        for (const auto& cell : cells) {
            SplitConfig sc;
            sc.alpha = std::isnan(cell.alpha) ? 1.0 : cell.alpha;
            sc.epsilon = cfg.recall_target;
            sc.k = cfg.k_list.front();
            sc.ef_cap = cfg.ef_cap;
            sc.model = model.cost;
            sc.recall = model.recall;
            PartitionPlan plan = build_plan(cell.method, policy, sc);
            const double ratio = plan_memory_ratio(plan, policy);
            const std::size_t parts = plan.size();
            Deployment dep = deploy(policy, std::move(plan), vectors, hnsw, cfg.k_list.front(), seed);
            for (std::size_t i = 0; i < cfg.k_list.size(); ++i) {
                const auto& w = workloads[i];
                const auto tune = tune_ef_s(dep, w, *vectors, truths[i], cfg.recall_target, model.recall, cfg.ef_cap);
                const auto lat = measure_latency(dep, w, *vectors, 2);
                ExperimentRow row;
                row.method = method_name(cell.method);
                row.alpha_target = cell.method == Method::rls ? 1.0 : cell.alpha;
                row.alpha_measured = ratio;
                row.k = w.k;
                row.seed = seed;
                row.ef_s = tune.ef_s;
                row.mean_recall = tune.recall;
                row.mean_wall_us = lat.mean_wall_seconds * 1e6;
                row.mean_dist_evals = lat.mean_distance_evals;
                row.num_partitions = parts;
                row.warning = tune.warning;
                if (log != nullptr) {
                    *log << fmt::format("{} alpha={} k={} seed={}: ratio={:.3f} ef_s={} recall={:.3f} evals={:.0f}{}\n",
                                        row.method, row.alpha_target, row.k, seed, ratio, row.ef_s, row.mean_recall,
                                        row.mean_dist_evals, row.warning ? " WARNING: recall target not met" : "");
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

LatencyProtocolResult run_latency_protocol(std::shared_ptr<const VectorSet> vectors, const HnswParams& hnsw,
                                           const LatencyProtocol& proto) {
    if (proto.ef_values.size() < 2 || proto.queries == 0) {
        throw DomainError("latency protocol: need two ef_s values and some queries");
    }
    const std::size_t n = vectors->size();
    const RbacPolicy policy = gen_tree(tree_alpha(n), proto.seed);
    Deployment dep = deploy(policy, role_partition_plan(policy), vectors, hnsw, proto.k, proto.seed);
    const auto w = gen_queries(dep.policy, n, proto.queries, proto.k, proto.seed + 17);

    LatencyProtocolResult out;
    for (std::size_t ef : proto.ef_values) {
        dep.ef_s = std::max(ef, proto.k);
        for (const auto& q : w.queries) {
            const auto& route = dep.routing.of_user(q.user);
            double size = 0.0;
            for (PartitionId p : route) {
                size += static_cast<double>(dep.plan.partitions[p].size());
            }
            (void)execute(dep, q.user, vectors->row(q.vec), w.k);  // warm-up
            auto [res, stats] = execute(dep, q.user, vectors->row(q.vec), w.k);
            out.samples.push_back({size, static_cast<double>(dep.ef_s), stats.wall_seconds});
        }
    }
    out.fit = fit_latency(out.samples);
    return out;
}

RbacPolicy selectivity_policy(std::size_t num_docs, double selectivity, std::size_t num_users,
                              std::size_t num_roles, std::uint64_t seed) {
    if (!(selectivity > 0.0 && selectivity <= 1.0)) {
        throw DomainError("selectivity_policy: selectivity outside (0, 1]");
    }
    UniformParams p;
    p.num_docs = num_docs;
    p.num_users = num_users;
    p.num_roles = num_roles;
    p.max_roles_per_user = 1;
    const double mean = selectivity * static_cast<double>(num_docs);
    p.min_docs_per_role = std::max<std::size_t>(1, static_cast<std::size_t>(0.5 * mean));
    p.max_docs_per_role = std::clamp<std::size_t>(static_cast<std::size_t>(1.5 * mean), p.min_docs_per_role, num_docs);
    return gen_uniform(p, seed);
}

std::vector<RecallSample> recall_samples(const RbacPolicy& policy, std::shared_ptr<const VectorSet> vectors,
                                         const HnswParams& hnsw, const RecallProtocol& proto) {
    if (proto.ef_values.empty() || proto.queries == 0) {
        throw DomainError("recall protocol: need ef_s values and some queries");
    }
    Deployment dep = deploy(policy, single_partition_plan(policy), vectors, hnsw, proto.k, proto.seed);
    const auto w = gen_queries(dep.policy, policy.num_docs(), proto.queries, proto.k, proto.seed + 29);
    const auto truth = compute_ground_truth(dep.policy, w, *vectors, hnsw.metric);
    const double sel = workload_selectivity(dep, w);
    std::vector<RecallSample> out;
    for (std::size_t ef : proto.ef_values) {
        dep.ef_s = std::max(ef, proto.k);
        out.push_back({static_cast<double>(dep.ef_s), sel, static_cast<double>(proto.k),
                       measure_recall(dep, w, *vectors, truth)});
    }
    return out;
}

}  // namespace permvec

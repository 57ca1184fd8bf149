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

// permvec command-line driver.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "permvec/bench.h"
#include "permvec/maintenance.h"
#include "permvec/partitioner.h"
#include "permvec/perf_model.h"
#include "permvec/query_engine.h"
#include "permvec/workload.h"

using namespace permvec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitWarning = 2;

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw DomainError("cannot read " + path);
    }
    return is;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw DomainError("cannot write " + path);
    }
    return os;
}

RbacPolicy load_policy(const std::string& path) {
    auto is = open_in(path);
    return read_policy(is);
}

ModelParams load_params(const std::string& path) {
    if (path.empty()) {
        return {};
    }
    auto is = open_in(path);
    return read_model_params(is);
}

Objective parse_objective(const std::string& s) {
    if (s == "user") {
        return Objective::user_average;
    }
    if (s == "role") {
        return Objective::role_average;
    }
    if (s == "workload") {
        return Objective::workload_weighted;
    }
    throw DomainError("objective must be user, role or workload");
}

std::shared_ptr<const VectorSet> vectors_for(const std::string& dataset, std::size_t n, std::size_t dim,
                                             std::uint64_t data_seed) {
    ExperimentConfig cfg;
    cfg.dataset = dataset;
    cfg.n = n;
    cfg.dim = dim;
    cfg.data_seed = data_seed;
    auto vs = load_vectors(cfg);
    if (vs->size() < n) {
        throw DomainError(fmt::format("{} has {} vectors, need {}", dataset, vs->size(), n));
    }
    return vs;
}

struct GenArgs {
    std::string generator = "tree";
    std::string preset = "alpha";
    std::size_t docs = 20000;
    std::size_t users = 1000;
    std::size_t roles = 100;
    std::uint64_t seed = 1;
    std::string policy_out;
    std::string vectors_out;
    std::size_t dim = 64;
    std::uint64_t data_seed = 7;
    std::string workload_out;
    std::size_t queries = 1000;
    std::size_t k = 10;
};

int run_gen(const GenArgs& a) {
    const RbacPolicy policy = make_policy(a.generator, a.preset, a.docs, a.users, a.roles, a.seed);
    {
        auto os = open_out(a.policy_out);
        write_policy(os, policy);
    }
    if (!a.vectors_out.empty()) {
        write_fvecs(a.vectors_out, gen_vectors(a.docs, a.dim, a.data_seed));
    }
    if (!a.workload_out.empty()) {
        auto os = open_out(a.workload_out);
        write_workload(os, gen_queries(policy, a.docs, a.queries, a.k, a.seed + 1));
    }
    std::cerr << fmt::format("policy: {} users, {} roles, {} docs\n", policy.num_users(), policy.num_roles(),
                             policy.num_docs());
    return kExitOk;
}

struct FitArgs {
    std::string dataset = "synthetic";
    std::size_t n = 20000;
    std::size_t dim = 64;
    std::uint64_t data_seed = 7;
    std::size_t M = 16;
    std::size_t ef_construction = 64;
    std::size_t queries = 1000;
    std::size_t k = 10;
    double selectivity = 0.1;
    std::uint64_t seed = 1;
    std::string out;
};

int run_fit(const FitArgs& a) {
    const auto vectors = vectors_for(a.dataset, a.n, a.dim, a.data_seed);
    const HnswParams hnsw{a.M, a.ef_construction, Metric::euclidean};
    LatencyProtocol lp;
    lp.queries = a.queries;
    lp.k = a.k;
    lp.seed = a.seed;
    const auto lat = run_latency_protocol(vectors, hnsw, lp);
    RecallProtocol rp;
    rp.queries = a.queries;
    rp.k = a.k;
    rp.seed = a.seed;
    const RbacPolicy policy = selectivity_policy(vectors->size(), a.selectivity, 1000, 100, a.seed);
    const auto samples = recall_samples(policy, vectors, hnsw, rp);
    const RecallParams recall = fit_recall(samples);
    const double rmse = recall_rmse(recall, samples);

    ModelParams mp;
    mp.cost = CostModel::hnsw(lat.fit.params);
    mp.recall = recall;
    auto os = open_out(a.out);
    write_model_params(os, mp);
    std::cerr << fmt::format("latency: a={:.4g} b={:.4g} r2={:.4f}\n", lat.fit.params.a, lat.fit.params.b,
                             lat.fit.r2);
    std::cerr << fmt::format("recall: beta={:.4g} gamma={:.4g} rmse={:.4f}\n", recall.beta, recall.gamma, rmse);
    return lat.fit.r2 < 0.9 || rmse > 0.07 ? kExitWarning : kExitOk;
}

struct PlanArgs {
    std::string policy;
    std::string params;
    std::string method = "greedy";
    double alpha = 1.5;
    double epsilon = 0.9;
    std::size_t k = 10;
    std::size_t ef_cap = kDefaultEfCap;
    double eta = 0.0;
    std::string objective = "user";
    std::string workload;
    std::string out;
    std::string routing_out;
};

SplitConfig split_config(const ModelParams& mp, double alpha, double epsilon, std::size_t k, std::size_t ef_cap) {
    SplitConfig sc;
    sc.alpha = alpha;
    sc.epsilon = epsilon;
    sc.k = k;
    sc.ef_cap = ef_cap;
    sc.model = mp.cost;
    sc.recall = mp.recall;
    return sc;
}

int run_plan(const PlanArgs& a) {
    const RbacPolicy policy = load_policy(a.policy);
    SplitConfig sc = split_config(load_params(a.params), a.alpha, a.epsilon, a.k, a.ef_cap);
    sc.eta = a.eta;
    sc.objective = parse_objective(a.objective);
    if (sc.objective == Objective::workload_weighted) {
        if (a.workload.empty()) {
            throw DomainError("--objective workload needs --workload");
        }
        auto is = open_in(a.workload);
        const auto w = read_workload(is);
        sc.user_weights.assign(policy.num_users(), 0.0);
        for (const auto& q : w.queries) {
            if (q.user >= policy.num_users()) {
                throw DomainError(fmt::format("workload user {} not in the policy", q.user));
            }
            sc.user_weights[q.user] += 1.0;
        }
    }
    const PartitionPlan plan = build_plan(parse_method(a.method), policy, sc);
    {
        auto os = open_out(a.out);
        write_plan(os, plan);
    }
    const PlanEval ev = evaluate_plan(policy, plan, sc);
    if (!a.routing_out.empty()) {
        auto os = open_out(a.routing_out);
        write_routing(os, ev.routing, policy);
    }
    std::cerr << fmt::format("partitions={} memory_ratio={:.4f} user_sel={:.4f} ef_s={} modeled_cost={:.4g}{}\n",
                             plan.size(), ev.memory_ratio, ev.user_sel, ev.ef_user.ef_s, ev.user_cost,
                             ev.ef_user.capped ? " (recall target not reachable at the cap)" : "");
    return ev.ef_user.capped ? kExitWarning : kExitOk;
}

struct DeployArgs {
    std::string policy;
    std::string plan;
    std::string dataset = "synthetic";
    std::size_t dim = 64;
    std::uint64_t data_seed = 7;
    std::size_t M = 16;
    std::size_t ef_construction = 64;
    std::size_t ef_s = 100;
    std::uint64_t seed = 1;
    std::string tune_workload;
    double epsilon = 0.9;
    std::string params;
    std::size_t ef_cap = kDefaultEfCap;
    std::string out;
};

int run_deploy(const DeployArgs& a) {
    RbacPolicy policy = load_policy(a.policy);
    PartitionPlan plan;
    {
        auto is = open_in(a.plan);
        plan = read_plan(is, policy);
    }
    auto vectors = vectors_for(a.dataset, policy.num_docs(), a.dim, a.data_seed);
    const HnswParams hnsw{a.M, a.ef_construction, Metric::euclidean};
    Deployment dep = deploy(std::move(policy), std::move(plan), vectors, hnsw, a.ef_s, a.seed);
    int code = kExitOk;
    if (!a.tune_workload.empty()) {
        auto is = open_in(a.tune_workload);
        const auto w = read_workload(is);
        const auto tr = tune_ef_s(dep, w, *vectors, a.epsilon, load_params(a.params).recall, a.ef_cap);
        std::cerr << fmt::format("tuned ef_s={} recall={:.4f} (model estimate {}){}\n", tr.ef_s, tr.recall,
                                 tr.model_estimate, tr.warning ? " WARNING: target not reached at the cap" : "");
        code = tr.warning ? kExitWarning : kExitOk;
    }
    save_deployment(dep, a.out);
    std::cerr << fmt::format("deployed {} partitions, ef_s={}\n", dep.plan.size(), dep.ef_s);
    return code;
}

struct QueryArgs {
    std::string deploy_dir;
    std::string workload;
    std::string out;
    std::size_t repeats = 2;
};

int run_query(const QueryArgs& a) {
    const Deployment dep = load_deployment(a.deploy_dir);
    QueryWorkload w;
    {
        auto is = open_in(a.workload);
        w = read_workload(is);
    }
    const auto truth = compute_ground_truth(dep.policy, w, *dep.vectors, dep.hnsw.metric);
    const auto records = run_queries(dep, w, *dep.vectors, truth, a.repeats);
    std::ofstream file;
    if (!a.out.empty()) {
        file = open_out(a.out);
    }
    std::ostream& os = a.out.empty() ? std::cout : file;
    os << "qid,user,k,wall_us,dist_evals,recall\n";
    double recall = 0.0;
    for (const auto& r : records) {
        os << fmt::format("{},{},{},{:.2f},{},{:.4f}\n", r.qid, r.user, r.k, r.wall_us, r.dist_evals, r.recall);
        recall += r.recall;
    }
    if (!records.empty()) {
        std::cerr << fmt::format("{} queries, mean recall {:.4f}\n", records.size(),
                                 recall / static_cast<double>(records.size()));
    }
    return kExitOk;
}

struct UpdateArgs {
    std::string deploy_dir;
    std::string changes;
    std::string params;
    double alpha = 1.5;
    double epsilon = 0.9;
    std::size_t k = 10;
    std::size_t ef_cap = kDefaultEfCap;
    std::string out;
};

int run_update(const UpdateArgs& a) {
    Deployment dep = load_deployment(a.deploy_dir);
    std::vector<ChangeOp> ops;
    {
        auto is = open_in(a.changes);
        ops = read_changes(is);
    }
    const SplitConfig sc = split_config(load_params(a.params), a.alpha, a.epsilon, a.k, a.ef_cap);
    for (const auto& op : ops) {
        const auto res = apply(dep, op, sc);
        std::cerr << fmt::format("{}: rerouted {} users", format_change(op), res.rerouted.size());
        if (op.kind == ChangeKind::role_add) {
            std::cerr << fmt::format(", role {} -> partition {}{}", res.new_id, res.placed,
                                     res.new_partition ? " (new)" : "");
        }
        if (op.kind == ChangeKind::user_add) {
            std::cerr << fmt::format(", user id {}", res.new_id);
        }
        std::cerr << '\n';
    }
    save_deployment(dep, a.out.empty() ? a.deploy_dir : a.out);
    const auto rep = staleness_report(dep, sc);
    std::cerr << fmt::format("memory_ratio={:.4f} modeled_cost={:.4g} fresh_cost={:.4g} (fresh ratio {:.4f}) gap={:.4g}\n",
                             rep.memory_ratio, rep.current_cost, rep.fresh_cost, rep.fresh_memory_ratio, rep.gap);
    return kExitOk;
}

int run_bench(const std::string& config_path, const std::map<std::string, std::string>& overrides) {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
        auto is = open_in(config_path);
        cfg = read_experiment_config(is);
    }
    for (const auto& [key, value] : overrides) {
        cfg.set(key, value);
    }
    cfg.validate();
    const ModelParams mp = load_params(cfg.params);
    const auto rows = run_experiment(cfg, mp, &std::cerr);
    auto os = open_out(cfg.output);
    write_csv_header(os);
    bool warned = false;
    for (const auto& r : rows) {
        write_csv_row(os, r);
        warned = warned || r.warning;
    }
    std::cerr << fmt::format("wrote {} rows to {}\n", rows.size(), cfg.output);
    return warned ? kExitWarning : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Role-aware partitioned vector search"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a policy, vectors and a query workload");
    g->add_option("--generator", gen.generator, "tree, uniform or erbac")->capture_default_str();
    g->add_option("--preset", gen.preset, "alpha or beta")->capture_default_str();
    g->add_option("--docs", gen.docs)->capture_default_str();
    g->add_option("--users", gen.users)->capture_default_str();
    g->add_option("--roles", gen.roles)->capture_default_str();
    g->add_option("--seed", gen.seed)->capture_default_str();
    g->add_option("--policy-out", gen.policy_out)->required();
    g->add_option("--vectors-out", gen.vectors_out, "fvecs file of Gaussian vectors");
    g->add_option("--dim", gen.dim)->capture_default_str();
    g->add_option("--data-seed", gen.data_seed)->capture_default_str();
    g->add_option("--workload-out", gen.workload_out);
    g->add_option("--queries", gen.queries)->capture_default_str();
    g->add_option("-k,--k", gen.k)->capture_default_str();

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "Fit the latency and recall models");
    f->add_option("--dataset", fit.dataset, "synthetic or an fvecs/bvecs path")->capture_default_str();
    f->add_option("--n", fit.n)->capture_default_str();
    f->add_option("--dim", fit.dim)->capture_default_str();
    f->add_option("--data-seed", fit.data_seed)->capture_default_str();
    f->add_option("--M", fit.M)->capture_default_str();
    f->add_option("--ef-construction", fit.ef_construction)->capture_default_str();
    f->add_option("--queries", fit.queries)->capture_default_str();
    f->add_option("-k,--k", fit.k)->capture_default_str();
    f->add_option("--selectivity", fit.selectivity)->capture_default_str();
    f->add_option("--seed", fit.seed)->capture_default_str();
    f->add_option("--out", fit.out)->required();

    PlanArgs plan;
    auto* p = app.add_subcommand("plan", "Build a partition plan");
    p->add_option("--policy", plan.policy)->required();
    p->add_option("--params", plan.params, "model parameter file");
    p->add_option("--method", plan.method, "rls, role_partition, user_partition or greedy")->capture_default_str();
    p->add_option("--alpha", plan.alpha)->capture_default_str();
    p->add_option("--epsilon", plan.epsilon)->capture_default_str();
    p->add_option("-k,--k", plan.k)->capture_default_str();
    p->add_option("--ef-cap", plan.ef_cap)->capture_default_str();
    p->add_option("--eta", plan.eta)->capture_default_str();
    p->add_option("--objective", plan.objective, "user, role or workload")->capture_default_str();
    p->add_option("--workload", plan.workload, "query counts for --objective workload");
    p->add_option("--out", plan.out)->required();
    p->add_option("--routing-out", plan.routing_out);

    DeployArgs dp;
    auto* d = app.add_subcommand("deploy", "Build partition indexes and write a deployment directory");
    d->add_option("--policy", dp.policy)->required();
    d->add_option("--plan", dp.plan)->required();
    d->add_option("--dataset", dp.dataset, "synthetic or an fvecs/bvecs path")->capture_default_str();
    d->add_option("--dim", dp.dim)->capture_default_str();
    d->add_option("--data-seed", dp.data_seed)->capture_default_str();
    d->add_option("--M", dp.M)->capture_default_str();
    d->add_option("--ef-construction", dp.ef_construction)->capture_default_str();
    d->add_option("--ef-s", dp.ef_s)->capture_default_str();
    d->add_option("--seed", dp.seed)->capture_default_str();
    d->add_option("--tune-workload", dp.tune_workload, "tune ef_s on this workload");
    d->add_option("--epsilon", dp.epsilon)->capture_default_str();
    d->add_option("--params", dp.params);
    d->add_option("--ef-cap", dp.ef_cap)->capture_default_str();
    d->add_option("--out", dp.out)->required();

    QueryArgs qa;
    auto* q = app.add_subcommand("query", "Run a workload against a deployment");
    q->add_option("--deploy", qa.deploy_dir)->required();
    q->add_option("--workload", qa.workload)->required();
    q->add_option("--out", qa.out, "CSV path (default stdout)");
    q->add_option("--repeats", qa.repeats)->capture_default_str();

    UpdateArgs ua;
    auto* u = app.add_subcommand("update", "Apply a change log to a deployment");
    u->add_option("--deploy", ua.deploy_dir)->required();
    u->add_option("--changes", ua.changes)->required();
    u->add_option("--params", ua.params);
    u->add_option("--alpha", ua.alpha)->capture_default_str();
    u->add_option("--epsilon", ua.epsilon)->capture_default_str();
    u->add_option("-k,--k", ua.k)->capture_default_str();
    u->add_option("--ef-cap", ua.ef_cap)->capture_default_str();
    u->add_option("--out", ua.out, "output directory (default: in place)");

    std::string bench_config;
    std::map<std::string, std::string> overrides;
    auto* b = app.add_subcommand("bench", "Run an experiment sweep and write CSV");
    b->add_option("--config", bench_config, "key = value file");
    for (const char* key : {"dataset", "n", "dim", "data_seed", "generator", "preset", "users", "roles", "baselines",
                            "alpha_sweep", "recall_target", "k_list", "seeds", "queries", "params", "M",
                            "ef_construction", "ef_cap", "output"}) {
        b->add_option_function<std::string>(
            std::string("--") + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
            "overrides the config key");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        if (*g) {
            return run_gen(gen);
        }
        if (*f) {
            return run_fit(fit);
        }
        if (*p) {
            return run_plan(plan);
        }
        if (*d) {
            return run_deploy(dp);
        }
        if (*q) {
            return run_query(qa);
        }
        if (*u) {
            return run_update(ua);
        }
        if (*b) {
            return run_bench(bench_config, overrides);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

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

#include "permvec/partitioner.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "permvec/plan_state.h"

namespace permvec {

void SplitConfig::validate() const {
    if (!(alpha >= 1.0)) {
        throw DomainError(fmt::format("split config: alpha {} < 1", alpha));
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw DomainError(fmt::format("split config: epsilon {} outside (0, 1)", epsilon));
    }
    if (k < 1 || ef_cap < 1) {
        throw DomainError("split config: k and ef_cap must be >= 1");
    }
}

std::vector<double> objective_weights(const RbacPolicy& policy, const SplitConfig& config) {
    std::vector<double> w(policy.num_users(), 0.0);
    switch (config.objective) {
        case Objective::user_average:
            for (UserId u : policy.active_users()) {
                w[u] = 1.0;
            }
            break;
        case Objective::role_average: {
            std::vector<std::size_t> holders(policy.num_roles(), 0);
            for (UserId u : policy.active_users()) {
                for (RoleId r : policy.roles_of(u)) {
                    ++holders[r];
                }
            }
            for (UserId u : policy.active_users()) {
                for (RoleId r : policy.roles_of(u)) {
                    w[u] += 1.0 / static_cast<double>(holders[r]);
                }
            }
            break;
        }
        case Objective::workload_weighted:
            if (config.user_weights.size() < policy.num_users()) {
                throw DomainError("split config: workload weights do not cover every user");
            }
            for (UserId u : policy.active_users()) {
                w[u] = config.user_weights[u];
            }
            break;
    }
    return w;
}

namespace {

/// doc -> partitions holding it.
struct DocPartIndex {
    std::vector<std::uint32_t> off;
    std::vector<PartitionId> data;

    explicit DocPartIndex(const PartitionPlan& plan) {
        off.assign(plan.num_docs + 1, 0);
        for (const auto& docs : plan.partitions) {
            for (DocId d : docs) {
                ++off[d + 1];
            }
        }
        for (std::size_t i = 0; i < plan.num_docs; ++i) {
            off[i + 1] += off[i];
        }
        data.resize(off.back());
        std::vector<std::uint32_t> pos(off.begin(), off.end() - 1);
        for (PartitionId p = 0; p < plan.size(); ++p) {
            for (DocId d : plan.partitions[p]) {
                data[pos[d]++] = p;
            }
        }
    }
};

/// Greedy cover of `auth`; empty result when it cannot be covered.
std::vector<PartitionId> greedy_route(const PartitionPlan& plan, const DocPartIndex& idx,
                                      const std::vector<DocBitmap>& part_bits, const DocList& auth) {
    std::map<PartitionId, std::size_t> count;
    for (DocId d : auth) {
        for (auto i = idx.off[d]; i < idx.off[d + 1]; ++i) {
            ++count[idx.data[i]];
        }
    }
    std::vector<char> covered(auth.size(), 0);
    std::size_t remaining = auth.size();
    std::vector<PartitionId> route;
    while (remaining > 0) {
        PartitionId best = 0;
        std::size_t best_c = 0;
        for (const auto& [p, c] : count) {
            if (c > best_c || (c == best_c && c > 0 && plan.partitions[p].size() < plan.partitions[best].size())) {
                best = p;
                best_c = c;
            }
        }
        if (best_c == 0) {
            return {};
        }
        route.push_back(best);
        for (std::size_t i = 0; i < auth.size(); ++i) {
            const DocId d = auth[i];
            if (covered[i] || !part_bits[best].test(d)) {
                continue;
            }
            covered[i] = 1;
            --remaining;
            for (auto j = idx.off[d]; j < idx.off[d + 1]; ++j) {
                --count[idx.data[j]];
            }
        }
    }
    std::sort(route.begin(), route.end());
    return route;
}

}  // namespace

RoutingTable build_routing(const RbacPolicy& policy, const PartitionPlan& plan) {
    const DocPartIndex idx(plan);
    std::vector<DocBitmap> bits;
    bits.reserve(plan.size());
    for (const auto& docs : plan.partitions) {
        bits.emplace_back(plan.num_docs, docs);
    }
    RoutingTable rt;
    rt.user_routes.resize(policy.num_users());
    rt.role_routes.resize(policy.num_roles());
    for (const auto& g : group_users_by_roles(policy)) {
        if (g.roles.empty()) {
            continue;
        }
        DocList auth;
        for (RoleId r : g.roles) {
            auth = union_of(auth, policy.docs_of(r));
        }
        auto route = greedy_route(plan, idx, bits, auth);
        if (route.empty()) {
            throw InternalError(fmt::format("routing: user {} cannot be covered by the plan", g.users.front()));
        }
        for (UserId u : g.users) {
            rt.user_routes[u] = route;
        }
    }
    for (RoleId r : policy.active_roles()) {
        rt.role_routes[r] = greedy_route(plan, idx, bits, policy.docs_of(r));
    }
    return rt;
}

std::vector<PartitionId> route_auth(const PartitionPlan& plan, const DocList& auth) {
    if (!auth.empty() && auth.back() >= plan.num_docs) {
        return {};
    }
    const DocPartIndex idx(plan);
    std::vector<DocBitmap> bits;
    bits.reserve(plan.size());
    for (const auto& docs : plan.partitions) {
        bits.emplace_back(plan.num_docs, docs);
    }
    return greedy_route(plan, idx, bits, auth);
}

double plan_memory_ratio(const PartitionPlan& plan, const RbacPolicy& policy) {
    if (policy.num_docs() == 0) {
        throw DomainError("memory ratio of an empty document set");
    }
    return static_cast<double>(plan.total_docs()) / static_cast<double>(policy.num_docs());
}

PlanEval evaluate_plan(const RbacPolicy& policy, const PartitionPlan& plan, const SplitConfig& config) {
    config.validate();
    PlanEval ev;
    ev.routing = build_routing(policy, plan);
    ev.memory_ratio = plan_memory_ratio(plan, policy);
    const auto k = static_cast<double>(config.k);

    // Roles.
    std::vector<std::pair<double, double>> role_terms;  // (n, s)
    for (RoleId r : policy.active_roles()) {
        const auto& route = ev.routing.of_role(r);
        if (route.empty()) {
            continue;
        }
        const auto& docs = policy.docs_of(r);
        for (PartitionId p : route) {
            const auto& part = plan.partitions[p];
            role_terms.emplace_back(static_cast<double>(part.size()),
                                    static_cast<double>(intersection_size(docs, part)) /
                                        static_cast<double>(part.size()));
        }
    }
    std::size_t routed_roles = 0;
    double sr = 0.0;
    {
        std::size_t i = 0;
        for (RoleId r : policy.active_roles()) {
            const auto& route = ev.routing.of_role(r);
            if (route.empty()) {
                continue;
            }
            double s = 0.0;
            for (std::size_t j = 0; j < route.size(); ++j) {
                s += role_terms[i + j].second;
            }
            sr += s / static_cast<double>(route.size());
            i += route.size();
            ++routed_roles;
        }
    }
    ev.role_sel = routed_roles > 0 ? sr / static_cast<double>(routed_roles) : 1.0;
    ev.ef_role = solve_ef_s(config.recall, config.epsilon, ev.role_sel, config.k, config.ef_cap);
    double cr = 0.0;
    for (const auto& [n, s] : role_terms) {
        cr += partition_cost(config.model, n, static_cast<double>(ev.ef_role.ef_s), s, k);
    }
    ev.role_cost = routed_roles > 0 ? cr / static_cast<double>(routed_roles) : 0.0;

    // Users, one pass per distinct role set.
    const auto weights = objective_weights(policy, config);
    struct Term {
        double weight;
        std::vector<std::pair<double, double>> parts;  // (n, s)
    };
    std::vector<Term> terms;
    double su = 0.0;
    double wsum = 0.0;
    for (const auto& g : group_users_by_roles(policy)) {
        if (g.roles.empty()) {
            continue;
        }
        double w = 0.0;
        for (UserId u : g.users) {
            w += weights[u];
        }
        if (!(w > 0.0)) {
            continue;
        }
        const DocList auth = auth_user(policy, g.users.front());
        Term t{w, {}};
        double s = 0.0;
        for (PartitionId p : ev.routing.of_user(g.users.front())) {
            const auto& part = plan.partitions[p];
            const double n = static_cast<double>(part.size());
            const double sp = static_cast<double>(intersection_size(auth, part)) / n;
            t.parts.emplace_back(n, sp);
            s += sp;
        }
        su += w * s / static_cast<double>(t.parts.size());
        wsum += w;
        terms.push_back(std::move(t));
    }
    ev.user_sel = wsum > 0.0 ? su / wsum : 1.0;
    ev.ef_user = solve_ef_s(config.recall, config.epsilon, ev.user_sel, config.k, config.ef_cap);
    double cu = 0.0;
    for (const auto& t : terms) {
        double c = 0.0;
        for (const auto& [n, s] : t.parts) {
            c += partition_cost(config.model, n, static_cast<double>(ev.ef_user.ef_s), s, k);
        }
        cu += t.weight * c;
    }
    ev.user_cost = wsum > 0.0 ? cu / wsum : 0.0;
    return ev;
}

std::optional<RoleId> select_split(const std::vector<SplitCandidate>& candidates) {
    std::optional<RoleId> best;
    bool best_shrinks = false;
    double best_score = 0.0;
    for (const auto& c : candidates) {
        if (!c.accepted || !c.within_budget) {
            continue;
        }
        const double gain = -(c.delta_role + c.delta_user);
        const bool shrinks = c.delta_size < 0;
        const double score = shrinks ? gain : gain / (static_cast<double>(c.delta_size) + 1e-9);
        const bool better = !best || (shrinks && !best_shrinks) ||
                            (shrinks == best_shrinks && (score > best_score || (score == best_score && c.role < *best)));
        if (better) {
            best = c.role;
            best_shrinks = shrinks;
            best_score = score;
        }
    }
    return best;
}

PartitionPlan greedy_split(const RbacPolicy& policy, const SplitConfig& config) {
    config.validate();
    PlanState st(policy, config);
    std::vector<bool> exhausted(1, false);
    const std::size_t guard = 64 * (policy.num_roles() + 1) * (policy.num_roles() + 1);
    std::size_t steps = 0;
    while (steps++ < guard) {
        const auto src = st.largest(true, exhausted);
        if (!src) {
            break;
        }
        const PartitionId dst = st.open_partition();
        exhausted.push_back(false);
        bool moved = false;
        while (steps++ < guard) {
            const auto r = select_split(st.evaluate_moves(*src, dst));
            if (!r) {
                break;
            }
            st.apply_move(*r, *src, dst);
            moved = true;
            if (st.largest(false) != src || st.partition_roles(*src).size() < 2) {
                break;
            }
        }
        if (!moved) {
            st.close_last();
            exhausted.pop_back();
            exhausted[*src] = true;
        }
    }
    return st.to_plan();
}

std::optional<RoleId> find_best_split(const RbacPolicy& policy, const PartitionPlan& plan, PartitionId src,
                                      PartitionId dst, const SplitConfig& config) {
    if (src >= plan.size() || dst > plan.size() || src == dst) {
        throw DomainError("find_best_split: bad source or destination partition");
    }
    if (plan.roles_of[src].size() < 2) {
        throw DomainError("find_best_split: source partition holds fewer than two roles");
    }
    PlanState st(policy, config, plan);
    if (dst == plan.size()) {
        st.open_partition();
    }
    return select_split(st.evaluate_moves(src, dst));
}

PartitionPlan move_role(const RbacPolicy& policy, const PartitionPlan& plan, RoleId r, PartitionId src,
                        PartitionId dst) {
    if (src >= plan.size() || dst > plan.size() || src == dst) {
        throw DomainError("move_role: bad source or destination partition");
    }
    auto& from = plan.roles_of[src];
    if (std::find(from.begin(), from.end(), r) == from.end()) {
        throw DomainError(fmt::format("move_role: role {} is not in partition {}", r, src));
    }
    PartitionPlan out = plan;
    if (dst == out.size()) {
        out.partitions.emplace_back();
        out.roles_of.emplace_back();
    }
    auto& rs = out.roles_of[src];
    rs.erase(std::find(rs.begin(), rs.end(), r));
    auto& rd = out.roles_of[dst];
    rd.insert(std::upper_bound(rd.begin(), rd.end(), r), r);
    for (PartitionId p : {src, dst}) {
        DocList docs;
        for (RoleId q : out.roles_of[p]) {
            docs = union_of(docs, policy.docs_of(q));
        }
        out.partitions[p] = std::move(docs);
    }
    return out;
}

SplitCandidate evaluate_split(const RbacPolicy& policy, const PartitionPlan& plan, RoleId r, PartitionId src,
                              PartitionId dst, const SplitConfig& config) {
    const PartitionPlan next = move_role(policy, plan, r, src, dst);
    SplitCandidate c;
    c.role = r;
    c.delta_size = static_cast<long long>(next.total_docs()) - static_cast<long long>(plan.total_docs());
    c.within_budget = static_cast<double>(next.total_docs()) <= config.alpha * static_cast<double>(plan.num_docs) + 1e-9;
    const PlanEval before = evaluate_plan(policy, plan, config);
    const PlanEval after = evaluate_plan(policy, next, config);
    c.delta_role = after.role_cost - before.role_cost;
    c.delta_user = after.user_cost - before.user_cost;
    c.accepted = c.within_budget && c.delta_role < -1e-12 * std::abs(before.role_cost) && c.delta_user < config.eta;
    return c;
}

PartitionPlan single_partition_plan(const RbacPolicy& policy) {
    PartitionPlan plan;
    plan.num_docs = policy.num_docs();
    DocList all(policy.num_docs());
    std::iota(all.begin(), all.end(), DocId{0});
    plan.partitions.push_back(std::move(all));
    plan.roles_of.push_back(policy.active_roles());
    return plan;
}

PartitionPlan role_partition_plan(const RbacPolicy& policy) {
    PartitionPlan plan;
    plan.num_docs = policy.num_docs();
    for (RoleId r : policy.active_roles()) {
        plan.partitions.push_back(policy.docs_of(r));
        plan.roles_of.push_back({r});
    }
    return plan;
}

PartitionPlan user_partition_plan(const RbacPolicy& policy) {
    PartitionPlan plan;
    plan.num_docs = policy.num_docs();
    for (const auto& g : group_users_by_roles(policy)) {
        if (g.roles.empty()) {
            continue;
        }
        plan.partitions.push_back(auth_user(policy, g.users.front()));
        plan.roles_of.push_back(g.roles);
    }
    return plan;
}

PartitionPlan plan_from_groups(const RbacPolicy& policy, const std::vector<std::vector<RoleId>>& groups) {
    if (groups.size() == 1) {
        PartitionPlan plan = single_partition_plan(policy);
        plan.roles_of[0] = groups[0];
        std::sort(plan.roles_of[0].begin(), plan.roles_of[0].end());
        return plan;
    }
    PartitionPlan plan;
    plan.num_docs = policy.num_docs();
    for (const auto& g : groups) {
        DocList docs;
        for (RoleId r : g) {
            docs = union_of(docs, policy.docs_of(r));
        }
        auto roles = g;
        std::sort(roles.begin(), roles.end());
        plan.partitions.push_back(std::move(docs));
        plan.roles_of.push_back(std::move(roles));
    }
    return plan;
}

ExhaustiveResult exhaustive_optimum(const RbacPolicy& policy, const SplitConfig& config, std::size_t max_roles) {
    config.validate();
    const auto roles = policy.active_roles();
    if (roles.size() > max_roles) {
        throw DomainError(fmt::format("exhaustive_optimum: {} roles exceed the limit of {}", roles.size(), max_roles));
    }
    if (roles.empty()) {
        throw DomainError("exhaustive_optimum: no roles");
    }
    ExhaustiveResult best;
    bool have = false;
    std::vector<std::size_t> label(roles.size(), 0);
    // Restricted growth strings enumerate each set partition once.
    std::function<void(std::size_t, std::size_t)> visit = [&](std::size_t i, std::size_t used) {
        if (i == roles.size()) {
            std::vector<std::vector<RoleId>> groups(used);
            for (std::size_t j = 0; j < roles.size(); ++j) {
                groups[label[j]].push_back(roles[j]);
            }
            PartitionPlan plan = plan_from_groups(policy, groups);
            const PlanEval ev = evaluate_plan(policy, plan, config);
            const bool feasible = ev.memory_ratio <= config.alpha + 1e-12 && !ev.ef_user.capped;
            if (!have || (feasible && !best.feasible) || (feasible == best.feasible && ev.user_cost < best.cost)) {
                best = {std::move(plan), ev.user_cost, feasible};
                have = true;
            }
            return;
        }
        for (std::size_t c = 0; c <= used && c < roles.size(); ++c) {
            label[i] = c;
            visit(i + 1, std::max(used, c + 1));
        }
    };
    visit(0, 0);
    return best;
}

}  // namespace permvec

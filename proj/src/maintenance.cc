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

#include "permvec/maintenance.h"

#include <algorithm>
#include <istream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace permvec {

namespace {

const char* kind_name(ChangeKind k) {
    switch (k) {
        case ChangeKind::user_add:
            return "user_add";
        case ChangeKind::user_del:
            return "user_del";
        case ChangeKind::doc_add:
            return "doc_add";
        case ChangeKind::doc_del:
            return "doc_del";
        case ChangeKind::role_add:
            return "role_add";
        case ChangeKind::role_del:
            return "role_del";
    }
    return "?";
}

std::uint32_t parse_id(const std::string& tok, const std::string& line) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(tok, &used);
    } catch (const std::exception&) {
        throw DomainError("change: bad id '" + tok + "' in: " + line);
    }
    if (used != tok.size() || v > std::numeric_limits<std::uint32_t>::max()) {
        throw DomainError("change: bad id '" + tok + "' in: " + line);
    }
    return static_cast<std::uint32_t>(v);
}

bool holds(const std::vector<RoleId>& roles, RoleId r) {
    return std::find(roles.begin(), roles.end(), r) != roles.end();
}

std::vector<PartitionId> partitions_with(const PartitionPlan& plan, RoleId r) {
    std::vector<PartitionId> out;
    for (PartitionId p = 0; p < plan.size(); ++p) {
        if (holds(plan.roles_of[p], r)) {
            out.push_back(p);
        }
    }
    return out;
}

std::vector<UserId> holders_of(const RbacPolicy& policy, RoleId r) {
    std::vector<UserId> out;
    for (UserId u : policy.active_users()) {
        if (holds(policy.roles_of(u), r)) {
            out.push_back(u);
        }
    }
    return out;
}

bool is_whole(const PartitionPlan& plan, PartitionId p) {
    return plan.partitions[p].size() == plan.num_docs;
}

void add_docs(Deployment& dep, PartitionId p, const DocList& docs) {
    auto& part = dep.plan.partitions[p];
    const DocList fresh = [&] {
        DocList out;
        std::set_difference(docs.begin(), docs.end(), part.begin(), part.end(), std::back_inserter(out));
        return out;
    }();
    for (DocId d : fresh) {
        dep.indexes[p].insert(d, dep.vectors->row(d));
    }
    part = union_of(part, fresh);
}

void drop_docs(Deployment& dep, PartitionId p, const DocList& docs) {
    auto& part = dep.plan.partitions[p];
    DocList kept;
    std::set_difference(part.begin(), part.end(), docs.begin(), docs.end(), std::back_inserter(kept));
    for (DocId d : docs) {
        if (dep.indexes[p].contains(d)) {
            dep.indexes[p].remove(d);
        }
    }
    part = std::move(kept);
}

DocList roles_union(const RbacPolicy& policy, const std::vector<RoleId>& roles) {
    DocList out;
    for (RoleId r : roles) {
        out = union_of(out, policy.docs_of(r));
    }
    return out;
}

/// Recomputes routes for `users` (all users when `all`) and every role.
void reroute(Deployment& dep, std::vector<UserId> users, bool all, ApplyResult& out) {
    RoutingTable fresh = build_routing(dep.policy, dep.plan);
    dep.routing.user_routes.resize(dep.policy.num_users());
    if (all) {
        users = dep.policy.active_users();
    }
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    for (UserId u : users) {
        dep.routing.user_routes[u] = fresh.user_routes[u];
    }
    for (UserId u = 0; u < dep.policy.num_users(); ++u) {
        if (!dep.policy.user_active(u)) {
            dep.routing.user_routes[u].clear();
        }
    }
    dep.routing.role_routes = std::move(fresh.role_routes);
    out.rerouted = std::move(users);
}

std::vector<UserId> users_routed_through(const Deployment& dep, PartitionId p) {
    std::vector<UserId> out;
    for (UserId u : dep.policy.active_users()) {
        if (u < dep.routing.user_routes.size() && holds(dep.routing.user_routes[u], p)) {
            out.push_back(u);
        }
    }
    return out;
}

void require_role(const RbacPolicy& policy, std::uint32_t r) {
    if (!policy.role_active(r)) {
        throw DomainError(fmt::format("unknown role id {}", r));
    }
}

/// Extends the id space to `n` docs; whole-set partitions take the new ids.
void grow_docs(Deployment& dep, std::size_t n) {
    if (n <= dep.policy.num_docs()) {
        return;
    }
    if (n > dep.vectors->size()) {
        throw DomainError(fmt::format("doc {} has no vector (dataset size {})", n - 1, dep.vectors->size()));
    }
    const std::size_t old = dep.plan.num_docs;
    DocList added;
    for (std::size_t d = old; d < n; ++d) {
        added.push_back(static_cast<DocId>(d));
    }
    std::vector<PartitionId> whole;
    for (PartitionId p = 0; p < dep.plan.size(); ++p) {
        if (is_whole(dep.plan, p)) {
            whole.push_back(p);
        }
    }
    dep.policy.grow_docs(n);
    dep.plan.num_docs = n;
    for (PartitionId p : whole) {
        add_docs(dep, p, added);
    }
}

void apply_user_add(Deployment& dep, const ChangeOp& op, ApplyResult& out) {
    if (op.ids.empty()) {
        throw DomainError("user_add needs at least one role");
    }
    const UserId u = dep.policy.add_user({op.ids.begin(), op.ids.end()});
    auto route = route_auth(dep.plan, auth_user(dep.policy, u));
    if (route.empty()) {
        throw InternalError(fmt::format("user_add: user {} cannot be covered by the plan", u));
    }
    dep.routing.user_routes.resize(dep.policy.num_users());
    dep.routing.user_routes[u] = std::move(route);
    out.new_id = u;
    out.rerouted = {u};
}

void apply_user_del(Deployment& dep, const ChangeOp& op, ApplyResult& out) {
    if (op.ids.size() != 1) {
        throw DomainError("user_del takes one user id");
    }
    const UserId u = op.ids.front();
    dep.policy.retire_user(u);
    dep.routing.user_routes[u].clear();
    out.rerouted = {};
}

void apply_doc_add(Deployment& dep, const ChangeOp& op, ApplyResult& out) {
    if (op.ids.size() != 2) {
        throw DomainError("doc_add takes a role and a doc");
    }
    const RoleId r = op.ids[0];
    const DocId d = op.ids[1];
    require_role(dep.policy, r);
    if (d >= dep.vectors->size()) {
        throw DomainError(fmt::format("doc {} has no vector (dataset size {})", d, dep.vectors->size()));
    }
    grow_docs(dep, static_cast<std::size_t>(d) + 1);
    const DocList one{d};
    dep.policy.set_role_docs(r, union_of(dep.policy.docs_of(r), one));
    for (PartitionId p : partitions_with(dep.plan, r)) {
        add_docs(dep, p, one);
    }
    reroute(dep, holders_of(dep.policy, r), false, out);
}

void apply_doc_del(Deployment& dep, const ChangeOp& op, ApplyResult& out) {
    if (op.ids.size() != 2) {
        throw DomainError("doc_del takes a role and a doc");
    }
    const RoleId r = op.ids[0];
    const DocId d = op.ids[1];
    require_role(dep.policy, r);
    const auto& docs = dep.policy.docs_of(r);
    if (!std::binary_search(docs.begin(), docs.end(), d)) {
        throw DomainError(fmt::format("role {} does not grant doc {}", r, d));
    }
    DocList rest;
    std::copy_if(docs.begin(), docs.end(), std::back_inserter(rest), [d](DocId x) { return x != d; });
    dep.policy.set_role_docs(r, std::move(rest));
    for (PartitionId p : partitions_with(dep.plan, r)) {
        if (is_whole(dep.plan, p)) {
            continue;
        }
        bool granted = false;
        for (RoleId o : dep.plan.roles_of[p]) {
            const auto& od = dep.policy.docs_of(o);
            granted = granted || std::binary_search(od.begin(), od.end(), d);
        }
        if (!granted) {
            drop_docs(dep, p, DocList{d});
        }
    }
    reroute(dep, holders_of(dep.policy, r), false, out);
}

struct Placement {
    PartitionId target = 0;  // == plan.size() for a new partition
    std::size_t extra = 0;
    double cost = 0.0;
    double ratio = 0.0;
};

void apply_role_add(Deployment& dep, const ChangeOp& op, const SplitConfig& config, ApplyResult& out) {
    if (op.ids.empty()) {
        throw DomainError("role_add needs at least one doc");
    }
    DocList docs(op.ids.begin(), op.ids.end());
    std::sort(docs.begin(), docs.end());
    docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
    for (UserId u : op.users) {
        if (!dep.policy.user_active(u)) {
            throw DomainError(fmt::format("unknown user id {}", u));
        }
    }
    grow_docs(dep, static_cast<std::size_t>(docs.back()) + 1);
    const RoleId r = dep.policy.add_role(docs);
    for (UserId u : op.users) {
        auto roles = dep.policy.roles_of(u);
        roles.push_back(r);
        dep.policy.set_user_roles(u, std::move(roles));
    }

    // Candidates: every existing partition, then a fresh one.
    std::vector<Placement> options;
    for (PartitionId p = 0; p <= dep.plan.size(); ++p) {
        PartitionPlan trial = dep.plan;
        Placement opt{p, 0, 0.0, 0.0};
        if (p == dep.plan.size()) {
            trial.partitions.push_back(docs);
            trial.roles_of.push_back({r});
            opt.extra = docs.size();
        } else {
            const auto& part = trial.partitions[p];
            opt.extra = docs.size() - intersection_size(docs, part);
            trial.partitions[p] = union_of(part, docs);
            trial.roles_of[p].push_back(r);
        }
        const PlanEval ev = evaluate_plan(dep.policy, trial, config);
        opt.cost = ev.user_cost + ev.role_cost;
        opt.ratio = ev.memory_ratio;
        options.push_back(opt);
    }
    const auto cheaper_mem = [](const Placement& a, const Placement& b) {
        return a.extra < b.extra || (a.extra == b.extra && a.cost < b.cost);
    };
    const Placement base = *std::min_element(options.begin(), options.end(), cheaper_mem);
    // Over budget already: nothing may grow memory beyond the baseline.
    const double limit = std::max(config.alpha, base.ratio);
    Placement pick = base;
    double best_score = 0.0;
    for (const auto& o : options) {
        if (o.cost >= base.cost || o.ratio > limit) {
            continue;
        }
        const double score =
            (base.cost - o.cost) / (static_cast<double>(o.extra) - static_cast<double>(base.extra) + 1e-9);
        if (score > best_score) {
            best_score = score;
            pick = o;
        }
    }

    std::vector<UserId> touched(op.users.begin(), op.users.end());
    if (pick.target == dep.plan.size()) {
        dep.plan.partitions.push_back(docs);
        dep.plan.roles_of.push_back({r});
        dep.indexes.push_back(HnswIndex::build_for_docs(*dep.vectors, docs, dep.hnsw,
                                                        partition_seed(dep.seed, pick.target)));
        out.new_partition = true;
    } else {
        add_docs(dep, pick.target, docs);
        dep.plan.roles_of[pick.target].push_back(r);
        const auto via = users_routed_through(dep, pick.target);
        touched.insert(touched.end(), via.begin(), via.end());
    }
    out.new_id = r;
    out.placed = pick.target;
    reroute(dep, std::move(touched), false, out);
}

void apply_role_del(Deployment& dep, const ChangeOp& op, ApplyResult& out) {
    if (op.ids.size() != 1) {
        throw DomainError("role_del takes one role id");
    }
    const RoleId r = op.ids.front();
    require_role(dep.policy, r);
    std::vector<UserId> touched = holders_of(dep.policy, r);
    dep.policy.retire_role(r);
    for (UserId u : touched) {
        if (dep.policy.roles_of(u).empty()) {
            dep.policy.retire_user(u);
            out.retired.push_back(u);
        }
    }
    bool removed_partition = false;
    const auto homes = partitions_with(dep.plan, r);
    for (auto it = homes.rbegin(); it != homes.rend(); ++it) {
        const PartitionId p = *it;
        auto& roles = dep.plan.roles_of[p];
        roles.erase(std::remove(roles.begin(), roles.end(), r), roles.end());
        const auto via = users_routed_through(dep, p);
        touched.insert(touched.end(), via.begin(), via.end());
        if (is_whole(dep.plan, p)) {
            continue;
        }
        if (roles.empty()) {
            dep.plan.partitions.erase(dep.plan.partitions.begin() + p);
            dep.plan.roles_of.erase(dep.plan.roles_of.begin() + p);
            dep.indexes.erase(dep.indexes.begin() + p);
            removed_partition = true;
            continue;
        }
        const DocList keep = roles_union(dep.policy, roles);
        DocList gone;
        const auto& part = dep.plan.partitions[p];
        std::set_difference(part.begin(), part.end(), keep.begin(), keep.end(), std::back_inserter(gone));
        drop_docs(dep, p, gone);
    }
    std::erase_if(touched, [&](UserId u) { return !dep.policy.user_active(u); });
    // Partition ids shift after a removal, so every route is redone.
    reroute(dep, std::move(touched), removed_partition, out);
}

}  // namespace

ChangeOp parse_change(const std::string& line) {
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) {
        throw DomainError("change: empty line");
    }
    ChangeOp op;
    if (word == "user_add") {
        op.kind = ChangeKind::user_add;
    } else if (word == "user_del") {
        op.kind = ChangeKind::user_del;
    } else if (word == "doc_add") {
        op.kind = ChangeKind::doc_add;
    } else if (word == "doc_del") {
        op.kind = ChangeKind::doc_del;
    } else if (word == "role_add") {
        op.kind = ChangeKind::role_add;
    } else if (word == "role_del") {
        op.kind = ChangeKind::role_del;
    } else {
        throw DomainError("change: unknown kind '" + word + "'");
    }
    bool after_colon = false;
    std::string tok;
    while (ls >> tok) {
        if (tok == ":") {
            if (op.kind != ChangeKind::role_add || after_colon) {
                throw DomainError("change: unexpected ':' in: " + line);
            }
            after_colon = true;
            continue;
        }
        (after_colon ? op.users : op.ids).push_back(parse_id(tok, line));
    }
    const std::size_t want = op.kind == ChangeKind::user_del || op.kind == ChangeKind::role_del ? 1
                             : op.kind == ChangeKind::doc_add || op.kind == ChangeKind::doc_del ? 2
                                                                                                : 0;
    if (want != 0 ? op.ids.size() != want : op.ids.empty()) {
        throw DomainError("change: wrong number of ids in: " + line);
    }
    return op;
}

std::string format_change(const ChangeOp& op) {
    std::string s = kind_name(op.kind);
    for (auto id : op.ids) {
        s += fmt::format(" {}", id);
    }
    if (!op.users.empty()) {
        s += " :";
        for (auto u : op.users) {
            s += fmt::format(" {}", u);
        }
    }
    return s;
}

std::vector<ChangeOp> read_changes(std::istream& is) {
    std::vector<ChangeOp> out;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        out.push_back(parse_change(line));
    }
    return out;
}

ApplyResult apply(Deployment& dep, const ChangeOp& op, const SplitConfig& config) {
    ApplyResult out;
    switch (op.kind) {
        case ChangeKind::user_add:
            apply_user_add(dep, op, out);
            break;
        case ChangeKind::user_del:
            apply_user_del(dep, op, out);
            break;
        case ChangeKind::doc_add:
            apply_doc_add(dep, op, out);
            break;
        case ChangeKind::doc_del:
            apply_doc_del(dep, op, out);
            break;
        case ChangeKind::role_add:
            apply_role_add(dep, op, config, out);
            break;
        case ChangeKind::role_del:
            apply_role_del(dep, op, out);
            break;
    }
    dep.refresh_auth();
    return out;
}

StalenessReport staleness_report(const Deployment& dep, const SplitConfig& config) {
    StalenessReport rep;
    const PlanEval cur = evaluate_plan(dep.policy, dep.plan, config);
    const PartitionPlan fresh_plan = greedy_split(dep.policy, config);
    const PlanEval fresh = evaluate_plan(dep.policy, fresh_plan, config);
    rep.memory_ratio = cur.memory_ratio;
    rep.current_cost = cur.user_cost;
    rep.fresh_cost = fresh.user_cost;
    rep.fresh_memory_ratio = fresh.memory_ratio;
    rep.gap = cur.user_cost - fresh.user_cost;
    return rep;
}

}  // namespace permvec

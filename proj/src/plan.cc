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

#include "permvec/plan.h"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "permvec/rbac.h"

namespace permvec {

std::size_t PartitionPlan::total_docs() const {
    std::size_t n = 0;
    for (const auto& p : partitions) {
        n += p.size();
    }
    return n;
}

PartitionId PartitionPlan::home_of(RoleId r) const {
    for (PartitionId p = 0; p < roles_of.size(); ++p) {
        if (std::find(roles_of[p].begin(), roles_of[p].end(), r) != roles_of[p].end()) {
            return p;
        }
    }
    return static_cast<PartitionId>(roles_of.size());
}

void PartitionPlan::validate(const RbacPolicy& policy) const {
    if (partitions.size() != roles_of.size()) {
        throw InternalError("plan: partition and role-map sizes differ");
    }
    std::vector<int> seen(policy.num_roles(), 0);
    for (PartitionId p = 0; p < partitions.size(); ++p) {
        const auto& docs = partitions[p];
        if (docs.empty()) {
            throw InternalError(fmt::format("plan: partition {} is empty", p));
        }
        if (!std::is_sorted(docs.begin(), docs.end()) ||
            std::adjacent_find(docs.begin(), docs.end()) != docs.end()) {
            throw InternalError(fmt::format("plan: partition {} is not a sorted set", p));
        }
        DocList expected;
        for (RoleId r : roles_of[p]) {
            if (!policy.role_active(r)) {
                throw InternalError(fmt::format("plan: partition {} holds unknown role {}", p, r));
            }
            ++seen[r];
            expected = union_of(expected, policy.docs_of(r));
        }
        // A partition may hold the whole document set (the initial plan, or
        // an RLS plan extended by maintenance); every other partition is
        // exactly the union of its roles.
        const bool whole = docs.size() == num_docs;
        if (whole ? !is_subset(expected, docs) : expected != docs) {
            throw InternalError(fmt::format("plan: partition {} differs from the union of its roles", p));
        }
    }
    for (RoleId r : policy.active_roles()) {
        if (seen[r] != 1) {
            throw InternalError(fmt::format("plan: role {} appears in {} partitions", r, seen[r]));
        }
    }
}

const std::vector<PartitionId>& RoutingTable::of_user(UserId u) const {
    if (u >= user_routes.size()) {
        throw DomainError(fmt::format("user {} is not routed", u));
    }
    return user_routes[u];
}

const std::vector<PartitionId>& RoutingTable::of_role(RoleId r) const {
    if (r >= role_routes.size()) {
        throw DomainError(fmt::format("role {} is not routed", r));
    }
    return role_routes[r];
}

void write_plan(std::ostream& os, const PartitionPlan& plan) {
    for (PartitionId p = 0; p < plan.size(); ++p) {
        os << "partition " << p << ": roles=";
        for (std::size_t i = 0; i < plan.roles_of[p].size(); ++i) {
            os << (i ? " " : "") << plan.roles_of[p][i];
        }
        os << '\n';
    }
    os << "sizes:";
    for (const auto& docs : plan.partitions) {
        os << ' ' << docs.size();
    }
    os << '\n';
    os << "total_docs=" << plan.total_docs() << " num_docs=" << plan.num_docs << '\n';
}

PartitionPlan read_plan(std::istream& is, const RbacPolicy& policy) {
    PartitionPlan plan;
    plan.num_docs = policy.num_docs();
    std::vector<std::size_t> sizes;
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("partition ", 0) == 0) {
            auto colon = line.find(':');
            auto eq = line.find("roles=");
            if (colon == std::string::npos || eq == std::string::npos) {
                throw DomainError("plan: malformed line: " + line);
            }
            const auto id = std::stoul(line.substr(10, colon - 10));
            if (id != plan.roles_of.size()) {
                throw DomainError("plan: partition ids must be consecutive: " + line);
            }
            std::istringstream ls(line.substr(eq + 6));
            std::vector<RoleId> roles;
            std::uint64_t r = 0;
            while (ls >> r) {
                roles.push_back(static_cast<RoleId>(r));
            }
            plan.roles_of.push_back(std::move(roles));
        } else if (line.rfind("sizes:", 0) == 0) {
            std::istringstream ls(line.substr(6));
            std::size_t n = 0;
            while (ls >> n) {
                sizes.push_back(n);
            }
        }
    }
    for (const auto& roles : plan.roles_of) {
        DocList docs;
        for (RoleId r : roles) {
            docs = union_of(docs, policy.docs_of(r));
        }
        plan.partitions.push_back(std::move(docs));
    }
    for (PartitionId p = 0; p < plan.size() && p < sizes.size(); ++p) {
        if (sizes[p] == plan.num_docs && plan.partitions[p].size() != plan.num_docs) {
            plan.partitions[p].resize(plan.num_docs);
            std::iota(plan.partitions[p].begin(), plan.partitions[p].end(), DocId{0});
        }
    }
    if (!sizes.empty()) {
        for (PartitionId p = 0; p < plan.size(); ++p) {
            if (p >= sizes.size() || sizes[p] != plan.partitions[p].size()) {
                throw DomainError(fmt::format("plan: partition {} size does not match the policy", p));
            }
        }
    }
    return plan;
}

void write_routing(std::ostream& os, const RoutingTable& routing, const RbacPolicy& policy) {
    for (UserId u : policy.active_users()) {
        os << "user " << u << ": partitions=";
        const auto& route = routing.of_user(u);
        for (std::size_t i = 0; i < route.size(); ++i) {
            os << (i ? " " : "") << route[i];
        }
        os << '\n';
    }
}

RoutingTable read_routing(std::istream& is, const RbacPolicy& policy) {
    RoutingTable routing;
    routing.user_routes.resize(policy.num_users());
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("user ", 0) != 0) {
            continue;
        }
        auto colon = line.find(':');
        auto eq = line.find("partitions=");
        if (colon == std::string::npos || eq == std::string::npos) {
            throw DomainError("routing: malformed line: " + line);
        }
        const auto u = std::stoul(line.substr(5, colon - 5));
        if (u >= routing.user_routes.size()) {
            throw DomainError("routing: user id out of range: " + line);
        }
        std::istringstream ls(line.substr(eq + 11));
        std::uint64_t p = 0;
        while (ls >> p) {
            routing.user_routes[u].push_back(static_cast<PartitionId>(p));
        }
    }
    return routing;
}

}  // namespace permvec

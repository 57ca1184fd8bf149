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

#include "permvec/rbac.h"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace permvec {

DocList union_of(std::span<const DocId> a, std::span<const DocId> b) {
    DocList out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

DocList intersection_of(std::span<const DocId> a, std::span<const DocId> b) {
    DocList out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::size_t intersection_size(std::span<const DocId> a, std::span<const DocId> b) {
    std::size_t n = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

bool is_subset(std::span<const DocId> sub, std::span<const DocId> super) {
    return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

namespace {

template <typename T>
void sort_unique(std::vector<T>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

RbacPolicy::RbacPolicy(std::size_t num_docs, std::vector<std::vector<RoleId>> user_roles,
                       std::vector<DocList> role_docs)
    : num_docs_(num_docs),
      user_roles_(std::move(user_roles)),
      role_docs_(std::move(role_docs)),
      user_active_(user_roles_.size(), true),
      role_active_(role_docs_.size(), true) {
    for (std::size_t r = 0; r < role_docs_.size(); ++r) {
        auto& docs = role_docs_[r];
        sort_unique(docs);
        if (docs.empty()) {
            throw DomainError(fmt::format("role {} has an empty document set", r));
        }
        if (docs.back() >= num_docs_) {
            throw DomainError(fmt::format("role {} references doc {} >= num_docs {}", r, docs.back(), num_docs_));
        }
    }
    for (auto& roles : user_roles_) {
        sort_unique(roles);
        check_role_ids(roles);
    }
}

void RbacPolicy::check_role_ids(const std::vector<RoleId>& roles) const {
    for (RoleId r : roles) {
        if (!role_active(r)) {
            throw DomainError(fmt::format("unknown role id {}", r));
        }
    }
}

const std::vector<RoleId>& RbacPolicy::roles_of(UserId u) const {
    if (!user_active(u)) {
        throw DomainError(fmt::format("unknown user id {}", u));
    }
    return user_roles_[u];
}

const DocList& RbacPolicy::docs_of(RoleId r) const {
    if (!role_active(r)) {
        throw DomainError(fmt::format("unknown role id {}", r));
    }
    return role_docs_[r];
}

std::vector<UserId> RbacPolicy::active_users() const {
    std::vector<UserId> out;
    out.reserve(user_roles_.size());
    for (UserId u = 0; u < user_roles_.size(); ++u) {
        if (user_active_[u]) {
            out.push_back(u);
        }
    }
    return out;
}

std::vector<RoleId> RbacPolicy::active_roles() const {
    std::vector<RoleId> out;
    out.reserve(role_docs_.size());
    for (RoleId r = 0; r < role_docs_.size(); ++r) {
        if (role_active_[r]) {
            out.push_back(r);
        }
    }
    return out;
}

UserId RbacPolicy::add_user(std::vector<RoleId> roles) {
    sort_unique(roles);
    check_role_ids(roles);
    user_roles_.push_back(std::move(roles));
    user_active_.push_back(true);
    return static_cast<UserId>(user_roles_.size() - 1);
}

void RbacPolicy::set_user_roles(UserId u, std::vector<RoleId> roles) {
    if (!user_active(u)) {
        throw DomainError(fmt::format("unknown user id {}", u));
    }
    sort_unique(roles);
    check_role_ids(roles);
    user_roles_[u] = std::move(roles);
}

void RbacPolicy::retire_user(UserId u) {
    if (!user_active(u)) {
        throw DomainError(fmt::format("unknown user id {}", u));
    }
    user_active_[u] = false;
    user_roles_[u].clear();
}

RoleId RbacPolicy::add_role(DocList docs) {
    sort_unique(docs);
    if (docs.empty()) {
        throw DomainError("new role has an empty document set");
    }
    if (docs.back() >= num_docs_) {
        throw DomainError(fmt::format("new role references doc {} >= num_docs {}", docs.back(), num_docs_));
    }
    role_docs_.push_back(std::move(docs));
    role_active_.push_back(true);
    return static_cast<RoleId>(role_docs_.size() - 1);
}

void RbacPolicy::set_role_docs(RoleId r, DocList docs) {
    if (!role_active(r)) {
        throw DomainError(fmt::format("unknown role id {}", r));
    }
    sort_unique(docs);
    if (docs.empty()) {
        throw DomainError(fmt::format("role {} would have an empty document set", r));
    }
    if (docs.back() >= num_docs_) {
        throw DomainError(fmt::format("role {} references doc {} >= num_docs {}", r, docs.back(), num_docs_));
    }
    role_docs_[r] = std::move(docs);
}

void RbacPolicy::retire_role(RoleId r) {
    if (!role_active(r)) {
        throw DomainError(fmt::format("unknown role id {}", r));
    }
    role_active_[r] = false;
    for (auto& roles : user_roles_) {
        roles.erase(std::remove(roles.begin(), roles.end(), r), roles.end());
    }
}

void RbacPolicy::grow_docs(std::size_t num_docs) {
    num_docs_ = std::max(num_docs_, num_docs);
}

DocList auth_user(const RbacPolicy& policy, UserId u) {
    const auto& roles = policy.roles_of(u);
    if (roles.size() == 1) {
        return policy.docs_of(roles.front());
    }
    DocList out;
    for (RoleId r : roles) {
        out = union_of(out, policy.docs_of(r));
    }
    return out;
}

DocList auth_role(const RbacPolicy& policy, RoleId r) {
    return policy.docs_of(r);
}

double user_selectivity(const RbacPolicy& policy, UserId u, const PartitionPlan& plan,
                        const RoutingTable& routing) {
    const auto& route = routing.of_user(u);
    if (route.empty()) {
        throw DomainError(fmt::format("user {} has an empty routing set", u));
    }
    const DocList auth = auth_user(policy, u);
    double sum = 0.0;
    for (PartitionId p : route) {
        const auto& part = plan.partitions.at(p);
        sum += static_cast<double>(intersection_size(auth, part)) / static_cast<double>(part.size());
    }
    return sum / static_cast<double>(route.size());
}

double mean_selectivity(const RbacPolicy& policy, const PartitionPlan& plan, const RoutingTable& routing) {
    const auto users = policy.active_users();
    if (users.empty()) {
        throw DomainError("mean selectivity of a policy without users");
    }
    double sum = 0.0;
    for (UserId u : users) {
        sum += user_selectivity(policy, u, plan, routing);
    }
    return sum / static_cast<double>(users.size());
}

std::vector<UserGroup> group_users_by_roles(const RbacPolicy& policy) {
    std::map<std::vector<RoleId>, std::vector<UserId>> by_roles;
    for (UserId u : policy.active_users()) {
        by_roles[policy.roles_of(u)].push_back(u);
    }
    std::vector<UserGroup> groups;
    groups.reserve(by_roles.size());
    for (auto& [roles, users] : by_roles) {
        groups.push_back({roles, std::move(users)});
    }
    // Order by first member so group ids follow user ids.
    std::sort(groups.begin(), groups.end(),
              [](const UserGroup& a, const UserGroup& b) { return a.users.front() < b.users.front(); });
    return groups;
}

void write_policy(std::ostream& os, const RbacPolicy& policy) {
    os << "users=" << policy.num_users() << " roles=" << policy.num_roles() << " docs=" << policy.num_docs()
       << '\n';
    for (UserId u = 0; u < policy.num_users(); ++u) {
        if (!policy.user_active(u)) {
            os << "xu " << u << '\n';
            continue;
        }
        os << "ur " << u;
        for (RoleId r : policy.roles_of(u)) {
            os << ' ' << r;
        }
        os << '\n';
    }
    for (RoleId r = 0; r < policy.num_roles(); ++r) {
        if (!policy.role_active(r)) {
            os << "xr " << r << '\n';
            continue;
        }
        os << "rd " << r;
        for (DocId d : policy.docs_of(r)) {
            os << ' ' << d;
        }
        os << '\n';
    }
}

RbacPolicy read_policy(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw DomainError("policy: missing header");
    }
    std::size_t nu = 0;
    std::size_t nr = 0;
    std::size_t nd = 0;
    if (std::sscanf(line.c_str(), "users=%zu roles=%zu docs=%zu", &nu, &nr, &nd) != 3) {
        throw DomainError("policy: malformed header: " + line);
    }
    std::vector<std::vector<RoleId>> user_roles(nu);
    std::vector<DocList> role_docs(nr);
    std::vector<UserId> retired_users;
    std::vector<RoleId> retired_roles;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string tag;
        std::uint64_t id = 0;
        if (!(ls >> tag >> id)) {
            throw DomainError("policy: malformed line: " + line);
        }
        if (tag == "ur" || tag == "xu") {
            if (id >= nu) {
                throw DomainError("policy: user id out of range: " + line);
            }
            if (tag == "xu") {
                retired_users.push_back(static_cast<UserId>(id));
                continue;
            }
            std::uint64_t r = 0;
            while (ls >> r) {
                user_roles[id].push_back(static_cast<RoleId>(r));
            }
        } else if (tag == "rd" || tag == "xr") {
            if (id >= nr) {
                throw DomainError("policy: role id out of range: " + line);
            }
            if (tag == "xr") {
                retired_roles.push_back(static_cast<RoleId>(id));
                // Placeholder so construction accepts the slot.
                role_docs[id] = {0};
                continue;
            }
            std::uint64_t d = 0;
            while (ls >> d) {
                role_docs[id].push_back(static_cast<DocId>(d));
            }
        } else {
            throw DomainError("policy: unknown tag: " + line);
        }
    }
    RbacPolicy policy(nd, std::move(user_roles), std::move(role_docs));
    for (RoleId r : retired_roles) {
        policy.retire_role(r);
    }
    for (UserId u : retired_users) {
        policy.retire_user(u);
    }
    return policy;
}

}  // namespace permvec

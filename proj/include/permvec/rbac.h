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

#include <iosfwd>
#include <span>
#include <vector>

#include "permvec/plan.h"
#include "permvec/types.h"

namespace permvec {

/// Flat RBAC system: users → roles (UA) and roles → documents (PA).
///
/// Ids are dense from 0. Maintenance may retire users or roles; retired ids
/// keep their slot but are skipped by every consumer.
class RbacPolicy {
 public:
    RbacPolicy() = default;

    /// Validates and normalizes (sorts, dedups) both maps. Rejects roles with
    /// an empty document set and out-of-range ids.
    RbacPolicy(std::size_t num_docs, std::vector<std::vector<RoleId>> user_roles,
               std::vector<DocList> role_docs);

    [[nodiscard]] std::size_t num_users() const {
        return user_roles_.size();
    }
    [[nodiscard]] std::size_t num_roles() const {
        return role_docs_.size();
    }
    [[nodiscard]] std::size_t num_docs() const {
        return num_docs_;
    }

    [[nodiscard]] const std::vector<RoleId>& roles_of(UserId u) const;
    [[nodiscard]] const DocList& docs_of(RoleId r) const;

    [[nodiscard]] bool user_active(UserId u) const {
        return u < user_active_.size() && user_active_[u];
    }
    [[nodiscard]] bool role_active(RoleId r) const {
        return r < role_active_.size() && role_active_[r];
    }
    [[nodiscard]] std::vector<UserId> active_users() const;
    [[nodiscard]] std::vector<RoleId> active_roles() const;

    // Mutation, used by the maintenance module only.
    UserId add_user(std::vector<RoleId> roles);
    void set_user_roles(UserId u, std::vector<RoleId> roles);
    void retire_user(UserId u);
    RoleId add_role(DocList docs);
    void set_role_docs(RoleId r, DocList docs);
    void retire_role(RoleId r);
    void grow_docs(std::size_t num_docs);

 private:
    void check_role_ids(const std::vector<RoleId>& roles) const;

    std::size_t num_docs_ = 0;
    std::vector<std::vector<RoleId>> user_roles_;
    std::vector<DocList> role_docs_;
    std::vector<bool> user_active_;
    std::vector<bool> role_active_;
};

/// Union of the document sets of the user's roles.
DocList auth_user(const RbacPolicy& policy, UserId u);
DocList auth_role(const RbacPolicy& policy, RoleId r);

/// Average over routed partitions of |auth(u) ∩ π| / |π|.
double user_selectivity(const RbacPolicy& policy, UserId u, const PartitionPlan& plan,
                        const RoutingTable& routing);
/// Arithmetic mean of user_selectivity over active users.
double mean_selectivity(const RbacPolicy& policy, const PartitionPlan& plan, const RoutingTable& routing);

/// Distinct role combinations among active users, with their members.
struct UserGroup {
    std::vector<RoleId> roles;
    std::vector<UserId> users;
};
std::vector<UserGroup> group_users_by_roles(const RbacPolicy& policy);

/// Line format: `users=<n> roles=<n> docs=<n>` header, `ur <user> <role...>`,
/// `rd <role> <doc...>`. Retired ids are written as `xu <user>` / `xr <role>`.
void write_policy(std::ostream& os, const RbacPolicy& policy);
RbacPolicy read_policy(std::istream& is);

}  // namespace permvec

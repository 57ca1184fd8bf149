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
#include <string>
#include <vector>

#include "permvec/types.h"

namespace permvec {

class RbacPolicy;

/// Overlapping partitioning of the document set. Each partition owns a set of
/// roles; every active role belongs to exactly one partition.
struct PartitionPlan {
    std::vector<DocList> partitions;
    std::vector<std::vector<RoleId>> roles_of;
    std::size_t num_docs = 0;

    [[nodiscard]] std::size_t size() const {
        return partitions.size();
    }
    [[nodiscard]] std::size_t total_docs() const;
    /// Partition holding role r, or size() if none.
    [[nodiscard]] PartitionId home_of(RoleId r) const;

    /// Throws InternalError when a structural invariant does not hold for `policy`.
    void validate(const RbacPolicy& policy) const;
};

/// Per-user (and per-role) minimal partition cover.
struct RoutingTable {
    std::vector<std::vector<PartitionId>> user_routes;
    std::vector<std::vector<PartitionId>> role_routes;

    [[nodiscard]] const std::vector<PartitionId>& of_user(UserId u) const;
    [[nodiscard]] const std::vector<PartitionId>& of_role(RoleId r) const;
};

/// Text format: `partition <id>: roles=<r...>` lines, then a size summary.
void write_plan(std::ostream& os, const PartitionPlan& plan);
/// Rebuilds partition doc sets from the role lists; a partition whose
/// recorded size is |D| is the full document set.
PartitionPlan read_plan(std::istream& is, const RbacPolicy& policy);

/// `user <id>: partitions=<p...>` lines; inactive users are skipped.
void write_routing(std::ostream& os, const RoutingTable& routing, const RbacPolicy& policy);
RoutingTable read_routing(std::istream& is, const RbacPolicy& policy);

}  // namespace permvec

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
#include <optional>
#include <vector>

#include "permvec/rbac.h"
#include "permvec/types.h"

namespace permvec {

struct UniformParams {
    std::size_t num_users = 1000;
    std::size_t num_roles = 100;
    std::size_t num_docs = 20000;
    std::size_t max_roles_per_user = 2;   // m_r
    std::size_t max_docs_per_role = 1000; // m_p
    /// Lower end of the per-role doc count draw; 0 means 1.
    std::size_t min_docs_per_role = 0;
};

struct TreeParams {
    std::size_t height = 4;
    std::size_t branch_lo = 3;
    std::size_t branch_hi = 4;
    std::size_t num_users = 1000;
    std::size_t num_roles = 100;
    std::size_t num_docs = 20000;
    /// When set, each node's own subset size is Poisson(mean) instead of
    /// the round-robin share.
    std::optional<double> poisson_mean;
};

struct ErbacParams {
    std::size_t n_fr = 40;
    std::size_t n_br = 100;
    std::size_t m_fr = 3;
    std::size_t m_br = 3;
    std::size_t m_p = 800;
    std::size_t num_users = 1000;
    std::size_t num_docs = 20000;
};

UniformParams uniform_alpha(std::size_t num_docs, std::size_t num_users = 1000, std::size_t num_roles = 100);
TreeParams tree_alpha(std::size_t num_docs, std::size_t num_users = 1000, std::size_t num_roles = 100);
ErbacParams erbac_alpha(std::size_t num_docs, std::size_t num_users = 1000);
ErbacParams erbac_beta(std::size_t num_docs, std::size_t num_users = 1000);

RbacPolicy gen_uniform(const UniformParams& params, std::uint64_t seed);

/// Role forest: trees of `height` levels are grown breadth-first with
/// branch_lo..branch_hi children per node; a new tree is started whenever
/// the current one reaches full height before num_roles roles exist. Roles
/// are numbered in creation order. Each role sees its own doc subset plus
/// every ancestor's. Users get one non-root role each.
RbacPolicy gen_tree(const TreeParams& params, std::uint64_t seed);

/// Parent of each role in the forest gen_tree builds for (params, seed);
/// roots map to themselves.
std::vector<RoleId> tree_parents(const TreeParams& params, std::uint64_t seed);

RbacPolicy gen_erbac(const ErbacParams& params, std::uint64_t seed);

struct Query {
    UserId user = 0;
    std::uint32_t vec = 0;  // row in the dataset used as query vector
};

struct QueryWorkload {
    std::size_t k = 10;
    std::vector<Query> queries;
};

/// Uniform users among the policy's active users, uniform dataset rows.
QueryWorkload gen_queries(const RbacPolicy& policy, std::size_t dataset_size, std::size_t n_queries,
                          std::size_t k, std::uint64_t seed);

/// `k=<k>` then `q <user> <row>` lines.
void write_workload(std::ostream& os, const QueryWorkload& w);
QueryWorkload read_workload(std::istream& is);

}  // namespace permvec

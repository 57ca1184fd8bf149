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
#include <string>
#include <vector>

#include "permvec/partitioner.h"
#include "permvec/query_engine.h"

namespace permvec {

enum class ChangeKind { user_add, user_del, doc_add, doc_del, role_add, role_del };

/// One change-log entry. Line syntax:
///   user_add <role...>
///   user_del <user>
///   doc_add <role> <doc>
///   doc_del <role> <doc>
///   role_add <doc...> [: <user...>]   (listed users gain the new role)
///   role_del <role>
struct ChangeOp {
    ChangeKind kind = ChangeKind::user_add;
    std::vector<std::uint32_t> ids;    // roles, a user, (role, doc), docs
    std::vector<UserId> users;         // role_add only
};

ChangeOp parse_change(const std::string& line);
std::string format_change(const ChangeOp& op);
/// Blank lines and lines starting with '#' are skipped.
std::vector<ChangeOp> read_changes(std::istream& is);

struct ApplyResult {
    std::uint32_t new_id = 0;          // user or role created, if any
    std::vector<UserId> rerouted;      // users whose route was recomputed
    PartitionId placed = 0;            // role_add: chosen partition
    bool new_partition = false;        // role_add: placed in a fresh one
    std::vector<UserId> retired;       // role_del: users left without roles
};

/// Applies one change in place. Needs exclusive access to `dep`.
ApplyResult apply(Deployment& dep, const ChangeOp& op, const SplitConfig& config);

struct StalenessReport {
    double memory_ratio = 0.0;
    double current_cost = 0.0;  // modeled mean user cost of the deployed plan
    double fresh_cost = 0.0;    // same, for a fresh greedy_split
    double fresh_memory_ratio = 0.0;
    double gap = 0.0;           // current - fresh
};

StalenessReport staleness_report(const Deployment& dep, const SplitConfig& config);

}  // namespace permvec

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
#include <optional>
#include <vector>

#include "permvec/partitioner.h"

namespace permvec {

/// Mutable role-atomic plan with the bookkeeping needed to price a role
/// move without rebuilding routes from scratch.
///
/// Per partition it keeps how many of its roles grant each doc, a doc
/// bitmap, and intersection counts with every role and every user group
/// (users sharing one role set). A move only touches the docs that leave
/// the source or enter the destination, so deltas flow through doc->role
/// and doc->group inverted lists.
class PlanState {
 public:
    /// The initial single partition holding every document.
    PlanState(const RbacPolicy& policy, const SplitConfig& config);
    /// A role-atomic plan (e.g. one produced by greedy_split).
    PlanState(const RbacPolicy& policy, const SplitConfig& config, const PartitionPlan& plan);

    struct Summary {
        double user_sel = 0.0;
        double role_sel = 0.0;
        EfSolution ef_user;
        EfSolution ef_role;
        double user_cost = 0.0;
        double role_cost = 0.0;
    };

    [[nodiscard]] std::size_t num_partitions() const {
        return parts_.size();
    }
    [[nodiscard]] std::size_t partition_size(PartitionId p) const {
        return parts_[p].size;
    }
    [[nodiscard]] const std::vector<RoleId>& partition_roles(PartitionId p) const {
        return parts_[p].roles;
    }
    [[nodiscard]] std::size_t total_docs() const {
        return total_;
    }
    [[nodiscard]] const Summary& summary() const {
        return cur_;
    }
    [[nodiscard]] const std::vector<PartitionId>& group_route(std::size_t g) const {
        return routes_[g];
    }

    /// Largest partition by (docs, roles, lower id); with `splittable`
    /// only partitions of at least two roles, skipping `excluded` ones.
    [[nodiscard]] std::optional<PartitionId> largest(bool splittable, const std::vector<bool>& excluded = {}) const;

    PartitionId open_partition();
    /// Drops the last partition, which must hold no roles.
    void close_last();

    /// One entry per role in src. Candidates over budget are not priced.
    std::vector<SplitCandidate> evaluate_moves(PartitionId src, PartitionId dst);
    void apply_move(RoleId r, PartitionId src, PartitionId dst);

    [[nodiscard]] PartitionPlan to_plan() const;

 private:
    struct Part {
        std::vector<std::uint16_t> cover;
        DocBitmap bits;
        std::size_t size = 0;
        std::vector<RoleId> roles;
    };
    struct Group {
        std::vector<RoleId> roles;
        double weight = 0.0;
        DocBitmap bits;
        std::size_t auth_size = 0;
    };
    static constexpr PartitionId kNone = UINT32_MAX;

    void init_common();
    void add_part();
    void assign_role(RoleId r, PartitionId p);
    void recompute();
    Summary summarize_current() const;
    template <typename Cov, typename Size, typename Bits>
    bool greedy_cover(std::size_t g, const Cov& cov, const Size& size, const Bits& bits,
                      std::vector<PartitionId>& route) const;
    void prepare_context(PartitionId src, PartitionId dst);
    SplitCandidate price_move(RoleId r, PartitionId src, PartitionId dst);

    const RbacPolicy& policy_;
    SplitConfig config_;
    std::size_t num_docs_ = 0;
    std::vector<RoleId> roles_;          // active roles
    std::vector<std::size_t> role_size_; // by RoleId
    std::vector<Group> groups_;
    double total_weight_ = 0.0;
    std::vector<std::uint32_t> doc_role_off_, doc_role_;
    std::vector<std::uint32_t> doc_group_off_, doc_group_;
    DocList orphans_;
    bool initial_ = false;  // partition 0 is still the whole document set

    std::vector<Part> parts_;
    std::vector<std::vector<std::uint32_t>> ri_;  // [p][role]
    std::vector<std::vector<std::uint32_t>> ui_;  // [p][group]
    std::size_t total_ = 0;
    std::vector<std::vector<PartitionId>> routes_;
    std::vector<std::uint8_t> tie_;
    std::vector<PartitionId> role_route_;
    std::vector<PartitionId> home_;
    Summary cur_;

    // Scratch for pricing.
    std::vector<PartitionId> other_first_;
    std::vector<PartitionId> other_full_;
    std::vector<std::int32_t> d_src_g_, d_dst_g_, d_src_r_, d_dst_r_;
    std::vector<std::uint32_t> touched_g_, touched_r_;
    std::vector<std::vector<PartitionId>> scratch_routes_;
    DocList leaving_, entering_;
    DocBitmap hyp_src_, hyp_dst_;
    mutable std::vector<std::uint64_t> uncovered_;
    mutable std::vector<PartitionId> cand_;
};

}  // namespace permvec

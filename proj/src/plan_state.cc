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

#include "permvec/plan_state.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

namespace permvec {

namespace {

std::size_t and_count(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    }
    return n;
}

void build_csr(std::size_t n, const std::vector<std::pair<DocId, std::uint32_t>>& pairs,
               std::vector<std::uint32_t>& off, std::vector<std::uint32_t>& data) {
    off.assign(n + 1, 0);
    for (const auto& pr : pairs) {
        ++off[pr.first + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        off[i + 1] += off[i];
    }
    data.resize(pairs.size());
    std::vector<std::uint32_t> pos(off.begin(), off.end() - 1);
    for (const auto& pr : pairs) {
        data[pos[pr.first]++] = pr.second;
    }
}

}  // namespace

PlanState::PlanState(const RbacPolicy& policy, const SplitConfig& config) : policy_(policy), config_(config) {
    init_common();
    add_part();
    for (RoleId r : roles_) {
        assign_role(r, 0);
    }
    for (DocId d : orphans_) {
        parts_[0].bits.set(d);
    }
    parts_[0].size += orphans_.size();
    initial_ = true;
    recompute();
}

PlanState::PlanState(const RbacPolicy& policy, const SplitConfig& config, const PartitionPlan& plan)
    : policy_(policy), config_(config) {
    init_common();
    std::vector<int> seen(policy.num_roles(), 0);
    for (PartitionId p = 0; p < plan.size(); ++p) {
        add_part();
        for (RoleId r : plan.roles_of[p]) {
            if (!policy.role_active(r) || seen[r]++ != 0) {
                throw DomainError(fmt::format("plan state: role {} is unknown or repeated", r));
            }
            assign_role(r, p);
        }
    }
    for (RoleId r : roles_) {
        if (seen[r] == 0) {
            throw DomainError(fmt::format("plan state: role {} has no partition", r));
        }
    }
    if (plan.size() == 1 && plan.partitions[0].size() == num_docs_) {
        for (DocId d : orphans_) {
            parts_[0].bits.set(d);
        }
        parts_[0].size += orphans_.size();
        initial_ = true;
    }
    recompute();
}

void PlanState::init_common() {
    config_.validate();
    num_docs_ = policy_.num_docs();
    roles_ = policy_.active_roles();
    role_size_.assign(policy_.num_roles(), 0);
    home_.assign(policy_.num_roles(), kNone);
    role_route_.assign(policy_.num_roles(), kNone);

    std::vector<std::pair<DocId, std::uint32_t>> pairs;
    DocBitmap granted(num_docs_);
    for (RoleId r : roles_) {
        const auto& docs = policy_.docs_of(r);
        role_size_[r] = docs.size();
        for (DocId d : docs) {
            pairs.emplace_back(d, r);
            granted.set(d);
        }
    }
    build_csr(num_docs_, pairs, doc_role_off_, doc_role_);
    orphans_.clear();
    for (DocId d = 0; d < num_docs_; ++d) {
        if (!granted.test(d)) {
            orphans_.push_back(d);
        }
    }

    const auto weights = objective_weights(policy_, config_);
    pairs.clear();
    groups_.clear();
    total_weight_ = 0.0;
    for (auto& ug : group_users_by_roles(policy_)) {
        if (ug.roles.empty()) {
            continue;
        }
        double w = 0.0;
        for (UserId u : ug.users) {
            w += weights[u];
        }
        if (!(w > 0.0)) {
            continue;
        }
        Group g;
        g.roles = ug.roles;
        g.weight = w;
        DocList auth;
        for (RoleId r : g.roles) {
            auth = union_of(auth, policy_.docs_of(r));
        }
        g.bits = DocBitmap(num_docs_, auth);
        g.auth_size = auth.size();
        const auto gid = static_cast<std::uint32_t>(groups_.size());
        for (DocId d : auth) {
            pairs.emplace_back(d, gid);
        }
        total_weight_ += w;
        groups_.push_back(std::move(g));
    }
    build_csr(num_docs_, pairs, doc_group_off_, doc_group_);

    const std::size_t ng = groups_.size();
    routes_.assign(ng, {});
    tie_.assign(ng, 0);
    other_first_.assign(ng, kNone);
    other_full_.assign(policy_.num_roles(), kNone);
    d_src_g_.assign(ng, 0);
    d_dst_g_.assign(ng, 0);
    d_src_r_.assign(policy_.num_roles(), 0);
    d_dst_r_.assign(policy_.num_roles(), 0);
    scratch_routes_.assign(ng, {});
    hyp_src_ = DocBitmap(num_docs_);
    hyp_dst_ = DocBitmap(num_docs_);
}

void PlanState::add_part() {
    Part p;
    p.cover.assign(num_docs_, 0);
    p.bits = DocBitmap(num_docs_);
    parts_.push_back(std::move(p));
    ri_.emplace_back(policy_.num_roles(), 0);
    ui_.emplace_back(groups_.size(), 0);
}

void PlanState::assign_role(RoleId r, PartitionId p) {
    Part& part = parts_[p];
    auto& ri = ri_[p];
    auto& ui = ui_[p];
    for (DocId d : policy_.docs_of(r)) {
        if (part.cover[d]++ != 0) {
            continue;
        }
        part.bits.set(d);
        ++part.size;
        for (auto i = doc_group_off_[d]; i < doc_group_off_[d + 1]; ++i) {
            ++ui[doc_group_[i]];
        }
        for (auto i = doc_role_off_[d]; i < doc_role_off_[d + 1]; ++i) {
            ++ri[doc_role_[i]];
        }
    }
    part.roles.insert(std::upper_bound(part.roles.begin(), part.roles.end(), r), r);
    home_[r] = p;
}

PartitionId PlanState::open_partition() {
    add_part();
    return static_cast<PartitionId>(parts_.size() - 1);
}

void PlanState::close_last() {
    if (parts_.empty() || !parts_.back().roles.empty()) {
        throw InternalError("plan state: closing a partition that still holds roles");
    }
    parts_.pop_back();
    ri_.pop_back();
    ui_.pop_back();
}

std::optional<PartitionId> PlanState::largest(bool splittable, const std::vector<bool>& excluded) const {
    std::optional<PartitionId> best;
    for (PartitionId p = 0; p < parts_.size(); ++p) {
        const Part& part = parts_[p];
        if ((splittable && part.roles.size() < 2) || (p < excluded.size() && excluded[p])) {
            continue;
        }
        if (!best) {
            best = p;
            continue;
        }
        const Part& b = parts_[*best];
        if (part.size > b.size || (part.size == b.size && part.roles.size() > b.roles.size())) {
            best = p;
        }
    }
    return best;
}

template <typename Cov, typename Size, typename Bits>
bool PlanState::greedy_cover(std::size_t g, const Cov& cov, const Size& size, const Bits& bits,
                             std::vector<PartitionId>& route) const {
    route.clear();
    bool tie = false;
    const Group& grp = groups_[g];
    cand_.clear();
    for (PartitionId p = 0; p < parts_.size(); ++p) {
        if (cov(p) > 0) {
            cand_.push_back(p);
        }
    }
    std::sort(cand_.begin(), cand_.end(), [&](PartitionId a, PartitionId b) {
        const auto ca = cov(a);
        const auto cb = cov(b);
        if (ca != cb) {
            return ca > cb;
        }
        if (size(a) != size(b)) {
            return size(a) < size(b);
        }
        return a < b;
    });
    if (cand_.empty()) {
        throw InternalError(fmt::format("plan state: group {} is not covered", g));
    }
    if (cov(cand_[0]) == grp.auth_size) {
        route.push_back(cand_[0]);
        return cand_.size() > 1 && cov(cand_[1]) == grp.auth_size;
    }
    const auto gw = grp.bits.words();
    uncovered_.assign(gw.begin(), gw.end());
    std::size_t remaining = grp.auth_size;
    while (remaining > 0) {
        std::size_t best_i = cand_.size();
        std::size_t best_c = 0;
        int best_count = 0;
        for (std::size_t i = 0; i < cand_.size(); ++i) {
            const PartitionId p = cand_[i];
            if (cov(p) < best_c || cov(p) == 0) {
                break;
            }
            const std::size_t c = and_count(uncovered_, bits(p));
            if (c == 0) {
                continue;
            }
            if (c > best_c) {
                best_c = c;
                best_i = i;
                best_count = 1;
            } else if (c == best_c) {
                ++best_count;
                const PartitionId b = cand_[best_i];
                if (size(p) < size(b) || (size(p) == size(b) && p < b)) {
                    best_i = i;
                }
            }
        }
        if (best_i == cand_.size()) {
            throw InternalError(fmt::format("plan state: group {} cannot be covered", g));
        }
        tie = tie || best_count > 1;
        const PartitionId p = cand_[best_i];
        route.push_back(p);
        const auto pb = bits(p);
        for (std::size_t w = 0; w < uncovered_.size(); ++w) {
            uncovered_[w] &= ~pb[w];
        }
        remaining -= best_c;
        cand_.erase(cand_.begin() + static_cast<std::ptrdiff_t>(best_i));
    }
    std::sort(route.begin(), route.end());
    return tie;
}

void PlanState::recompute() {
    total_ = 0;
    for (const auto& part : parts_) {
        total_ += part.size;
    }
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        tie_[g] = greedy_cover(
            g, [&](PartitionId p) { return static_cast<std::size_t>(ui_[p][g]); },
            [&](PartitionId p) { return parts_[p].size; },
            [&](PartitionId p) { return parts_[p].bits.words(); }, routes_[g]);
    }
    for (RoleId r : roles_) {
        PartitionId best = kNone;
        for (PartitionId p = 0; p < parts_.size(); ++p) {
            if (ri_[p][r] == role_size_[r] && (best == kNone || parts_[p].size < parts_[best].size)) {
                best = p;
            }
        }
        if (best == kNone) {
            throw InternalError(fmt::format("plan state: role {} has no full container", r));
        }
        role_route_[r] = best;
    }
    cur_ = summarize_current();
}

PlanState::Summary PlanState::summarize_current() const {
    Summary s;
    const auto k = static_cast<double>(config_.k);
    double sr = 0.0;
    for (RoleId r : roles_) {
        sr += static_cast<double>(role_size_[r]) / static_cast<double>(parts_[role_route_[r]].size);
    }
    s.role_sel = roles_.empty() ? 1.0 : sr / static_cast<double>(roles_.size());
    s.ef_role = solve_ef_s(config_.recall, config_.epsilon, s.role_sel, config_.k, config_.ef_cap);
    double cr = 0.0;
    for (RoleId r : roles_) {
        const double n = static_cast<double>(parts_[role_route_[r]].size);
        cr += partition_cost(config_.model, n, static_cast<double>(s.ef_role.ef_s),
                             static_cast<double>(role_size_[r]) / n, k);
    }
    s.role_cost = roles_.empty() ? 0.0 : cr / static_cast<double>(roles_.size());

    double su = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        double sel = 0.0;
        for (PartitionId p : routes_[g]) {
            sel += static_cast<double>(ui_[p][g]) / static_cast<double>(parts_[p].size);
        }
        su += groups_[g].weight * sel / static_cast<double>(routes_[g].size());
    }
    s.user_sel = total_weight_ > 0.0 ? su / total_weight_ : 1.0;
    s.ef_user = solve_ef_s(config_.recall, config_.epsilon, s.user_sel, config_.k, config_.ef_cap);
    double cu = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        double c = 0.0;
        for (PartitionId p : routes_[g]) {
            const double n = static_cast<double>(parts_[p].size);
            c += partition_cost(config_.model, n, static_cast<double>(s.ef_user.ef_s),
                                static_cast<double>(ui_[p][g]) / n, k);
        }
        cu += groups_[g].weight * c;
    }
    s.user_cost = total_weight_ > 0.0 ? cu / total_weight_ : 0.0;
    return s;
}

void PlanState::prepare_context(PartitionId src, PartitionId dst) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        PartitionId best = kNone;
        for (PartitionId p = 0; p < parts_.size(); ++p) {
            if (p == src || p == dst || ui_[p][g] == 0) {
                continue;
            }
            if (best == kNone || ui_[p][g] > ui_[best][g] ||
                (ui_[p][g] == ui_[best][g] && parts_[p].size < parts_[best].size)) {
                best = p;
            }
        }
        other_first_[g] = best;
    }
    for (RoleId r : roles_) {
        PartitionId best = kNone;
        for (PartitionId p = 0; p < parts_.size(); ++p) {
            if (p == src || p == dst || ri_[p][r] != role_size_[r]) {
                continue;
            }
            if (best == kNone || parts_[p].size < parts_[best].size) {
                best = p;
            }
        }
        other_full_[r] = best;
    }
}

SplitCandidate PlanState::price_move(RoleId r, PartitionId src, PartitionId dst) {
    SplitCandidate out;
    out.role = r;
    const Part& ps = parts_[src];
    const Part& pd = parts_[dst];
    leaving_.clear();
    entering_.clear();
    for (DocId d : policy_.docs_of(r)) {
        if (ps.cover[d] == 1) {
            leaving_.push_back(d);
        }
        if (pd.cover[d] == 0) {
            entering_.push_back(d);
        }
    }
    const std::size_t orphan_leave = (initial_ && src == 0) ? orphans_.size() : 0;
    const std::size_t size_src = ps.size - leaving_.size() - orphan_leave;
    const std::size_t size_dst = pd.size + entering_.size();
    out.delta_size = static_cast<long long>(entering_.size()) - static_cast<long long>(leaving_.size()) -
                     static_cast<long long>(orphan_leave);
    const double budget = config_.alpha * static_cast<double>(num_docs_);
    out.within_budget = static_cast<double>(static_cast<long long>(total_) + out.delta_size) <= budget + 1e-9;
    if (!out.within_budget) {
        return out;
    }

    for (DocId d : leaving_) {
        for (auto i = doc_group_off_[d]; i < doc_group_off_[d + 1]; ++i) {
            const auto g = doc_group_[i];
            if (d_src_g_[g]++ == 0 && d_dst_g_[g] == 0) {
                touched_g_.push_back(g);
            }
        }
        for (auto i = doc_role_off_[d]; i < doc_role_off_[d + 1]; ++i) {
            const auto q = doc_role_[i];
            if (d_src_r_[q]++ == 0 && d_dst_r_[q] == 0) {
                touched_r_.push_back(q);
            }
        }
    }
    for (DocId d : entering_) {
        for (auto i = doc_group_off_[d]; i < doc_group_off_[d + 1]; ++i) {
            const auto g = doc_group_[i];
            if (d_dst_g_[g]++ == 0 && d_src_g_[g] == 0) {
                touched_g_.push_back(g);
            }
        }
        for (auto i = doc_role_off_[d]; i < doc_role_off_[d + 1]; ++i) {
            const auto q = doc_role_[i];
            if (d_dst_r_[q]++ == 0 && d_src_r_[q] == 0) {
                touched_r_.push_back(q);
            }
        }
    }

    auto size_of = [&](PartitionId p) {
        return p == src ? size_src : p == dst ? size_dst : parts_[p].size;
    };
    const auto k = static_cast<double>(config_.k);

    // Roles: each routes to its smallest full container.
    double sr = 0.0;
    auto role_part = [&](RoleId q) {
        PartitionId best = other_full_[q];
        auto consider = [&](PartitionId p, std::size_t have) {
            if (have != role_size_[q]) {
                return;
            }
            if (best == kNone || size_of(p) < size_of(best) || (size_of(p) == size_of(best) && p < best)) {
                best = p;
            }
        };
        consider(src, ri_[src][q] - d_src_r_[q]);
        consider(dst, ri_[dst][q] + d_dst_r_[q]);
        return best;
    };
    // Cache per role route size in the delta arrays' spare slot is not
    // needed; two passes are cheap.
    for (RoleId q : roles_) {
        sr += static_cast<double>(role_size_[q]) / static_cast<double>(size_of(role_part(q)));
    }
    const double role_sel = roles_.empty() ? 1.0 : sr / static_cast<double>(roles_.size());
    const auto ef_role = solve_ef_s(config_.recall, config_.epsilon, role_sel, config_.k, config_.ef_cap);
    double cr = 0.0;
    for (RoleId q : roles_) {
        const double n = static_cast<double>(size_of(role_part(q)));
        cr += partition_cost(config_.model, n, static_cast<double>(ef_role.ef_s),
                             static_cast<double>(role_size_[q]) / n, k);
    }
    cr = roles_.empty() ? 0.0 : cr / static_cast<double>(roles_.size());

    // Users.
    bool hyp_ready = false;
    double su = 0.0;
    std::vector<const std::vector<PartitionId>*> route_of(groups_.size());
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        auto cov = [&](PartitionId p) -> std::size_t {
            if (p == src) {
                return ui_[src][g] - static_cast<std::size_t>(d_src_g_[g]);
            }
            if (p == dst) {
                return ui_[dst][g] + static_cast<std::size_t>(d_dst_g_[g]);
            }
            return ui_[p][g];
        };
        if (d_src_g_[g] == 0 && d_dst_g_[g] == 0 && tie_[g] == 0) {
            route_of[g] = &routes_[g];
        } else {
            PartitionId best = other_first_[g];
            for (PartitionId p : {src, dst}) {
                const auto c = cov(p);
                if (c == 0) {
                    continue;
                }
                if (best == kNone || c > cov(best) ||
                    (c == cov(best) && (size_of(p) < size_of(best) || (size_of(p) == size_of(best) && p < best)))) {
                    best = p;
                }
            }
            auto& route = scratch_routes_[g];
            if (best != kNone && cov(best) == groups_[g].auth_size) {
                route.assign(1, best);
            } else {
                if (!hyp_ready) {
                    auto hs = hyp_src_.words();
                    auto hd = hyp_dst_.words();
                    const auto ss = ps.bits.words();
                    const auto sd = pd.bits.words();
                    std::copy(ss.begin(), ss.end(), hs.begin());
                    std::copy(sd.begin(), sd.end(), hd.begin());
                    for (DocId d : leaving_) {
                        hyp_src_.reset(d);
                    }
                    for (DocId d : entering_) {
                        hyp_dst_.set(d);
                    }
                    hyp_ready = true;
                }
                greedy_cover(
                    g, cov, size_of,
                    [&](PartitionId p) {
                        return p == src ? std::span<const std::uint64_t>(hyp_src_.words())
                                        : p == dst ? std::span<const std::uint64_t>(hyp_dst_.words())
                                                   : parts_[p].bits.words();
                    },
                    route);
            }
            route_of[g] = &route;
        }
        double sel = 0.0;
        for (PartitionId p : *route_of[g]) {
            sel += static_cast<double>(cov(p)) / static_cast<double>(size_of(p));
        }
        su += groups_[g].weight * sel / static_cast<double>(route_of[g]->size());
    }
    const double user_sel = total_weight_ > 0.0 ? su / total_weight_ : 1.0;
    const auto ef_user = solve_ef_s(config_.recall, config_.epsilon, user_sel, config_.k, config_.ef_cap);
    double cu = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        double c = 0.0;
        for (PartitionId p : *route_of[g]) {
            const std::size_t have = p == src   ? ui_[src][g] - static_cast<std::size_t>(d_src_g_[g])
                                     : p == dst ? ui_[dst][g] + static_cast<std::size_t>(d_dst_g_[g])
                                                : ui_[p][g];
            const double n = static_cast<double>(size_of(p));
            c += partition_cost(config_.model, n, static_cast<double>(ef_user.ef_s), static_cast<double>(have) / n, k);
        }
        cu += groups_[g].weight * c;
    }
    cu = total_weight_ > 0.0 ? cu / total_weight_ : 0.0;

    for (auto g : touched_g_) {
        d_src_g_[g] = 0;
        d_dst_g_[g] = 0;
    }
    for (auto q : touched_r_) {
        d_src_r_[q] = 0;
        d_dst_r_[q] = 0;
    }
    touched_g_.clear();
    touched_r_.clear();

    out.delta_role = cr - cur_.role_cost;
    out.delta_user = cu - cur_.user_cost;
    out.accepted = out.delta_role < -1e-12 * std::abs(cur_.role_cost) && out.delta_user < config_.eta;
    return out;
}

std::vector<SplitCandidate> PlanState::evaluate_moves(PartitionId src, PartitionId dst) {
    if (src >= parts_.size() || dst >= parts_.size() || src == dst) {
        throw DomainError("plan state: bad source or destination partition");
    }
    prepare_context(src, dst);
    std::vector<SplitCandidate> out;
    out.reserve(parts_[src].roles.size());
    for (RoleId r : parts_[src].roles) {
        out.push_back(price_move(r, src, dst));
    }
    return out;
}

void PlanState::apply_move(RoleId r, PartitionId src, PartitionId dst) {
    if (src >= parts_.size() || dst >= parts_.size() || src == dst || home_[r] != src) {
        throw DomainError(fmt::format("plan state: role {} is not in partition {}", r, src));
    }
    Part& ps = parts_[src];
    Part& pd = parts_[dst];
    for (DocId d : policy_.docs_of(r)) {
        if (--ps.cover[d] == 0) {
            ps.bits.reset(d);
            --ps.size;
            for (auto i = doc_group_off_[d]; i < doc_group_off_[d + 1]; ++i) {
                --ui_[src][doc_group_[i]];
            }
            for (auto i = doc_role_off_[d]; i < doc_role_off_[d + 1]; ++i) {
                --ri_[src][doc_role_[i]];
            }
        }
        if (pd.cover[d]++ == 0) {
            pd.bits.set(d);
            ++pd.size;
            for (auto i = doc_group_off_[d]; i < doc_group_off_[d + 1]; ++i) {
                ++ui_[dst][doc_group_[i]];
            }
            for (auto i = doc_role_off_[d]; i < doc_role_off_[d + 1]; ++i) {
                ++ri_[dst][doc_role_[i]];
            }
        }
    }
    if (initial_ && src == 0) {
        for (DocId d : orphans_) {
            ps.bits.reset(d);
        }
        ps.size -= orphans_.size();
    }
    initial_ = false;
    ps.roles.erase(std::find(ps.roles.begin(), ps.roles.end(), r));
    pd.roles.insert(std::upper_bound(pd.roles.begin(), pd.roles.end(), r), r);
    home_[r] = dst;
    recompute();
}

PartitionPlan PlanState::to_plan() const {
    PartitionPlan plan;
    plan.num_docs = num_docs_;
    for (const Part& part : parts_) {
        DocList docs;
        docs.reserve(part.size);
        const auto w = part.bits.words();
        for (std::size_t i = 0; i < w.size(); ++i) {
            for (std::uint64_t x = w[i]; x != 0; x &= x - 1) {
                docs.push_back(static_cast<DocId>(i * 64 + static_cast<std::size_t>(std::countr_zero(x))));
            }
        }
        plan.partitions.push_back(std::move(docs));
        plan.roles_of.push_back(part.roles);
    }
    return plan;
}

}  // namespace permvec

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "permvec/partitioner.h"
#include "permvec/random.h"
#include "permvec/rbac.h"
#include "permvec/workload.h"

using namespace permvec;

namespace {

DocList range(DocId lo, DocId hi) {
    DocList out(hi - lo);
    std::iota(out.begin(), out.end(), lo);
    return out;
}

bool covers(const PartitionPlan& plan, const std::vector<PartitionId>& route, const DocList& auth) {
    DocList u;
    for (PartitionId p : route) {
        u = union_of(u, plan.partitions.at(p));
    }
    return is_subset(auth, u);
}

// Smallest number of partitions covering auth, by enumerating subsets of
// the partitions that intersect it.
std::size_t min_cover_size(const PartitionPlan& plan, const DocList& auth) {
    std::vector<PartitionId> cand;
    for (PartitionId p = 0; p < plan.size(); ++p) {
        if (intersection_size(auth, plan.partitions[p]) > 0) {
            cand.push_back(p);
        }
    }
    REQUIRE(cand.size() <= 12);
    std::size_t best = cand.size() + 1;
    for (unsigned mask = 1; mask < (1u << cand.size()); ++mask) {
        std::vector<PartitionId> pick;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (mask & (1u << i)) {
                pick.push_back(cand[i]);
            }
        }
        if (pick.size() < best && covers(plan, pick, auth)) {
            best = pick.size();
        }
    }
    return best;
}

SplitConfig base_config(double alpha) {
    SplitConfig c;
    c.alpha = alpha;
    c.epsilon = 0.9;
    c.k = 10;
    return c;
}

RbacPolicy random_small_policy(std::uint64_t seed, std::size_t roles, std::size_t docs = 200) {
    Rng rng(seed);
    std::vector<DocList> rd(roles);
    for (auto& d : rd) {
        const auto lo = static_cast<DocId>(rng.below(docs - 20));
        const auto len = static_cast<DocId>(10 + rng.below(docs / 2));
        d = range(lo, std::min<DocId>(static_cast<DocId>(docs), lo + len));
    }
    // Make sure every doc is reachable through some role.
    rd[0] = union_of(rd[0], range(0, 10));
    rd[roles - 1] = union_of(rd[roles - 1], range(static_cast<DocId>(docs - 10), static_cast<DocId>(docs)));
    std::vector<std::vector<RoleId>> ur;
    for (int u = 0; u < 40; ++u) {
        std::vector<RoleId> rs{static_cast<RoleId>(rng.below(roles))};
        if (rng.uniform() < 0.3) {
            rs.push_back(static_cast<RoleId>(rng.below(roles)));
        }
        ur.push_back(rs);
    }
    return RbacPolicy(docs, ur, rd);
}

}  // namespace

TEST_CASE("config validation") {
    auto c = base_config(0.9);
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = base_config(1.0);
    c.epsilon = 1.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = base_config(1.0);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("memory ratio of the baselines") {
    const RbacPolicy disjoint(100, {{0}, {1}}, {range(0, 50), range(50, 100)});
    CHECK(plan_memory_ratio(single_partition_plan(disjoint), disjoint) == 1.0);
    CHECK(plan_memory_ratio(role_partition_plan(disjoint), disjoint) == 1.0);
    const RbacPolicy overlap(100, {{0}, {1}}, {range(0, 70), range(30, 100)});
    CHECK(plan_memory_ratio(role_partition_plan(overlap), overlap) == doctest::Approx(1.4));
}

TEST_CASE("tree role partition overhead") {
    const auto pol = gen_tree(tree_alpha(20000), 3);
    const double r = plan_memory_ratio(role_partition_plan(pol), pol);
    CHECK(r > 3.5 * 0.75);
    CHECK(r < 3.5 * 1.25);
}

TEST_CASE("routing on the single partition") {
    const auto pol = gen_uniform(uniform_alpha(2000), 1);
    const auto plan = single_partition_plan(pol);
    const auto rt = build_routing(pol, plan);
    for (UserId u : pol.active_users()) {
        CHECK(rt.of_user(u) == std::vector<PartitionId>{0});
    }
}

TEST_CASE("routing of single-role users to their role partition") {
    const auto pol = gen_tree(tree_alpha(5000), 2);
    const auto plan = role_partition_plan(pol);
    const auto rt = build_routing(pol, plan);
    for (UserId u : pol.active_users()) {
        REQUIRE(pol.roles_of(u).size() == 1);
        CHECK(rt.of_user(u) == std::vector<PartitionId>{plan.home_of(pol.roles_of(u).front())});
    }
}

TEST_CASE("routing with nested partitions picks the superset") {
    const RbacPolicy pol(100, {{0, 1}, {0}, {1}}, {range(0, 40), range(0, 100)});
    const auto plan = role_partition_plan(pol);
    const auto rt = build_routing(pol, plan);
    CHECK(rt.of_user(0) == std::vector<PartitionId>{plan.home_of(1)});
    CHECK(min_cover_size(plan, auth_user(pol, 0)) == 1);
}

TEST_CASE("routing is a cover and near the minimum") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pol = random_small_policy(seed, 8);
        const auto plan = role_partition_plan(pol);
        const auto rt = build_routing(pol, plan);
        for (UserId u : pol.active_users()) {
            const auto auth = auth_user(pol, u);
            CHECK(covers(plan, rt.of_user(u), auth));
            CHECK(rt.of_user(u).size() >= min_cover_size(plan, auth));
            CHECK(route_auth(plan, auth) == rt.of_user(u));
        }
        for (RoleId r : pol.active_roles()) {
            CHECK(covers(plan, rt.of_role(r), pol.docs_of(r)));
        }
    }
}

TEST_CASE("routing ties go to the smaller partition") {
    // Doc set {0..9} is covered fully by both partitions.
    const RbacPolicy pol(30, {{0}, {1}, {2}}, {range(0, 10), range(0, 20), range(0, 30)});
    PartitionPlan plan;
    plan.num_docs = 30;
    plan.partitions = {range(0, 30), range(0, 20)};
    plan.roles_of = {{2}, {0, 1}};
    const auto rt = build_routing(pol, plan);
    CHECK(rt.of_user(0) == std::vector<PartitionId>{1});
    CHECK(rt.of_user(2) == std::vector<PartitionId>{0});
    CHECK(route_auth(plan, DocList{31}).empty());
}

TEST_CASE("greedy split at alpha one keeps one partition") {
    for (std::uint64_t seed : {1, 2}) {
        const auto pol = gen_tree(tree_alpha(5000), seed);
        const auto plan = greedy_split(pol, base_config(1.0));
        REQUIRE(plan.size() == 1);
        CHECK(plan.partitions[0].size() == 5000);
    }
}

TEST_CASE("greedy split separates disjoint roles") {
    std::vector<DocList> rd;
    std::vector<std::vector<RoleId>> ur;
    for (RoleId r = 0; r < 8; ++r) {
        rd.push_back(range(r * 500, (r + 1) * 500));
        for (int i = 0; i < 5; ++i) {
            ur.push_back({r});
        }
    }
    const RbacPolicy pol(4000, ur, rd);
    const auto plan = greedy_split(pol, base_config(1.0));
    CHECK(plan.size() == 8);
    CHECK(plan_memory_ratio(plan, pol) == 1.0);
    plan.validate(pol);
}

TEST_CASE("greedy split partition count on tree at 1.4") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto pol = gen_tree(tree_alpha(20000), seed);
        const auto plan = greedy_split(pol, base_config(1.4));
        plan.validate(pol);
        CHECK(plan.size() >= 12);
        CHECK(plan.size() <= 28);
    }
}

TEST_CASE("greedy split properties") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const RbacPolicy pol = seed % 2 ? gen_erbac(erbac_alpha(4000, 300), seed) : gen_uniform(uniform_alpha(4000, 300, 40), seed);
        for (double alpha : {1.2, 2.0}) {
            const auto cfg = base_config(alpha);
            const auto plan = greedy_split(pol, cfg);
            plan.validate(pol);
            CHECK(plan_memory_ratio(plan, pol) <= alpha * 1.06);
            const auto rt = build_routing(pol, plan);
            for (UserId u : pol.active_users()) {
                CHECK(covers(plan, rt.of_user(u), auth_user(pol, u)));
            }
            const double greedy = evaluate_plan(pol, plan, cfg).user_cost;
            const double single = evaluate_plan(pol, single_partition_plan(pol), cfg).user_cost;
            CHECK(greedy <= single * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("find best split agrees with the reference evaluation") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto pol = random_small_policy(100 + seed, 6);
        const auto cfg = base_config(2.0);
        const auto plan = single_partition_plan(pol);
        std::vector<SplitCandidate> cands;
        for (RoleId r : plan.roles_of[0]) {
            cands.push_back(evaluate_split(pol, plan, r, 0, 1, cfg));
        }
        CHECK(find_best_split(pol, plan, 0, 1, cfg) == select_split(cands));
    }
}

TEST_CASE("select split prefers shrinking moves") {
    std::vector<SplitCandidate> c(3);
    c[0] = {0, 10, -5.0, -5.0, true, true};
    c[1] = {1, -2, -0.1, -0.1, true, true};
    c[2] = {2, 1, -100.0, -100.0, true, false};
    CHECK(select_split(c) == RoleId{1});
    c[1].accepted = false;
    CHECK(select_split(c) == RoleId{0});
    c[0].accepted = false;
    CHECK_FALSE(select_split(c).has_value());
}

TEST_CASE("identical roles are never split") {
    // Moving either role duplicates its docs without any selectivity gain.
    const RbacPolicy pol(100, {{0}, {1}}, {range(0, 100), range(0, 100)});
    const auto cfg = base_config(3.0);
    const auto plan = single_partition_plan(pol);
    const auto cand = evaluate_split(pol, plan, 0, 0, 1, cfg);
    CHECK(cand.delta_size == 100);
    CHECK(cand.delta_role == doctest::Approx(0.0));
    CHECK_FALSE(cand.accepted);
    CHECK_FALSE(find_best_split(pol, plan, 0, 1, cfg).has_value());
}

TEST_CASE("user cost gate rejects moves") {
    const RbacPolicy pol(100, {{0}, {1}}, {range(0, 100), range(0, 5)});
    auto cfg = base_config(3.0);
    const auto plan = single_partition_plan(pol);
    CHECK(evaluate_split(pol, plan, 1, 0, 1, cfg).accepted);
    // Same move, but user cost must now drop by more than it can.
    cfg.eta = -1e12;
    CHECK_FALSE(evaluate_split(pol, plan, 1, 0, 1, cfg).accepted);
    CHECK_FALSE(find_best_split(pol, plan, 0, 1, cfg).has_value());
}

TEST_CASE("exhaustive optimum on two disjoint roles") {
    const RbacPolicy pol(1000, {{0}, {1}}, {range(0, 500), range(500, 1000)});
    auto cfg = base_config(1.0);
    cfg.model = CostModel::hnsw({1.0, 10.0});
    // Hand evaluation of both plans.
    const auto ef1 = solve_ef_s(cfg.recall, cfg.epsilon, 0.5, cfg.k).ef_s;
    const auto ef2 = solve_ef_s(cfg.recall, cfg.epsilon, 1.0, cfg.k).ef_s;
    const double single = std::log(1000.0) * (static_cast<double>(ef1) + 10.0);
    const double split = std::log(500.0) * (static_cast<double>(ef2) + 10.0);
    const auto res = exhaustive_optimum(pol, cfg);
    REQUIRE(res.feasible);
    CHECK(res.cost == doctest::Approx(std::min(single, split)));
    CHECK(res.plan.size() == (split < single ? 2u : 1u));

    const RbacPolicy one(50, {{0}}, {range(0, 50)});
    CHECK(exhaustive_optimum(one, cfg).plan.size() == 1);
}

TEST_CASE("greedy cost against the exhaustive optimum") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pol = random_small_policy(500 + seed, 5);
        const auto cfg = base_config(1.5);
        const auto opt = exhaustive_optimum(pol, cfg);
        REQUIRE(opt.feasible);
        const double greedy = evaluate_plan(pol, greedy_split(pol, cfg), cfg).user_cost;
        const double single = evaluate_plan(pol, single_partition_plan(pol), cfg).user_cost;
        CHECK(greedy <= single * (1.0 + 1e-12));
        CHECK(opt.cost <= greedy * (1.0 + 1e-12));
        MESSAGE("seed " << seed << " gap " << greedy / opt.cost);
    }
    CHECK_THROWS_AS(exhaustive_optimum(random_small_policy(1, 7), base_config(1.5)), DomainError);
}

TEST_CASE("user partition plan has one partition per role combination") {
    const RbacPolicy pol(100, {{0}, {0, 1}, {0, 1}, {1}}, {range(0, 60), range(40, 100)});
    const auto plan = user_partition_plan(pol);
    CHECK(plan.size() == 3);
    const auto rt = build_routing(pol, plan);
    for (UserId u : pol.active_users()) {
        CHECK(rt.of_user(u).size() == 1);
        CHECK(plan.partitions[rt.of_user(u)[0]] == auth_user(pol, u));
    }
}

TEST_CASE("plan and routing text round trip") {
    const auto pol = gen_tree(tree_alpha(3000), 5);
    const auto plan = greedy_split(pol, base_config(1.5));
    std::stringstream ss;
    write_plan(ss, plan);
    const auto back = read_plan(ss, pol);
    CHECK(back.partitions == plan.partitions);
    CHECK(back.roles_of == plan.roles_of);
    const auto rt = build_routing(pol, plan);
    std::stringstream rs;
    write_routing(rs, rt, pol);
    CHECK(read_routing(rs, pol).user_routes == rt.user_routes);
}

TEST_CASE("plan validation catches broken invariants") {
    const RbacPolicy pol(100, {{0}, {1}}, {range(0, 60), range(40, 100)});
    auto plan = role_partition_plan(pol);
    plan.validate(pol);
    auto broken = plan;
    broken.partitions[0].pop_back();
    CHECK_THROWS_AS(broken.validate(pol), InternalError);
    broken = plan;
    broken.roles_of[1].push_back(0);
    CHECK_THROWS_AS(broken.validate(pol), InternalError);
}

TEST_CASE("plan from groups") {
    const RbacPolicy pol(100, {{0}, {1}, {2}}, {range(0, 30), range(30, 60), range(50, 100)});
    const auto p = plan_from_groups(pol, {{0, 1}, {2}});
    CHECK(p.partitions[0] == range(0, 60));
    CHECK(p.partitions[1] == range(50, 100));
    const auto whole = plan_from_groups(pol, {{0, 1, 2}});
    CHECK(whole.partitions[0].size() == 100);
}

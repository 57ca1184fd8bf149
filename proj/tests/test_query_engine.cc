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
#include <filesystem>
#include <numeric>

#include "permvec/bench.h"
#include "permvec/dataset.h"
#include "permvec/partitioner.h"
#include "permvec/query_engine.h"
#include "permvec/workload.h"

using namespace permvec;

namespace {

DocList range(DocId lo, DocId hi) {
    DocList out(hi - lo);
    std::iota(out.begin(), out.end(), lo);
    return out;
}

std::shared_ptr<const VectorSet> vecs(std::size_t n, std::size_t dim, std::uint64_t seed) {
    return std::make_shared<const VectorSet>(gen_vectors(n, dim, seed));
}

std::vector<DocId> ids(const SearchResult& r) {
    std::vector<DocId> out;
    for (const auto& h : r.hits) {
        out.push_back(h.doc);
    }
    return out;
}

}  // namespace

TEST_CASE("single partition deployment matches filtered search") {
    const auto pol = gen_uniform(uniform_alpha(2000, 50, 10), 1);
    const auto v = vecs(2000, 16, 2);
    const auto dep = deploy(pol, single_partition_plan(pol), v, {}, 40, 3);
    const auto w = gen_queries(pol, 2000, 30, 10, 4);
    for (const auto& q : w.queries) {
        const auto [res, stats] = execute(dep, q.user, v->row(q.vec), 10);
        const auto direct = dep.indexes[0].search_filtered(v->row(q.vec), 40, 10, dep.auth_of(q.user));
        CHECK(res.hits == direct.hits);
        CHECK(stats.partitions_touched == 1);
        CHECK(stats.distance_evals == direct.visited);
    }
}

TEST_CASE("disjoint partitions merge to the exact answer") {
    // ef_s covers every partition, so each partition search is exhaustive.
    const RbacPolicy pol(600, {{0, 1}, {0}, {1}}, {range(0, 300), range(300, 600)});
    const auto v = vecs(600, 8, 5);
    const auto dep = deploy(pol, role_partition_plan(pol), v, {}, 300, 6);
    REQUIRE(dep.routing.of_user(0).size() == 2);
    const auto all = range(0, 600);
    for (std::uint32_t row = 0; row < 40; ++row) {
        const auto [res, stats] = execute(dep, 0, v->row(row), 10);
        const auto truth = brute_force_topk(*v, all, v->row(row), 10);
        CHECK(res.hits == truth.hits);
        CHECK(stats.partitions_touched == 2);
    }
}

TEST_CASE("k above the authorized set returns every authorized doc") {
    const RbacPolicy pol(200, {{0}, {1}}, {range(0, 7), range(0, 200)});
    const auto v = vecs(200, 8, 7);
    const auto dep = deploy(pol, single_partition_plan(pol), v, {}, 1000, 8);
    const auto [res, stats] = execute(dep, 0, v->row(150), 20);
    CHECK(res.hits.size() == 7);
    auto got = ids(res);
    std::sort(got.begin(), got.end());
    CHECK(got == range(0, 7));
}

TEST_CASE("results never leave the authorized set") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto pol = gen_tree(tree_alpha(3000), seed);
        const auto v = vecs(3000, 16, seed + 10);
        SplitConfig cfg;
        cfg.alpha = 1.5;
        const auto dep = deploy(pol, greedy_split(pol, cfg), v, {}, 20, seed);
        const auto w = gen_queries(pol, 3000, 100, 10, seed);
        for (const auto& q : w.queries) {
            const auto auth = auth_user(pol, q.user);
            const auto [res, stats] = execute(dep, q.user, v->row(q.vec), 10);
            for (const auto& h : res.hits) {
                CHECK(std::binary_search(auth.begin(), auth.end(), h.doc));
            }
            CHECK(std::is_sorted(res.hits.begin(), res.hits.end()));
        }
    }
}

TEST_CASE("replicated docs appear once") {
    // Both partitions hold docs 0..99; user 0 routes to both.
    const RbacPolicy pol(300, {{0, 1}, {0}, {1}}, {range(0, 200), range(0, 100)});
    PartitionPlan plan;
    plan.num_docs = 300;
    plan.partitions = {range(0, 300), range(0, 100)};
    plan.roles_of = {{0}, {1}};
    auto dep = deploy(pol, plan, vecs(300, 8, 9), {}, 300, 1);
    dep.routing.user_routes[0] = {0, 1};
    const auto [res, stats] = execute(dep, 0, dep.vectors->row(5), 50);
    auto got = ids(res);
    std::sort(got.begin(), got.end());
    CHECK(std::adjacent_find(got.begin(), got.end()) == got.end());
    CHECK(stats.partitions_touched == 2);
}

TEST_CASE("merge order does not matter") {
    const auto pol = gen_tree(tree_alpha(2000), 4);
    SplitConfig cfg;
    cfg.alpha = 2.0;
    auto dep = deploy(pol, greedy_split(pol, cfg), vecs(2000, 16, 4), {}, 30, 2);
    const auto w = gen_queries(pol, 2000, 50, 10, 3);
    for (const auto& q : w.queries) {
        const auto before = execute(dep, q.user, dep.vectors->row(q.vec), 10).first;
        auto& route = dep.routing.user_routes[q.user];
        std::reverse(route.begin(), route.end());
        const auto after = execute(dep, q.user, dep.vectors->row(q.vec), 10).first;
        std::reverse(route.begin(), route.end());
        CHECK(before.hits == after.hits);
    }
}

TEST_CASE("unknown user is a domain error") {
    const RbacPolicy pol(50, {{0}}, {range(0, 50)});
    const auto dep = deploy(pol, single_partition_plan(pol), vecs(50, 4, 1), {}, 10, 1);
    CHECK_THROWS_AS(execute(dep, 7, dep.vectors->row(0), 5), DomainError);
}

TEST_CASE("recall extremes") {
    const auto n = 3000;
    const auto v = vecs(n, 16, 21);
    SUBCASE("full selectivity at the cap") {
        const RbacPolicy pol(n, {{0}}, {range(0, n)});
        const auto dep = deploy(pol, single_partition_plan(pol), v, {}, 1000, 1);
        const auto w = gen_queries(pol, n, 100, 10, 2);
        CHECK(measure_recall(dep, w, *v) >= 0.99);
    }
    SUBCASE("very low selectivity at ef equal to k") {
        const RbacPolicy pol(n, {{0}, {1}}, {range(0, 30), range(0, n)});
        const auto dep = deploy(pol, single_partition_plan(pol), v, {}, 10, 1);
        QueryWorkload w;
        w.k = 10;
        for (std::uint32_t i = 0; i < 100; ++i) {
            w.queries.push_back({0, 100 + i});
        }
        CHECK(measure_recall(dep, w, *v) < 0.5);
    }
}

TEST_CASE("recall does not drop as ef grows") {
    const auto pol = gen_tree(tree_alpha(4000), 8);
    const auto v = vecs(4000, 16, 8);
    const auto w = gen_queries(pol, 4000, 200, 10, 8);
    const auto truth = compute_ground_truth(pol, w, *v);
    auto dep = deploy(pol, single_partition_plan(pol), v, {}, 10, 8);
    double prev = 0.0;
    for (std::size_t ef : {10, 40, 160, 640}) {
        dep.ef_s = ef;
        const double r = measure_recall(dep, w, *v, truth);
        CHECK(r >= prev - 0.01);
        prev = r;
    }
}

TEST_CASE("ground truth oracle and recall") {
    const RbacPolicy pol(100, {{0}}, {range(0, 4)});
    const auto v = vecs(100, 4, 3);
    QueryWorkload w;
    w.k = 10;
    w.queries = {{0, 50}};
    const auto truth = compute_ground_truth(pol, w, *v);
    REQUIRE(truth[0].size() == 4);
    SearchResult r;
    r.hits = {{truth[0][0], 0.0F}, {truth[0][1], 0.0F}};
    CHECK(recall_of(r, truth[0]) == doctest::Approx(0.5));
}

TEST_CASE("latency measurement") {
    const auto pol = gen_tree(tree_alpha(2000), 3);
    const auto v = vecs(2000, 16, 3);
    const auto dep = deploy(pol, role_partition_plan(pol), v, {}, 20, 3);
    const auto w = gen_queries(pol, 2000, 50, 10, 3);
    const auto a = measure_latency(dep, w, *v, 3);
    const auto b = measure_latency(dep, w, *v, 2);
    CHECK(a.mean_distance_evals == b.mean_distance_evals);
    CHECK(a.mean_wall_seconds > 0.0);
    CHECK_THROWS_AS(measure_latency(dep, w, *v, 1), DomainError);
    const QueryWorkload empty;
    CHECK_THROWS_AS(measure_latency(dep, empty, *v), DomainError);
    CHECK_THROWS_AS(measure_recall(dep, empty, *v), DomainError);
    const auto recs = run_queries(dep, w, *v, compute_ground_truth(pol, w, *v));
    CHECK(recs.size() == 50);
}

TEST_CASE("role partitions cut distance work on tree") {
    const auto pol = gen_tree(tree_alpha(10000), 5);
    const auto v = vecs(10000, 16, 5);
    const auto w = gen_queries(pol, 10000, 200, 10, 5);
    const auto truth = compute_ground_truth(pol, w, *v);
    auto single = deploy(pol, single_partition_plan(pol), v, {}, 10, 5);
    auto role = deploy(pol, role_partition_plan(pol), v, {}, 10, 5);
    // Same recall target for both before comparing work.
    single.ef_s = tune_ef_s(single, w, *v, truth, 0.9, RecallParams{}, 4000).ef_s;
    role.ef_s = tune_ef_s(role, w, *v, truth, 0.9, RecallParams{}, 4000).ef_s;
    REQUIRE(measure_recall(single, w, *v, truth) >= 0.9);
    REQUIRE(measure_recall(role, w, *v, truth) >= 0.9);
    const auto ls = measure_latency(single, w, *v);
    const auto lr = measure_latency(role, w, *v);
    MESSAGE("single " << ls.mean_distance_evals << " role " << lr.mean_distance_evals);
    CHECK(ls.mean_distance_evals >= 2.0 * lr.mean_distance_evals);
}

TEST_CASE("deployment save and load") {
    const auto pol = gen_tree(tree_alpha(2000), 6);
    SplitConfig cfg;
    cfg.alpha = 1.5;
    const auto dep = deploy(pol, greedy_split(pol, cfg), vecs(2000, 8, 6), {}, 25, 17);
    const auto dir = (std::filesystem::temp_directory_path() / "permvec_qe_roundtrip").string();
    std::filesystem::remove_all(dir);
    save_deployment(dep, dir);
    const auto back = load_deployment(dir);
    CHECK(back.plan.partitions == dep.plan.partitions);
    CHECK(back.routing.user_routes == dep.routing.user_routes);
    CHECK(back.ef_s == 25);
    const auto w = gen_queries(pol, 2000, 20, 10, 6);
    for (const auto& q : w.queries) {
        CHECK(execute(back, q.user, dep.vectors->row(q.vec), 10).first.hits ==
              execute(dep, q.user, dep.vectors->row(q.vec), 10).first.hits);
    }
    std::filesystem::remove_all(dir);
}

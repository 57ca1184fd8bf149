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

#include "permvec/workload.h"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "permvec/random.h"

namespace permvec {

UniformParams uniform_alpha(std::size_t num_docs, std::size_t num_users, std::size_t num_roles) {
    UniformParams p;
    p.num_users = num_users;
    p.num_roles = num_roles;
    p.num_docs = num_docs;
    p.max_roles_per_user = 2;
    p.max_docs_per_role = std::max<std::size_t>(1, std::min(num_docs, num_docs / num_roles * 5));
    p.min_docs_per_role = std::max<std::size_t>(1, p.max_docs_per_role / 2);
    return p;
}

TreeParams tree_alpha(std::size_t num_docs, std::size_t num_users, std::size_t num_roles) {
    TreeParams p;
    p.num_docs = num_docs;
    p.num_users = num_users;
    p.num_roles = num_roles;
    return p;
}

ErbacParams erbac_alpha(std::size_t num_docs, std::size_t num_users) {
    ErbacParams p;
    p.num_docs = num_docs;
    p.num_users = num_users;
    p.m_p = std::max<std::size_t>(1, num_docs / 25);
    return p;
}

ErbacParams erbac_beta(std::size_t num_docs, std::size_t num_users) {
    ErbacParams p = erbac_alpha(num_docs, num_users);
    p.m_br = 9;
    return p;
}

namespace {

std::uint32_t narrow(std::size_t n, const char* what) {
    if (n > UINT32_MAX) {
        throw DomainError(fmt::format("{} too large", what));
    }
    return static_cast<std::uint32_t>(n);
}

}  // namespace

RbacPolicy gen_uniform(const UniformParams& params, std::uint64_t seed) {
    const std::size_t min_docs = std::max<std::size_t>(1, params.min_docs_per_role);
    if (params.num_roles == 0 || params.num_docs == 0) {
        throw DomainError("uniform: need at least one role and one document");
    }
    if (params.max_roles_per_user < 1 || params.max_roles_per_user > params.num_roles) {
        throw DomainError("uniform: max_roles_per_user must be in [1, num_roles]");
    }
    if (params.max_docs_per_role < min_docs || params.max_docs_per_role > params.num_docs) {
        throw DomainError("uniform: max_docs_per_role must be in [min_docs_per_role, num_docs]");
    }
    Rng rng(seed);
    const auto nd = narrow(params.num_docs, "num_docs");
    const auto nr = narrow(params.num_roles, "num_roles");
    std::vector<DocList> role_docs(params.num_roles);
    for (auto& docs : role_docs) {
        const auto m = static_cast<std::uint32_t>(rng.between(min_docs, params.max_docs_per_role));
        docs = rng.sample_distinct(nd, m);
    }
    std::vector<std::vector<RoleId>> user_roles(params.num_users);
    for (auto& roles : user_roles) {
        const auto m = static_cast<std::uint32_t>(rng.between(1, params.max_roles_per_user));
        roles = rng.sample_distinct(nr, m);
    }
    return {params.num_docs, std::move(user_roles), std::move(role_docs)};
}

namespace {

struct Forest {
    std::vector<RoleId> parent;
    std::vector<std::size_t> depth;
};

Forest grow_forest(const TreeParams& params, Rng& rng) {
    if (params.height < 2) {
        throw DomainError("tree: height must be at least 2 (a lone root has no assignable users)");
    }
    if (params.branch_lo < 1 || params.branch_lo > params.branch_hi) {
        throw DomainError("tree: need 1 <= branch_lo <= branch_hi");
    }
    if (params.num_roles < 2) {
        throw DomainError("tree: need at least a root and one child role");
    }
    Forest f;
    const std::size_t n = params.num_roles;
    while (f.parent.size() < n) {
        const auto root = static_cast<RoleId>(f.parent.size());
        f.parent.push_back(root);
        f.depth.push_back(0);
        std::vector<RoleId> frontier{root};
        while (!frontier.empty() && f.parent.size() < n) {
            std::vector<RoleId> next;
            for (RoleId p : frontier) {
                if (f.depth[p] + 1 >= params.height) {
                    continue;
                }
                const auto c = rng.between(params.branch_lo, params.branch_hi);
                for (std::uint64_t i = 0; i < c && f.parent.size() < n; ++i) {
                    next.push_back(static_cast<RoleId>(f.parent.size()));
                    f.parent.push_back(p);
                    f.depth.push_back(f.depth[p] + 1);
                }
            }
            frontier = std::move(next);
        }
    }
    return f;
}

}  // namespace

std::vector<RoleId> tree_parents(const TreeParams& params, std::uint64_t seed) {
    Rng rng(seed);
    return grow_forest(params, rng).parent;
}

RbacPolicy gen_tree(const TreeParams& params, std::uint64_t seed) {
    if (params.num_docs == 0) {
        throw DomainError("tree: need at least one document");
    }
    Rng rng(seed);
    const Forest f = grow_forest(params, rng);
    const std::size_t n = params.num_roles;
    const auto nd = narrow(params.num_docs, "num_docs");

    std::vector<DocList> own(n);
    if (params.poisson_mean) {
        // Disjoint blocks of a shuffled doc order, one block per node.
        std::vector<DocId> order(nd);
        std::iota(order.begin(), order.end(), DocId{0});
        for (std::size_t i = nd; i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        std::size_t cursor = 0;
        for (auto& docs : own) {
            const auto c = std::max<std::uint64_t>(1, rng.poisson(*params.poisson_mean));
            for (std::uint64_t i = 0; i < c; ++i) {
                docs.push_back(order[cursor]);
                cursor = (cursor + 1) % nd;
            }
            std::sort(docs.begin(), docs.end());
            docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
        }
    } else {
        if (params.num_docs < n) {
            throw DomainError("tree: need at least one document per role");
        }
        for (DocId d = 0; d < nd; ++d) {
            own[d % n].push_back(d);
        }
    }

    std::vector<DocList> role_docs(n);
    for (RoleId r = 0; r < n; ++r) {
        DocList docs = own[r];
        for (RoleId a = r; f.parent[a] != a;) {
            a = f.parent[a];
            docs = union_of(docs, own[a]);
        }
        role_docs[r] = std::move(docs);
    }

    std::vector<RoleId> assignable;
    for (RoleId r = 0; r < n; ++r) {
        if (f.parent[r] != r) {
            assignable.push_back(r);
        }
    }
    std::vector<std::vector<RoleId>> user_roles(params.num_users);
    for (std::size_t u = 0; u < params.num_users; ++u) {
        user_roles[u] = {assignable[u % assignable.size()]};
    }
    return {params.num_docs, std::move(user_roles), std::move(role_docs)};
}

RbacPolicy gen_erbac(const ErbacParams& params, std::uint64_t seed) {
    if (params.n_fr < 1 || params.n_br < 1 || params.m_fr < 1 || params.m_br < 1 || params.m_p < 1 ||
        params.num_docs < 1) {
        throw DomainError("erbac: all counts must be >= 1");
    }
    if (params.m_p > params.num_docs || params.m_fr > params.n_fr || params.m_br > params.n_br) {
        throw DomainError("erbac: m_p <= num_docs, m_fr <= n_fr and m_br <= n_br required");
    }
    Rng rng(seed);
    const auto nd = narrow(params.num_docs, "num_docs");
    std::vector<DocList> functional(params.n_fr);
    for (auto& docs : functional) {
        const auto m = std::min<std::uint64_t>(rng.between(1, nd), params.m_p);
        docs = rng.sample_distinct(nd, static_cast<std::uint32_t>(m));
    }
    std::vector<DocList> business(params.n_br);
    for (auto& docs : business) {
        const auto m = static_cast<std::uint32_t>(rng.between(1, params.m_fr));
        for (auto f : rng.sample_distinct(narrow(params.n_fr, "n_fr"), m)) {
            docs = union_of(docs, functional[f]);
        }
    }
    std::vector<std::vector<RoleId>> user_roles(params.num_users);
    for (auto& roles : user_roles) {
        const auto m = static_cast<std::uint32_t>(rng.between(1, params.m_br));
        roles = rng.sample_distinct(narrow(params.n_br, "n_br"), m);
    }
    return {params.num_docs, std::move(user_roles), std::move(business)};
}

QueryWorkload gen_queries(const RbacPolicy& policy, std::size_t dataset_size, std::size_t n_queries,
                          std::size_t k, std::uint64_t seed) {
    if (dataset_size == 0) {
        throw DomainError("gen_queries: empty dataset");
    }
    const auto users = policy.active_users();
    if (users.empty() && n_queries > 0) {
        throw DomainError("gen_queries: policy has no users");
    }
    Rng rng(seed);
    QueryWorkload w;
    w.k = k;
    w.queries.reserve(n_queries);
    for (std::size_t i = 0; i < n_queries; ++i) {
        const UserId u = users[rng.below(users.size())];
        const auto v = static_cast<std::uint32_t>(rng.below(dataset_size));
        w.queries.push_back({u, v});
    }
    return w;
}

void write_workload(std::ostream& os, const QueryWorkload& w) {
    os << "k=" << w.k << '\n';
    for (const auto& q : w.queries) {
        os << "q " << q.user << ' ' << q.vec << '\n';
    }
}

QueryWorkload read_workload(std::istream& is) {
    QueryWorkload w;
    std::string line;
    bool have_k = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (line.rfind("k=", 0) == 0) {
            w.k = std::stoul(line.substr(2));
            have_k = true;
            continue;
        }
        std::istringstream ls(line);
        std::string tag;
        std::uint64_t u = 0;
        std::uint64_t v = 0;
        if (!(ls >> tag >> u >> v) || tag != "q") {
            throw DomainError("workload: malformed line: " + line);
        }
        w.queries.push_back({static_cast<UserId>(u), static_cast<std::uint32_t>(v)});
    }
    if (!have_k) {
        throw DomainError("workload: missing k= line");
    }
    return w;
}

}  // namespace permvec

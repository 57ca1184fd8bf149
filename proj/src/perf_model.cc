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

#include "permvec/perf_model.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "permvec/plan.h"
#include "permvec/rbac.h"

namespace permvec {

CostModel CostModel::hnsw(LatencyParams lp) {
    CostModel m;
    m.kind = CostKind::hnsw_postfilter;
    m.latency = lp;
    return m;
}

CostModel CostModel::acorn(double dim, double gamma_acorn) {
    CostModel m;
    m.kind = CostKind::acorn;
    m.dim = dim;
    m.gamma_acorn = gamma_acorn;
    return m;
}

CostModel CostModel::hybrid(LatencyParams lp, double c_pred, double c_bf) {
    CostModel m;
    m.kind = CostKind::hybrid;
    m.latency = lp;
    m.c_pred = c_pred;
    m.c_bf = c_bf;
    return m;
}

double hybrid_threshold(const CostModel& model, double n, double k) {
    // c_bf n s^2 + (c_pred n - b log n) s - a k log n = 0, positive root.
    const double logn = std::log(n);
    const double qa = model.c_bf * n;
    const double qb = model.c_pred * n - model.latency.b * logn;
    const double qc = -model.latency.a * k * logn;
    if (qa <= 0.0) {
        return qb > 0.0 ? -qc / qb : std::numeric_limits<double>::infinity();
    }
    return (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
}

double partition_cost(const CostModel& model, double n, double ef_s, double s, double k) {
    if (!(n >= 1.0)) {
        throw DomainError("partition_cost: partition size must be >= 1");
    }
    if (!(s > 0.0) || s > 1.0 + 1e-12) {
        throw DomainError(fmt::format("partition_cost: selectivity {} outside (0, 1]", s));
    }
    const double logn = std::log(n);
    switch (model.kind) {
        case CostKind::hnsw_postfilter:
            return logn * (model.latency.a * ef_s + model.latency.b);
        case CostKind::acorn:
            // Below one expected match the graph term is taken as zero.
            return (model.dim + model.gamma_acorn) * std::log(std::max(1.0, s * n)) + std::log(1.0 / s);
        case CostKind::hybrid:
            if (s <= hybrid_threshold(model, n, k)) {
                return logn * (model.latency.a * k / s + model.latency.b);
            }
            return model.c_pred * n + model.c_bf * s * n;
    }
    throw InternalError("partition_cost: unknown model kind");
}

namespace {

double routed_cost(const CostModel& model, const DocList& auth, const PartitionPlan& plan,
                   const std::vector<PartitionId>& route, double ef_s, double k) {
    double total = 0.0;
    for (PartitionId p : route) {
        const auto& part = plan.partitions.at(p);
        const double n = static_cast<double>(part.size());
        const double s = static_cast<double>(intersection_size(auth, part)) / n;
        total += partition_cost(model, n, ef_s, s, k);
    }
    return total;
}

}  // namespace

double user_cost(const CostModel& model, const RbacPolicy& policy, const PartitionPlan& plan,
                 const RoutingTable& routing, UserId u, double ef_s, double k) {
    return routed_cost(model, auth_user(policy, u), plan, routing.of_user(u), ef_s, k);
}

double role_cost(const CostModel& model, const RbacPolicy& policy, const PartitionPlan& plan,
                 const RoutingTable& routing, RoleId r, double ef_s, double k) {
    return routed_cost(model, auth_role(policy, r), plan, routing.of_role(r), ef_s, k);
}

double recall_estimate(const RecallParams& rp, double ef_s, double mean_sel, double k) {
    const double t = rp.gamma * k / mean_sel;
    double r = 0.0;
    if (ef_s <= t) {
        r = ef_s * mean_sel / k;
    } else {
        r = 1.0 / (1.0 + std::exp(-rp.beta * (mean_sel / k) * (ef_s - t))) + (rp.gamma - 0.5);
    }
    return std::clamp(r, 0.0, 1.0);
}

EfSolution solve_ef_s(const RecallParams& rp, double target, double mean_sel, std::size_t k, std::size_t cap) {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError(fmt::format("solve_ef_s: target {} outside (0, 1)", target));
    }
    if (!(mean_sel > 0.0 && mean_sel <= 1.0)) {
        throw DomainError(fmt::format("solve_ef_s: selectivity {} outside (0, 1]", mean_sel));
    }
    const std::size_t lo_clamp = std::max<std::size_t>(k, 1);
    const std::size_t hi_clamp = std::max(cap, lo_clamp);
    const auto kk = static_cast<double>(k);
    if (recall_estimate(rp, static_cast<double>(hi_clamp), mean_sel, kk) < target) {
        return {hi_clamp, true};
    }
    std::size_t lo = 0;  // recall(lo) < target (recall(0) = 0)
    std::size_t hi = hi_clamp;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (recall_estimate(rp, static_cast<double>(mid), mean_sel, kk) >= target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return {std::max(hi, lo_clamp), false};
}

LatencyFit fit_latency(const std::vector<LatencySample>& samples) {
    std::map<double, std::pair<double, std::size_t>> by_ef;
    for (const auto& s : samples) {
        if (!(s.partition_size > 1.0)) {
            throw DomainError("fit_latency: partition size must exceed 1");
        }
        auto& [sum, n] = by_ef[s.ef_s];
        sum += s.seconds / std::log(s.partition_size);
        ++n;
    }
    if (by_ef.size() < 2) {
        throw DomainError("fit_latency: need at least two distinct ef_s values");
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [ef, acc] : by_ef) {
        xs.push_back(ef);
        ys.push_back(acc.first / static_cast<double>(acc.second));
    }
    const auto m = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    LatencyFit fit;
    fit.params.a = sxy / sxx;
    fit.params.b = my - fit.params.a * mx;
    const double scale = std::max(std::abs(my), std::numeric_limits<double>::min());
    if (!(fit.params.a * mx > 1e-9 * scale)) {
        throw DomainError(fmt::format("fit_latency: non-positive slope a={} (time does not grow with ef_s)",
                                      fit.params.a));
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (fit.params.a * xs[i] + fit.params.b);
        sse += e * e;
    }
    fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return fit;
}

double recall_rmse(const RecallParams& rp, const std::vector<RecallSample>& samples) {
    if (samples.empty()) {
        throw DomainError("recall_rmse: no samples");
    }
    double sse = 0.0;
    for (const auto& s : samples) {
        const double e = recall_estimate(rp, s.ef_s, s.mean_sel, s.k) - s.recall;
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(samples.size()));
}

RecallParams fit_recall(const std::vector<RecallSample>& samples) {
    if (samples.empty()) {
        throw DomainError("fit_recall: no samples");
    }
    const bool saturated = std::any_of(samples.begin(), samples.end(),
                                       [](const RecallSample& s) { return s.ef_s * s.mean_sel / s.k >= 1.0; });
    if (!saturated) {
        throw DomainError("fit_recall: no saturated samples (ef_s * s / k >= 1); widen the ef_s range");
    }
    RecallParams best;
    double best_err = std::numeric_limits<double>::infinity();
    constexpr int kGrid = 50;
    for (int i = 1; i <= kGrid; ++i) {
        for (int j = 1; j <= kGrid; ++j) {
            const RecallParams rp{5.0 * i / kGrid, static_cast<double>(j) / (kGrid + 1)};
            const double err = recall_rmse(rp, samples);
            if (err < best_err) {
                best_err = err;
                best = rp;
            }
        }
    }
    double step_beta = 5.0 / kGrid;
    double step_gamma = 1.0 / (kGrid + 1);
    for (int it = 0; it < 20; ++it) {
        bool improved = false;
        for (double sign : {-1.0, 1.0}) {
            RecallParams rp = best;
            rp.beta += sign * step_beta;
            if (rp.beta > 0.0) {
                const double err = recall_rmse(rp, samples);
                if (err < best_err) {
                    best_err = err;
                    best = rp;
                    improved = true;
                }
            }
            rp = best;
            rp.gamma += sign * step_gamma;
            if (rp.gamma > 0.0 && rp.gamma < 1.0) {
                const double err = recall_rmse(rp, samples);
                if (err < best_err) {
                    best_err = err;
                    best = rp;
                    improved = true;
                }
            }
        }
        if (!improved) {
            step_beta /= 2.0;
            step_gamma /= 2.0;
        }
    }
    return best;
}

namespace {

const char* kind_name(CostKind k) {
    switch (k) {
        case CostKind::hnsw_postfilter:
            return "hnsw";
        case CostKind::acorn:
            return "acorn";
        case CostKind::hybrid:
            return "hybrid";
    }
    return "hnsw";
}

}  // namespace

void write_model_params(std::ostream& os, const ModelParams& mp) {
    os << fmt::format("a={:.17g}\nb={:.17g}\nbeta={:.17g}\ngamma={:.17g}\n", mp.cost.latency.a, mp.cost.latency.b,
                      mp.recall.beta, mp.recall.gamma);
    if (mp.cost.kind != CostKind::hnsw_postfilter) {
        os << "kind=" << kind_name(mp.cost.kind) << '\n';
        os << fmt::format("dim={:.17g}\ngamma_acorn={:.17g}\nc_pred={:.17g}\nc_bf={:.17g}\n", mp.cost.dim,
                          mp.cost.gamma_acorn, mp.cost.c_pred, mp.cost.c_bf);
    }
}

ModelParams read_model_params(std::istream& is) {
    ModelParams mp;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError("model params: malformed line: " + line);
        }
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "kind") {
            if (val == "hnsw") {
                mp.cost.kind = CostKind::hnsw_postfilter;
            } else if (val == "acorn") {
                mp.cost.kind = CostKind::acorn;
            } else if (val == "hybrid") {
                mp.cost.kind = CostKind::hybrid;
            } else {
                throw DomainError("model params: unknown kind " + val);
            }
            continue;
        }
        const double v = std::stod(val);
        if (key == "a") {
            mp.cost.latency.a = v;
        } else if (key == "b") {
            mp.cost.latency.b = v;
        } else if (key == "beta") {
            mp.recall.beta = v;
        } else if (key == "gamma") {
            mp.recall.gamma = v;
        } else if (key == "dim") {
            mp.cost.dim = v;
        } else if (key == "gamma_acorn") {
            mp.cost.gamma_acorn = v;
        } else if (key == "c_pred") {
            mp.cost.c_pred = v;
        } else if (key == "c_bf") {
            mp.cost.c_bf = v;
        } else {
            throw DomainError("model params: unknown key " + key);
        }
    }
    if (!(mp.recall.gamma > 0.0 && mp.recall.gamma < 1.0) || !(mp.recall.beta > 0.0)) {
        throw DomainError("model params: need beta > 0 and 0 < gamma < 1");
    }
    return mp;
}

}  // namespace permvec

#pragma once

#include "freesketch/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace freesketch {

namespace detail {

/// Dense Hungarian assignment with dual potentials (the Jonker-Volgenant
/// style shortest augmenting path, O(n^3)). cost is row-major n x n.
/// Returns the total cost of an optimal perfect matching.
inline double solve_assignment(const std::vector<double>& cost, int n,
                               std::vector<int>& row_of_col) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);  // column -> row (1-based)
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur =
                    cost[static_cast<std::size_t>(i0 - 1) * static_cast<std::size_t>(n) +
                         static_cast<std::size_t>(j - 1)] -
                    u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    row_of_col.assign(static_cast<std::size_t>(n), -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        const int i = p[static_cast<std::size_t>(j)];
        row_of_col[static_cast<std::size_t>(j - 1)] = i - 1;
        total += cost[static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(j - 1)];
    }
    return total;
}

/// Min-cost max-flow by successive shortest paths (Bellman-Ford). Exact for
/// the transportation problems arising here (no negative cycles in the
/// residual graph).
class MinCostFlow {
public:
    explicit MinCostFlow(int n) : graph_(static_cast<std::size_t>(n)) {}

    void add_edge(int a, int b, long long cap, double cost) {
        graph_[static_cast<std::size_t>(a)].push_back(
            {b, cap, cost, static_cast<int>(graph_[static_cast<std::size_t>(b)].size())});
        graph_[static_cast<std::size_t>(b)].push_back(
            {a, 0, -cost, static_cast<int>(graph_[static_cast<std::size_t>(a)].size()) - 1});
    }

    /// Pushes as much flow as possible from s to t; returns (flow, cost).
    std::pair<long long, double> run(int s, int t) {
        const double inf = std::numeric_limits<double>::infinity();
        const int n = static_cast<int>(graph_.size());
        long long flow = 0;
        double cost = 0.0;
        while (true) {
            std::vector<double> dist(static_cast<std::size_t>(n), inf);
            std::vector<int> prev_node(static_cast<std::size_t>(n), -1);
            std::vector<int> prev_edge(static_cast<std::size_t>(n), -1);
            dist[static_cast<std::size_t>(s)] = 0.0;
            for (int round = 0; round < n; ++round) {
                bool changed = false;
                for (int v = 0; v < n; ++v) {
                    if (dist[static_cast<std::size_t>(v)] == inf) continue;
                    const auto& edges = graph_[static_cast<std::size_t>(v)];
                    for (std::size_t e = 0; e < edges.size(); ++e) {
                        const Edge& edge = edges[e];
                        if (edge.cap <= 0) continue;
                        const double nd = dist[static_cast<std::size_t>(v)] + edge.cost;
                        if (nd < dist[static_cast<std::size_t>(edge.to)] - 1e-15) {
                            dist[static_cast<std::size_t>(edge.to)] = nd;
                            prev_node[static_cast<std::size_t>(edge.to)] = v;
                            prev_edge[static_cast<std::size_t>(edge.to)] = static_cast<int>(e);
                            changed = true;
                        }
                    }
                }
                if (!changed) break;
            }
            if (dist[static_cast<std::size_t>(t)] == inf) break;
            long long push = std::numeric_limits<long long>::max();
            for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)])
                push = std::min(push,
                                graph_[static_cast<std::size_t>(
                                           prev_node[static_cast<std::size_t>(v)])]
                                      [static_cast<std::size_t>(
                                           prev_edge[static_cast<std::size_t>(v)])]
                                          .cap);
            for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
                Edge& edge = graph_[static_cast<std::size_t>(
                    prev_node[static_cast<std::size_t>(v)])][static_cast<std::size_t>(
                    prev_edge[static_cast<std::size_t>(v)])];
                edge.cap -= push;
                graph_[static_cast<std::size_t>(v)][static_cast<std::size_t>(edge.rev)].cap +=
                    push;
            }
            flow += push;
            cost += static_cast<double>(push) * dist[static_cast<std::size_t>(t)];
        }
        return {flow, cost};
    }

private:
    struct Edge {
        int to;
        long long cap;
        double cost;
        int rev;
    };
    std::vector<std::vector<Edge>> graph_;
};

/// Exact transportation problem on the dense bipartite cost matrix with
/// integer supplies/demands; returns the optimal total cost.
inline double solve_transport(const std::vector<double>& cost, int na, int nb,
                              const std::vector<long long>& supply,
                              const std::vector<long long>& demand) {
    // Nodes: 0 = source, 1..na = A atoms, na+1..na+nb = B atoms, last = sink.
    const int s = 0, t = na + nb + 1;
    MinCostFlow mcf(na + nb + 2);
    for (int i = 0; i < na; ++i) mcf.add_edge(s, 1 + i, supply[static_cast<std::size_t>(i)], 0.0);
    for (int j = 0; j < nb; ++j)
        mcf.add_edge(1 + na + j, t, demand[static_cast<std::size_t>(j)], 0.0);
    const long long big = std::numeric_limits<long long>::max() / 4;
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j)
            mcf.add_edge(1 + i, 1 + na + j, big,
                         cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(nb) +
                              static_cast<std::size_t>(j)]);
    auto [flow, total] = mcf.run(s, t);
    const long long want = std::accumulate(supply.begin(), supply.end(), 0LL);
    if (flow != want) throw std::runtime_error("transport: could not route all mass");
    return total;
}

}  // namespace detail

/// Exact W2 distance between the empirical measures of two point clouds in
/// R^2. Equal sizes reduce to an optimal assignment; unequal sizes solve the
/// exact transport problem with rational masses. Guarded at |A| |B| <= 4e6.
inline double wasserstein2_joint(const std::vector<std::pair<double, double>>& a,
                                 const std::vector<std::pair<double, double>>& b) {
    detail::require(!a.empty() && !b.empty(), "wasserstein2: empty input");
    const auto na = a.size(), nb = b.size();
    if (static_cast<double>(na) * static_cast<double>(nb) > 4e6)
        throw std::length_error("wasserstein2: |A|*|B| exceeds the 4e6 guard");

    auto sq = [](double t) { return t * t; };
    if (na == nb) {
        const int n = static_cast<int>(na);
        std::vector<double> cost(na * nb);
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nb; ++j)
                cost[i * nb + j] = sq(a[i].first - b[j].first) + sq(a[i].second - b[j].second);
        std::vector<int> match;
        const double total = detail::solve_assignment(cost, n, match);
        return std::sqrt(std::max(0.0, total / static_cast<double>(n)));
    }

    const long long g = std::gcd(static_cast<long long>(na), static_cast<long long>(nb));
    std::vector<long long> supply(na, static_cast<long long>(nb) / g);
    std::vector<long long> demand(nb, static_cast<long long>(na) / g);
    const double flow_total = static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(g);
    std::vector<double> cost(na * nb);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j)
            cost[i * nb + j] = sq(a[i].first - b[j].first) + sq(a[i].second - b[j].second);
    const double total = detail::solve_transport(cost, static_cast<int>(na),
                                                 static_cast<int>(nb), supply, demand);
    return std::sqrt(std::max(0.0, total / flow_total));
}

}  // namespace freesketch

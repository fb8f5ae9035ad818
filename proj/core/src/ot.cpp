#include "wviab/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wviab/errors.hpp"

namespace wviab {

AssignmentResult solve_assignment(const std::vector<double>& cost,
                                  std::size_t n) {
  if (n == 0) throw ValidationError("assignment needs at least one row");
  if (cost.size() != n * n)
    throw ValidationError("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials and matching; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentResult result;
  result.target_of.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.target_of[p[j] - 1] = j - 1;
  result.total_cost = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    result.total_cost += cost[i * n + result.target_of[i]];
  return result;
}

namespace {

struct BasisArc {
  std::size_t i = 0;  // supply row
  std::size_t j = 0;  // demand column
  double flow = 0.0;
};

}  // namespace

TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::vector<double>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0)
    throw ValidationError("transport needs nonempty supply and demand");
  if (cost.size() != m * n)
    throw ValidationError("transport cost matrix has wrong shape");

  double total_a = 0.0, total_b = 0.0;
  for (double a : supply) {
    if (!(a >= 0.0)) throw ValidationError("negative supply");
    total_a += a;
  }
  for (double b : demand) {
    if (!(b >= 0.0)) throw ValidationError("negative demand");
    total_b += b;
  }
  if (total_a <= 0.0 || total_b <= 0.0)
    throw ValidationError("transport needs positive total mass");

  // Rebalance the demand side so both totals agree exactly.
  std::vector<double> b(demand);
  double scale = total_a / total_b;
  for (auto& v : b) v *= scale;

  std::vector<double> a(supply);

  // Northwest-corner initial basis: m + n - 1 arcs forming a spanning tree.
  std::vector<BasisArc> basis;
  basis.reserve(m + n - 1);
  {
    std::size_t i = 0, j = 0;
    std::vector<double> ra = a, rb = b;
    while (true) {
      double f = std::min(ra[i], rb[j]);
      basis.push_back({i, j, f});
      ra[i] -= f;
      rb[j] -= f;
      if (i + 1 == m && j + 1 == n) break;
      if (i + 1 < m && (ra[i] <= rb[j] || j + 1 == n)) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const std::size_t nodes = m + n;  // sources 0..m-1, targets m..m+n-1
  double cmax = 0.0;
  for (double c : cost) cmax = std::max(cmax, std::fabs(c));
  const double eps = 1e-12 * std::max(1.0, cmax);

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nodes);
  std::vector<double> pu(m, 0.0), pv(n, 0.0);
  std::vector<std::size_t> parent(nodes, 0), parent_arc(nodes, 0);
  std::vector<int> depth(nodes, -1);
  std::vector<std::size_t> order;
  order.reserve(nodes);

  auto rebuild_tree = [&]() {
    for (auto& lst : adj) lst.clear();
    for (std::size_t k = 0; k < basis.size(); ++k) {
      std::size_t s = basis[k].i;
      std::size_t t = m + basis[k].j;
      adj[s].push_back({t, k});
      adj[t].push_back({s, k});
    }
    std::fill(depth.begin(), depth.end(), -1);
    order.clear();
    order.push_back(0);
    depth[0] = 0;
    parent[0] = 0;
    for (std::size_t head = 0; head < order.size(); ++head) {
      std::size_t v = order[head];
      for (auto [w, arc] : adj[v]) {
        if (depth[w] >= 0) continue;
        depth[w] = depth[v] + 1;
        parent[w] = v;
        parent_arc[w] = arc;
        order.push_back(w);
      }
    }
    if (order.size() != nodes)
      throw NumericalError("transport basis lost connectivity");
    // Dual potentials along the tree: pu[i] + pv[j] = c_ij on basic arcs.
    pu[0] = 0.0;
    for (std::size_t head = 1; head < order.size(); ++head) {
      std::size_t v = order[head];
      const BasisArc& arc = basis[parent_arc[v]];
      double c = cost[arc.i * n + arc.j];
      if (v >= m) {
        pv[v - m] = c - pu[arc.i];
      } else {
        pu[v] = c - pv[arc.j];
      }
    }
  };

  const std::size_t bland_after = 500 + 20 * nodes;
  const std::size_t hard_cap = 200000 + 400 * nodes * nodes;

  std::vector<char> in_basis(m * n, 0);
  auto rebuild_membership = [&]() {
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (const auto& arc : basis) in_basis[arc.i * n + arc.j] = 1;
  };
  rebuild_membership();

  for (std::size_t iter = 0;; ++iter) {
    if (iter > hard_cap)
      throw NumericalError("transport simplex exceeded pivot budget");
    rebuild_tree();

    // Entering arc: most negative reduced cost (Bland's first-negative rule
    // after a long degenerate stretch, which guarantees termination).
    bool bland = iter > bland_after;
    double best = -eps;
    std::size_t ei = m, ej = n;
    for (std::size_t i = 0; i < m && (!bland || ei == m); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (in_basis[i * n + j]) continue;
        double r = cost[i * n + j] - pu[i] - pv[j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    }
    if (ei == m) break;  // optimal

    // The entering arc closes one cycle with the tree path between its ends.
    std::size_t va = ei, vb = m + ej;
    std::vector<std::pair<std::size_t, int>> cycle;  // (basis index, sign)
    cycle.reserve(nodes);
    // Walk both endpoints to their lowest common ancestor. Arcs on the walk
    // from the target side start with sign -1 and alternate; arcs on the walk
    // from the source side are collected and appended with matching parity.
    std::vector<std::size_t> path_a, path_b;  // basis arc indices
    {
      std::size_t x = va, y = vb;
      while (depth[x] > depth[y]) {
        path_a.push_back(parent_arc[x]);
        x = parent[x];
      }
      while (depth[y] > depth[x]) {
        path_b.push_back(parent_arc[y]);
        y = parent[y];
      }
      while (x != y) {
        path_a.push_back(parent_arc[x]);
        x = parent[x];
        path_b.push_back(parent_arc[y]);
        y = parent[y];
      }
    }
    // Orientation: adding flow on (ei, ej) pushes mass source -> target. A
    // bipartite cycle alternates direction arc by arc, so signs alternate
    // with the walk order: the walk leaving the entering target gets -1
    // first, and the walk leaving the entering source gets -1 last.
    {
      int sign = -1;
      for (std::size_t arc : path_b) {
        cycle.push_back({arc, sign});
        sign = -sign;
      }
      // path_a runs ei -> lca; traversed in cycle order it is reversed.
      std::vector<std::pair<std::size_t, int>> tail;
      int sa = -1;
      for (std::size_t arc : path_a) {
        tail.push_back({arc, sa});
        sa = -sa;
      }
      for (auto it = tail.rbegin(); it != tail.rend(); ++it)
        cycle.push_back(*it);
    }

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = basis.size();
    for (auto [arc, sign] : cycle) {
      if (sign < 0 && basis[arc].flow < theta) {
        theta = basis[arc].flow;
        leaving = arc;
      }
    }
    if (leaving == basis.size())
      throw NumericalError("transport pivot found no leaving arc");

    for (auto [arc, sign] : cycle)
      basis[arc].flow += sign < 0 ? -theta : theta;
    in_basis[basis[leaving].i * n + basis[leaving].j] = 0;
    basis[leaving] = {ei, ej, theta};
    in_basis[ei * n + ej] = 1;
  }

  TransportResult result;
  result.arcs.reserve(basis.size());
  double total_cost = 0.0;
  for (const auto& arc : basis) {
    if (arc.flow <= 1e-16) continue;
    result.arcs.push_back({arc.i, arc.j, arc.flow});
    total_cost += arc.flow * cost[arc.i * n + arc.j];
  }
  result.cost = total_cost;
  return result;
}

}  // namespace wviab

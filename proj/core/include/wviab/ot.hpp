#pragma once

#include <cstddef>
#include <vector>

namespace wviab {

/// Exact solvers for discrete optimal transport. Both terminate at a vertex
/// of the feasible polytope with no reduced cost below the numerical
/// threshold, so the reported cost matches the true minimum up to roundoff.

struct AssignmentResult {
  std::vector<std::size_t> target_of;  // target index per source row
  double total_cost = 0.0;             // sum of matched entries
};

/// Minimum-cost perfect matching on an n-by-n cost matrix (row-major),
/// shortest-augmenting-path method with dual potentials, O(n^3).
AssignmentResult solve_assignment(const std::vector<double>& cost,
                                  std::size_t n);

struct TransportArc {
  std::size_t source = 0;
  std::size_t target = 0;
  double mass = 0.0;
};

struct TransportResult {
  std::vector<TransportArc> arcs;
  double cost = 0.0;
};

/// Balanced transportation problem on the bipartite graph of m supplies and
/// n demands with an m-by-n cost matrix (row-major). Primal network simplex
/// on the spanning-tree basis, northwest-corner start. Demands are rescaled
/// to match the total supply exactly before solving.
TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::vector<double>& cost);

}  // namespace wviab

#pragma once

// Exact discrete optimal transport with linear (|x - y|) ground cost.
//
// Atoms are stored column-wise: a d x n matrix holds n points of R^d.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mfoc::transport {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Pairwise Euclidean distances between the columns of x (d x n) and y (d x m).
template <typename DerivedX, typename DerivedY>
Matrix<typename DerivedX::Scalar> distance_matrix(const Eigen::MatrixBase<DerivedX>& x,
                                                  const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  Matrix<Scalar> c(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      c(i, j) = (x.col(i) - y.col(j)).norm();
    }
  }
  return c;
}

/// W1 on the real line: integral of |F - G| over the merged breakpoints.
/// Exact for arbitrary weights.
template <typename Scalar>
Scalar wasserstein1_line(const Vector<Scalar>& x, const Vector<Scalar>& wx,
                         const Vector<Scalar>& y, const Vector<Scalar>& wy) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = y.size();
  std::vector<std::pair<Scalar, Scalar>> events;
  events.reserve(static_cast<std::size_t>(n + m));
  for (Eigen::Index i = 0; i < n; ++i) events.emplace_back(x(i), wx(i));
  for (Eigen::Index j = 0; j < m; ++j) events.emplace_back(y(j), -wy(j));
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  Scalar cdf_gap = 0;
  Scalar total = 0;
  for (std::size_t k = 0; k + 1 < events.size(); ++k) {
    cdf_gap += events[k].second;
    total += std::abs(cdf_gap) * (events[k + 1].first - events[k].first);
  }
  return total;
}

/// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
/// paths with dual potentials, O(n^3)). Returns the column assigned to each row.
template <typename Scalar>
std::vector<Eigen::Index> solve_assignment(const Matrix<Scalar>& cost) {
  const Eigen::Index n = cost.rows();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based indexing with a virtual column 0 holding the row being inserted.
  std::vector<Scalar> row_pot(n + 1, 0), col_pot(n + 1, 0);
  std::vector<Eigen::Index> row_of_col(n + 1, 0), way(n + 1, 0);

  for (Eigen::Index i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    Eigen::Index j0 = 0;
    std::vector<Scalar> min_slack(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = row_of_col[j0];
      Scalar delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - row_pot[i0] - col_pot[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[row_of_col[j]] += delta;
          col_pot[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Eigen::Index> col_of_row(n, -1);
  for (Eigen::Index j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

/// Exact transportation problem min <C, P> s.t. P 1 = supply, P^T 1 = demand,
/// solved by successive shortest paths on the dense bipartite residual graph.
/// Supplies and demands must have equal totals up to roundoff.
template <typename Scalar>
Scalar min_cost_transport(const Matrix<Scalar>& cost, const Vector<Scalar>& supply,
                          const Vector<Scalar>& demand) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Scalar eps = Scalar(64) * std::numeric_limits<Scalar>::epsilon();

  Matrix<Scalar> flow = Matrix<Scalar>::Zero(n, m);
  Vector<Scalar> left = supply;
  Vector<Scalar> need = demand;
  // Node potentials: supply nodes [0, n), demand nodes [n, n + m).
  std::vector<Scalar> pot(static_cast<std::size_t>(n + m), 0);
  std::vector<Scalar> dist(static_cast<std::size_t>(n + m));
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n + m));
  std::vector<char> done(static_cast<std::size_t>(n + m));

  auto remaining = [&] { return std::min(left.sum(), need.sum()); };

  while (remaining() > eps) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (left(i) > eps) {
        dist[i] = 0;
        parent[i] = -1;
      }
    }
    // Dense Dijkstra on reduced costs.
    for (;;) {
      Eigen::Index u = -1;
      Scalar best = inf;
      for (Eigen::Index k = 0; k < n + m; ++k) {
        if (!done[k] && dist[k] < best) {
          best = dist[k];
          u = k;
        }
      }
      if (u < 0) break;
      done[u] = 1;
      if (u < n) {
        for (Eigen::Index j = 0; j < m; ++j) {
          const Eigen::Index v = n + j;
          if (done[v]) continue;
          const Scalar rc = std::max(Scalar(0), cost(u, j) + pot[u] - pot[v]);
          if (best + rc < dist[v]) {
            dist[v] = best + rc;
            parent[v] = u;
          }
        }
      } else {
        const Eigen::Index j = u - n;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (done[i] || flow(i, j) <= eps) continue;
          const Scalar rc = std::max(Scalar(0), -cost(i, j) + pot[u] - pot[i]);
          if (best + rc < dist[i]) {
            dist[i] = best + rc;
            parent[i] = u;
          }
        }
      }
    }

    Eigen::Index sink = -1;
    Scalar sink_cost = inf;
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index v = n + j;
      if (need(j) > eps && dist[v] + pot[v] < sink_cost) {
        sink_cost = dist[v] + pot[v];
        sink = v;
      }
    }
    if (sink < 0) break;

    Scalar reach = 0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      if (dist[k] < inf) reach = std::max(reach, dist[k]);
    }
    for (std::size_t k = 0; k < dist.size(); ++k) pot[k] += dist[k] < inf ? dist[k] : reach;

    // Bottleneck along the path.
    Scalar amount = need(sink - n);
    Eigen::Index v = sink;
    while (parent[v] >= 0) {
      const Eigen::Index u = parent[v];
      if (u >= n) amount = std::min(amount, flow(v, u - n));  // backward arc j -> i
      v = u;
    }
    amount = std::min(amount, left(v));

    v = sink;
    while (parent[v] >= 0) {
      const Eigen::Index u = parent[v];
      if (u < n) {
        flow(u, v - n) += amount;
      } else {
        flow(v, u - n) -= amount;
      }
      v = u;
    }
    left(v) -= amount;
    need(sink - n) -= amount;
  }

  return (flow.array() * cost.array()).sum();
}

}  // namespace mfoc::transport

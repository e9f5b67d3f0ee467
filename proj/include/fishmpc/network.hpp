#pragma once

// Orientation interaction graph: edge (i, j) iff j is in the orientation
// zone of i. W is the out-degree normalized adjacency, and the normalized
// eigenvector centrality is the positive beta with W^T beta = beta and
// sum(beta) = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "fishmpc/error.hpp"
#include "fishmpc/school.hpp"
#include "fishmpc/vec3.hpp"

namespace fishmpc {

class OrientationGraph {
 public:
  OrientationGraph() = default;

  /// Out-neighbor lists; self-loops and duplicates are rejected.
  explicit OrientationGraph(std::vector<std::vector<std::size_t>> out) : out_(std::move(out)) {
    const std::size_t n = out_.size();
    for (std::size_t i = 0; i < n; ++i) {
      auto& row = out_[i];
      std::sort(row.begin(), row.end());
      if (std::adjacent_find(row.begin(), row.end()) != row.end())
        throw InvalidArgument("OrientationGraph: duplicate edge");
      for (std::size_t j : row) {
        if (j >= n) throw InvalidArgument("OrientationGraph: edge target out of range");
        if (j == i) throw InvalidArgument("OrientationGraph: self-loop");
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return out_.size(); }
  [[nodiscard]] std::size_t out_degree(std::size_t i) const { return out_[i].size(); }
  [[nodiscard]] const std::vector<std::size_t>& successors(std::size_t i) const { return out_[i]; }

  [[nodiscard]] bool has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(out_[i].begin(), out_[i].end(), j);
  }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t m = 0;
    for (const auto& row : out_) m += row.size();
    return m;
  }

  /// W_ij = 1/n_i on edges, zero elsewhere.
  [[nodiscard]] double weight(std::size_t i, std::size_t j) const {
    return has_edge(i, j) ? 1.0 / static_cast<double>(out_[i].size()) : 0.0;
  }

  /// (W^T a)_j = sum over edges (i, j) of a_i / n_i.
  [[nodiscard]] std::vector<double> transpose_apply(const std::vector<double>& a) const {
    std::vector<double> r(out_.size(), 0.0);
    for (std::size_t i = 0; i < out_.size(); ++i) {
      if (out_[i].empty()) continue;
      const double share = a[i] / static_cast<double>(out_[i].size());
      for (std::size_t j : out_[i]) r[j] += share;
    }
    return r;
  }

  [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t i = 0; i < out_.size(); ++i)
      for (std::size_t j : out_[i]) e.emplace_back(i, j);
    return e;
  }

 private:
  std::vector<std::vector<std::size_t>> out_;
};

inline OrientationGraph build_graph(const NeighborSets& sets) {
  return OrientationGraph(sets.orientation);
}

/// Number of strongly connected components (iterative Tarjan).
inline std::size_t count_sccs(const OrientationGraph& g) {
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  const std::size_t n = g.size();
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next successor position)
  std::size_t next_index = 0;
  std::size_t components = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.emplace_back(root, 0);
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;

    while (!call.empty()) {
      auto& [v, pos] = call.back();
      const auto& succ = g.successors(v);
      if (pos < succ.size()) {
        const std::size_t w = succ[pos++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const std::size_t done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      if (low[done] == index[done]) {
        ++components;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
        } while (w != done);
      }
    }
  }
  return components;
}

inline bool is_strongly_connected(const OrientationGraph& g) { return count_sccs(g) <= 1; }

class CentralityVector {
 public:
  CentralityVector(std::vector<double> beta, std::size_t iterations)
      : beta_(std::move(beta)), iterations_(iterations) {}

  [[nodiscard]] std::size_t size() const { return beta_.size(); }
  double operator[](std::size_t i) const { return beta_[i]; }
  [[nodiscard]] const std::vector<double>& values() const { return beta_; }
  [[nodiscard]] std::size_t iterations() const { return iterations_; }
  [[nodiscard]] WeightVector as_weights() const { return WeightVector(beta_); }

 private:
  std::vector<double> beta_;
  std::size_t iterations_ = 0;
};

struct CentralityOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 100000;
};

/// ||W^T beta - beta||_inf.
inline double centrality_residual(const OrientationGraph& g, const std::vector<double>& beta) {
  const auto wb = g.transpose_apply(beta);
  double r = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) r = std::max(r, std::abs(wb[i] - beta[i]));
  return r;
}

/// Power iteration on the lazy operator (I + W^T)/2, which shares the fixed
/// point of W^T but is aperiodic, from the uniform vector.
inline CentralityVector eigenvector_centrality(const OrientationGraph& g,
                                               const CentralityOptions& opts = {}) {
  const std::size_t n = g.size();
  if (n == 0) throw InvalidArgument("eigenvector_centrality: empty graph");
  if (n == 1) return CentralityVector({1.0}, 0);
  if (!is_strongly_connected(g)) throw NotStronglyConnected();

  std::vector<double> beta(n, 1.0 / static_cast<double>(n));
  std::size_t it = 0;
  for (; it < opts.max_iterations; ++it) {
    const auto wb = g.transpose_apply(beta);
    double change = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = 0.5 * (beta[i] + wb[i]);
      change = std::max(change, std::abs(next - beta[i]));
      beta[i] = next;
      sum += next;
    }
    for (auto& b : beta) b /= sum;
    if (change <= 0.5 * opts.tolerance) break;
  }
  // Residual is twice the last lazy step; tighten once more if needed.
  while (centrality_residual(g, beta) > opts.tolerance && it < opts.max_iterations) {
    const auto wb = g.transpose_apply(beta);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += (beta[i] = 0.5 * (beta[i] + wb[i]));
    for (auto& b : beta) b /= sum;
    ++it;
  }
  return CentralityVector(std::move(beta), it);
}

}  // namespace fishmpc

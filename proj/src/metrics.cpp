#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "common.hpp"
#include "losses.hpp"

namespace rmcl {

double euclidean_distance(std::span<const double> a,
                          std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

double spherical_distance(std::span<const double> a,
                          std::span<const double> b) {
  if (a.size() != 2 || b.size() != 2)
    throw config_error("spherical_distance: expects (phi, theta) pairs");
  const double inner = std::sin(a[0]) * std::sin(b[0]) +
                       std::cos(a[0]) * std::cos(b[0]) * std::cos(b[1] - a[1]);
  return std::acos(std::clamp(inner, -1.0, 1.0));
}

double point_distance(DistanceKind kind, std::span<const double> a,
                      std::span<const double> b) {
  return kind == DistanceKind::euclidean ? euclidean_distance(a, b)
                                         : spherical_distance(a, b);
}

double oracle_error(const std::vector<Vec>& hypotheses,
                    const std::vector<Vec>& targets, DistanceKind kind) {
  if (hypotheses.empty()) throw config_error("oracle_error: no hypotheses");
  if (targets.empty()) throw config_error("oracle_error: empty target set");
  double total = 0.0;
  for (const auto& target : targets) {
    double best = point_distance(kind, hypotheses[0], target);
    for (std::size_t k = 1; k < hypotheses.size(); ++k)
      best = std::min(best, point_distance(kind, hypotheses[k], target));
    total += best;
  }
  return total / static_cast<double>(targets.size());
}

// ----------------------------------------------------------------- EMD

namespace {

// Weights are scaled to integers summing exactly to kMassScale; the solver
// then runs on exact integer supplies, and the rounding perturbs the optimal
// cost by less than ~1e-12 for the atom counts used here.
constexpr std::uint64_t kMassScale = 1ULL << 53;

void validate_mixture(const DiracMixture& mix, const char* which) {
  if (mix.atoms.empty())
    throw config_error(std::string("emd: empty mixture ") + which);
  if (mix.weights.size() != mix.atoms.size())
    throw config_error(std::string("emd: atom/weight mismatch in ") + which);
  double sum = 0.0;
  for (double w : mix.weights) {
    if (!(w >= 0.0))
      throw config_error(std::string("emd: negative weight in ") + which);
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw config_error(std::string("emd: mixture ") + which +
                       " is not normalized");
}

std::vector<std::uint64_t> scale_weights(const Vec& weights) {
  std::vector<std::uint64_t> scaled(weights.size());
  std::uint64_t total = 0;
  std::size_t heaviest = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    scaled[i] = static_cast<std::uint64_t>(
        std::llround(weights[i] * static_cast<double>(kMassScale)));
    total += scaled[i];
    if (weights[i] > weights[heaviest]) heaviest = i;
  }
  // Put the rounding residue on the heaviest atom to hit the scale exactly.
  if (total > kMassScale)
    scaled[heaviest] -= total - kMassScale;
  else
    scaled[heaviest] += kMassScale - total;
  return scaled;
}

bool mixture_less(const DiracMixture& a, const DiracMixture& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.atoms[i] != b.atoms[i]) return a.atoms[i] < b.atoms[i];
  }
  return a.weights < b.weights;
}

struct SspState {
  std::size_t n, m;
  const Matrix& cost;
  std::vector<std::uint64_t> supply, demand;
  std::vector<std::uint64_t> flow;       // n*m, row-major
  std::vector<double> potential;         // n + m
  std::vector<double> dist;
  std::vector<int> parent;               // preceding node on shortest path
  std::vector<char> settled;

  SspState(const Matrix& c, std::vector<std::uint64_t> s,
           std::vector<std::uint64_t> d)
      : n(s.size()),
        m(d.size()),
        cost(c),
        supply(std::move(s)),
        demand(std::move(d)),
        flow(n * m, 0),
        potential(n + m, 0.0) {}
};

// One multi-source Dijkstra from every source with remaining supply to the
// nearest sink with remaining demand. Returns that sink's node id, or -1.
int ssp_dijkstra(SspState& st) {
  const std::size_t nodes = st.n + st.m;
  st.dist.assign(nodes, std::numeric_limits<double>::infinity());
  st.parent.assign(nodes, -1);
  st.settled.assign(nodes, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (std::size_t i = 0; i < st.n; ++i) {
    if (st.supply[i] > 0) {
      st.dist[i] = 0.0;
      heap.emplace(0.0, i);
    }
  }
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (st.settled[u]) continue;
    st.settled[u] = 1;
    if (u >= st.n) {
      const std::size_t j = u - st.n;
      if (st.demand[j] > 0) return static_cast<int>(u);
      // Residual (backward) arcs j -> i where flow is positive.
      for (std::size_t i = 0; i < st.n; ++i) {
        if (st.flow[i * st.m + j] == 0 || st.settled[i]) continue;
        double rc = -st.cost(i, j) + st.potential[u] - st.potential[i];
        if (rc < 0.0) rc = 0.0;  // guard fp noise in reduced costs
        if (d + rc < st.dist[i]) {
          st.dist[i] = d + rc;
          st.parent[i] = static_cast<int>(u);
          heap.emplace(st.dist[i], i);
        }
      }
    } else {
      const std::size_t i = u;
      for (std::size_t j = 0; j < st.m; ++j) {
        const std::size_t v = st.n + j;
        if (st.settled[v]) continue;
        double rc = st.cost(i, j) + st.potential[i] - st.potential[v];
        if (rc < 0.0) rc = 0.0;
        if (d + rc < st.dist[v]) {
          st.dist[v] = d + rc;
          st.parent[v] = static_cast<int>(i);
          heap.emplace(st.dist[v], v);
        }
      }
    }
  }
  return -1;
}

double emd_exact(const Matrix& cost, const Vec& wa, const Vec& wb) {
  SspState st(cost, scale_weights(wa), scale_weights(wb));
  std::uint64_t remaining = kMassScale;
  while (remaining > 0) {
    const int target = ssp_dijkstra(st);
    if (target < 0)
      throw numeric_error("emd: no augmenting path (internal)");
    // Update potentials with the capped distances.
    const double dist_t = st.dist[target];
    for (std::size_t v = 0; v < st.potential.size(); ++v)
      st.potential[v] += std::min(st.dist[v], dist_t);
    // Walk the path back to its source, collecting the bottleneck.
    const std::size_t sink = static_cast<std::size_t>(target) - st.n;
    std::uint64_t bottleneck = st.demand[sink];
    int node = target;
    while (true) {
      const int prev = st.parent[node];
      if (prev < 0) {
        bottleneck = std::min(bottleneck, st.supply[node]);
        break;
      }
      if (node >= static_cast<int>(st.n)) {
        // forward arc prev(source) -> node(sink): unlimited capacity
      } else {
        // backward arc prev(sink) -> node(source): limited by current flow
        const std::size_t j = static_cast<std::size_t>(prev) - st.n;
        bottleneck =
            std::min(bottleneck, st.flow[static_cast<std::size_t>(node) * st.m + j]);
      }
      node = prev;
    }
    // Apply the augmentation.
    const std::size_t source = static_cast<std::size_t>(node);
    int cur = target;
    while (st.parent[cur] >= 0) {
      const int prev = st.parent[cur];
      if (cur >= static_cast<int>(st.n))
        st.flow[static_cast<std::size_t>(prev) * st.m +
                (static_cast<std::size_t>(cur) - st.n)] += bottleneck;
      else
        st.flow[static_cast<std::size_t>(cur) * st.m +
                (static_cast<std::size_t>(prev) - st.n)] -= bottleneck;
      cur = prev;
    }
    st.supply[source] -= bottleneck;
    st.demand[sink] -= bottleneck;
    remaining -= bottleneck;
  }
  const double inv_scale = 1.0 / static_cast<double>(kMassScale);
  double total = 0.0;
  for (std::size_t i = 0; i < st.n; ++i)
    for (std::size_t j = 0; j < st.m; ++j) {
      const std::uint64_t f = st.flow[i * st.m + j];
      if (f > 0) total += static_cast<double>(f) * inv_scale * cost(i, j);
    }
  return total;
}

}  // namespace

double emd(const DiracMixture& a, const DiracMixture& b, DistanceKind kind) {
  validate_mixture(a, "a");
  validate_mixture(b, "b");
  if (a.atoms[0].size() != b.atoms[0].size())
    throw config_error("emd: atom dimensions differ");
  const DiracMixture* first = &a;
  const DiracMixture* second = &b;
  if (mixture_less(b, a)) std::swap(first, second);
  Matrix cost(first->size(), second->size());
  for (std::size_t i = 0; i < first->size(); ++i)
    for (std::size_t j = 0; j < second->size(); ++j)
      cost(i, j) = point_distance(kind, first->atoms[i], second->atoms[j]);
  return emd_exact(cost, first->weights, second->weights);
}

double emd_bruteforce_uniform(const DiracMixture& a, const DiracMixture& b,
                              DistanceKind kind) {
  validate_mixture(a, "a");
  validate_mixture(b, "b");
  const std::size_t n = a.size();
  if (n != b.size())
    throw config_error("emd_bruteforce_uniform: atom counts differ");
  if (n > 8)
    throw config_error("emd_bruteforce_uniform: limited to n <= 8");
  const double uniform = 1.0 / static_cast<double>(n);
  for (double w : a.weights)
    if (std::abs(w - uniform) > 1e-9)
      throw config_error("emd_bruteforce_uniform: weights must be uniform");
  for (double w : b.weights)
    if (std::abs(w - uniform) > 1e-9)
      throw config_error("emd_bruteforce_uniform: weights must be uniform");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      cost += point_distance(kind, a.atoms[i], b.atoms[perm[i]]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best * uniform;
}

// ------------------------------------------------------------- assignment

namespace {

// Shortest augmenting path assignment (potentials form), O(n^3).
double assignment_min_cost(const Matrix& a, std::vector<std::size_t>* match) {
  const int n = static_cast<int>(a.rows);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double cost = 0.0;
  if (match != nullptr) match->assign(n, 0);
  for (int j = 1; j <= n; ++j) {
    cost += a(p[j] - 1, j - 1);
    if (match != nullptr) (*match)[p[j] - 1] = static_cast<std::size_t>(j - 1);
  }
  return cost;
}

}  // namespace

double assignment_cost(const Matrix& cost, std::span<const std::size_t> perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, perm[i]);
  return total;
}

std::vector<std::size_t> hungarian(const Matrix& cost) {
  if (cost.rows != cost.cols)
    throw config_error("hungarian: cost matrix must be square");
  if (cost.rows == 0) throw config_error("hungarian: empty cost matrix");
  ensure_finite(cost.data, "hungarian cost matrix");

  const std::size_t n = cost.rows;
  double scale = 1.0;
  for (double c : cost.data) scale = std::max(scale, std::abs(c));
  const double big = 1e6 * scale * static_cast<double>(n);
  const double optimum = assignment_min_cost(cost, nullptr);
  const double tol = 1e-9 * std::max(1.0, std::abs(optimum));

  // Fix rows in order to the smallest column still compatible with an
  // optimal assignment; this yields the lexicographically smallest optimum.
  std::vector<std::size_t> perm(n, 0);
  std::vector<char> used(n, 0);
  Matrix work = cost;
  for (std::size_t i = 0; i < n; ++i) {
    bool fixed = false;
    for (std::size_t j = 0; j < n && !fixed; ++j) {
      if (used[j]) continue;
      Matrix trial = work;
      for (std::size_t jj = 0; jj < n; ++jj)
        if (jj != j) trial(i, jj) = big;
      const double cost_with_fix = assignment_min_cost(trial, nullptr);
      if (cost_with_fix <= optimum + tol) {
        perm[i] = j;
        used[j] = 1;
        for (std::size_t jj = 0; jj < n; ++jj)
          if (jj != j) work(i, jj) = big;
        fixed = true;
      }
    }
    if (!fixed) throw numeric_error("hungarian: failed to fix row (internal)");
  }
  return perm;
}

CollapseHistogram collapse_histogram(const MultiHeadModel& model,
                                     std::span<const TrainingSample> dataset) {
  if (dataset.empty())
    throw config_error("collapse_histogram: empty dataset");
  CollapseHistogram hist;
  hist.counts.assign(model.hypothesis_count(), 0);
  hist.dataset_size = dataset.size();

  // Batched forward pass; winner sets per sample from plain argmin.
  constexpr std::size_t kBatch = 4096;
  std::size_t index = 0;
  ModelTrace trace;
  while (index < dataset.size()) {
    const std::size_t count = std::min(kBatch, dataset.size() - index);
    Matrix inputs(count, model.input_dim());
    for (std::size_t s = 0; s < count; ++s)
      inputs(s, 0) = dataset[index + s].t;
    model_forward(model, inputs, trace);
    for (std::size_t s = 0; s < count; ++s) {
      const ScoredPrediction pred = prediction_from_trace(model, trace, s);
      const MultiTargetWtaResult result =
          multi_target_wta_loss(pred.hypotheses, dataset[index + s].targets);
      for (std::size_t k = 0; k < hist.counts.size(); ++k)
        if (result.winners.positive[k]) ++hist.counts[k];
    }
    index += count;
  }
  return hist;
}

}  // namespace rmcl

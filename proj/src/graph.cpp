#include "mtcrf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mtcrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double max_of(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  return m;
}

// A single chain over S states: pot[0] is 1 x S (from START), pot[t] is S x S.
struct Chain {
  std::size_t states = 0;
  std::vector<Table> pot;
};

// Folds the dependency factor of a per-task model into its chain: each label
// of the primary task absorbs the dependency row (or column) through `reduce`.
template <typename Reduce>
Chain tree_chain(const FactorGraph& g, int task, Reduce reduce) {
  Chain c;
  c.states = static_cast<std::size_t>(g.label_counts[task]);
  const std::size_t other = static_cast<std::size_t>(g.label_counts[1 - task]);
  std::vector<double> buf(other);
  for (std::size_t t = 0; t < g.length; ++t) {
    Table p = g.transition[task][t];
    if (uses_dependency(g.kind)) {
      const Table& dep = g.dependency[t];
      for (std::size_t s = 0; s < c.states; ++s) {
        for (std::size_t o = 0; o < other; ++o) buf[o] = task == 0 ? dep(s, o) : dep(o, s);
        const double node = reduce(std::span<const double>(buf));
        for (std::size_t r = 0; r < p.rows; ++r) p(r, s) += node;
      }
    }
    c.pot.push_back(std::move(p));
  }
  return c;
}

// Both label rows as one chain over (y, z) pairs; chains the model lacks add 0.
Chain product_chain(const FactorGraph& g) {
  const std::size_t ny = g.label_counts[0], nz = g.label_counts[1];
  Chain c;
  c.states = ny * nz;
  for (std::size_t t = 0; t < g.length; ++t) {
    const bool with_y = uses_chain(g.kind, 0), with_z = uses_chain(g.kind, 1);
    const Table& dep = g.dependency[t];
    const std::size_t rows = t == 0 ? 1 : c.states;
    Table p(rows, c.states);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t pa = t == 0 ? 0 : r / nz, pb = t == 0 ? 0 : r % nz;
      for (std::size_t a = 0; a < ny; ++a)
        for (std::size_t b = 0; b < nz; ++b)
          p(r, a * nz + b) = (with_y ? g.transition[0][t](pa, a) : 0.0) + (with_z ? g.transition[1][t](pb, b) : 0.0) +
                             dep(a, b);
    }
    c.pot.push_back(std::move(p));
  }
  return c;
}

Chain build_chain(const FactorGraph& g, bool for_max) {
  auto reduce = [for_max](std::span<const double> xs) { return for_max ? max_of(xs) : log_sum_exp(xs); };
  switch (g.kind) {
    case ModelKind::ChainY:
    case ModelKind::TaskY: return tree_chain(g, 0, reduce);
    case ModelKind::ChainZ:
    case ModelKind::TaskZ: return tree_chain(g, 1, reduce);
    case ModelKind::Factorial: return product_chain(g);
  }
  return {};
}

struct ForwardBackward {
  std::vector<std::vector<double>> alpha, beta;
  double log_z = 0.0;
};

ForwardBackward forward_backward(const Chain& c) {
  const std::size_t T = c.pot.size(), S = c.states;
  ForwardBackward fb;
  fb.alpha.assign(T, std::vector<double>(S));
  fb.beta.assign(T, std::vector<double>(S, 0.0));
  std::vector<double> buf(S);
  for (std::size_t s = 0; s < S; ++s) fb.alpha[0][s] = c.pot[0](0, s);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t p = 0; p < S; ++p) buf[p] = fb.alpha[t - 1][p] + c.pot[t](p, s);
      fb.alpha[t][s] = log_sum_exp(buf);
    }
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t p = 0; p < S; ++p) {
      for (std::size_t s = 0; s < S; ++s) buf[s] = c.pot[t + 1](p, s) + fb.beta[t + 1][s];
      fb.beta[t][p] = log_sum_exp(buf);
    }
  fb.log_z = log_sum_exp(fb.alpha[T - 1]);
  return fb;
}

// Pair marginals of the chain; t = 0 yields the 1 x S unary table.
std::vector<Table> pair_marginals(const Chain& c, const ForwardBackward& fb) {
  const std::size_t T = c.pot.size(), S = c.states;
  std::vector<Table> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Table m(c.pot[t].rows, S);
    for (std::size_t p = 0; p < m.rows; ++p) {
      const double head = t == 0 ? 0.0 : fb.alpha[t - 1][p];
      for (std::size_t s = 0; s < S; ++s) m(p, s) = std::exp(head + c.pot[t](p, s) + fb.beta[t][s] - fb.log_z);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> unary(const ForwardBackward& fb, std::size_t t) {
  std::vector<double> u(fb.alpha[t].size());
  for (std::size_t s = 0; s < u.size(); ++s) u[s] = std::exp(fb.alpha[t][s] + fb.beta[t][s] - fb.log_z);
  return u;
}

std::vector<std::vector<double>> max_suffix(const Chain& c) {
  const std::size_t T = c.pot.size(), S = c.states;
  std::vector<std::vector<double>> bm(T, std::vector<double>(S, 0.0));
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t p = 0; p < S; ++p) {
      double m = kNegInf;
      for (std::size_t s = 0; s < S; ++s) m = std::max(m, c.pot[t + 1](p, s) + bm[t + 1][s]);
      bm[t][p] = m;
    }
  return bm;
}

double chain_max(const Chain& c, const std::vector<std::vector<double>>& bm) {
  double m = kNegInf;
  for (std::size_t s = 0; s < c.states; ++s) m = std::max(m, c.pot[0](0, s) + bm[0][s]);
  return m;
}

// Lexicographically smallest path whose score reaches `threshold`, picked
// left to right against exact best completions.
std::vector<int> lex_path(const Chain& c, const std::vector<std::vector<double>>& bm, double threshold) {
  const std::size_t T = c.pot.size(), S = c.states;
  std::vector<int> path(T);
  double prefix = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t row = t == 0 ? 0 : static_cast<std::size_t>(path[t - 1]);
    std::size_t pick = S, best = 0;
    double best_v = kNegInf;
    for (std::size_t s = 0; s < S; ++s) {
      const double v = prefix + c.pot[t](row, s) + bm[t][s];
      if (v >= threshold) {
        pick = s;
        break;
      }
      if (v > best_v) best_v = v, best = s;
    }
    if (pick == S) pick = best;  // rounding left nothing above the threshold
    path[t] = static_cast<int>(pick);
    prefix += c.pot[t](row, pick);
  }
  return path;
}

std::vector<int> lex_viterbi(const Chain& c, double threshold) {
  auto bm = max_suffix(c);
  const double own = chain_max(c, bm);
  return lex_path(c, bm, std::min(threshold, own - tie_tolerance(own)));
}

Assignment decode_tree(const FactorGraph& g, int task) {
  const Chain c = build_chain(g, true);
  auto bm = max_suffix(c);
  const double best = chain_max(c, bm);
  const double threshold = best - tie_tolerance(best);
  Assignment a;
  a.rows[task] = lex_path(c, bm, threshold);
  if (!uses_dependency(g.kind)) return a;

  // Other row given the primary one: each position picks the smallest label
  // that keeps the total above the threshold with the best possible rest.
  const auto& primary = a.rows[task];
  const std::size_t T = g.length, other = g.label_counts[1 - task];
  auto dep_at = [&](std::size_t t, std::size_t o) {
    return task == 0 ? g.dependency[t](primary[t], o) : g.dependency[t](o, primary[t]);
  };
  double base = 0.0;
  for (std::size_t t = 0; t < T; ++t) base += g.transition[task][t](t == 0 ? 0 : primary[t - 1], primary[t]);
  std::vector<double> rest(T + 1, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    double m = kNegInf;
    for (std::size_t o = 0; o < other; ++o) m = std::max(m, dep_at(t, o));
    rest[t] = rest[t + 1] + m;
  }
  auto& row = a.rows[1 - task];
  row.resize(T);
  double prefix = base;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t pick = other, arg = 0;
    double best_v = kNegInf;
    for (std::size_t o = 0; o < other; ++o) {
      const double v = prefix + dep_at(t, o) + rest[t + 1];
      if (v >= threshold) {
        pick = o;
        break;
      }
      if (v > best_v) best_v = v, arg = o;
    }
    if (pick == other) pick = arg;
    row[t] = static_cast<int>(pick);
    prefix += dep_at(t, pick);
  }
  return a;
}

// Decodes on the product chain so the task-1 row is fixed first, as the
// tie-break requires. Serves both the factorial and the task-2 model.
Assignment decode_product(const FactorGraph& g) {
  const Chain c = product_chain(g);
  const std::size_t T = g.length, ny = g.label_counts[0], nz = g.label_counts[1];
  auto bm = max_suffix(c);
  const double best = chain_max(c, bm);
  const double threshold = best - tie_tolerance(best);

  // Task-1 row first: alpha[b] is the best prefix score with the task-1
  // prefix fixed so far and z_t = b.
  Assignment a;
  auto& y = a.rows[0];
  y.resize(T);
  std::vector<double> alpha(nz), cand_alpha(nz), picked_alpha(nz);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t pick = ny, arg = 0;
    double arg_v = kNegInf;
    for (std::size_t cand = 0; cand < ny && pick == ny; ++cand) {
      double v = kNegInf;
      for (std::size_t b = 0; b < nz; ++b) {
        const std::size_t s = cand * nz + b;
        double in = kNegInf;
        if (t == 0) {
          in = c.pot[0](0, s);
        } else {
          for (std::size_t pb = 0; pb < nz; ++pb)
            in = std::max(in, alpha[pb] + c.pot[t](static_cast<std::size_t>(y[t - 1]) * nz + pb, s));
        }
        cand_alpha[b] = in;
        v = std::max(v, in + bm[t][s]);
      }
      if (v >= threshold) pick = cand;
      if (v > arg_v) arg_v = v, arg = cand, picked_alpha = cand_alpha;
      if (pick == cand) picked_alpha = cand_alpha;
    }
    if (pick == ny) pick = arg;
    y[t] = static_cast<int>(pick);
    alpha = picked_alpha;
  }

  // Task-2 row with the task-1 row fixed: a chain over z.
  Chain zc;
  zc.states = nz;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t rows = t == 0 ? 1 : nz;
    Table p(rows, nz);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t b = 0; b < nz; ++b)
        p(r, b) = c.pot[t](t == 0 ? 0 : static_cast<std::size_t>(y[t - 1]) * nz + r, static_cast<std::size_t>(y[t]) * nz + b);
    zc.pot.push_back(std::move(p));
  }
  a.rows[1] = lex_viterbi(zc, threshold);
  return a;
}

}  // namespace

double Table::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

double tie_tolerance(double max_score) { return 1e-10 * std::max(1.0, std::abs(max_score)); }

FactorGraph assemble(const FiringTable& firings, const PotentialWeights& weights, ModelKind kind) {
  FactorGraph g;
  g.kind = kind;
  g.length = firings.length;
  g.label_counts = firings.label_counts;
  const std::array<std::span<const double>, 2> tw{weights.transition_y, weights.transition_z};
  for (int task = 0; task < 2; ++task) {
    if (!uses_chain(kind, task)) continue;
    if (tw[task].size() != firings.block_sizes[task])
      throw Error(std::string("assemble: ") + block_name(transition_block(task)) + " weights have dimension " +
                  std::to_string(tw[task].size()) + ", firings expect " + std::to_string(firings.block_sizes[task]));
    for (const auto& cells : firings.transition[task]) {
      Table tab(cells.rows(), cells.cols());
      for (std::size_t r = 0; r < tab.rows; ++r)
        for (std::size_t s = 0; s < tab.cols; ++s) {
          double v = 0.0;
          for (int id : cells.at(r, s)) v += tw[task][id];
          tab(r, s) = v;
        }
      g.transition[task].push_back(std::move(tab));
    }
  }
  if (uses_dependency(kind)) {
    if (weights.dependency.size() != firings.block_sizes[2])
      throw Error("assemble: dependency weights have dimension " + std::to_string(weights.dependency.size()) +
                  ", firings expect " + std::to_string(firings.block_sizes[2]));
    for (const auto& cells : firings.dependency) {
      Table tab(cells.rows(), cells.cols());
      for (std::size_t a = 0; a < tab.rows; ++a)
        for (std::size_t b = 0; b < tab.cols; ++b) {
          double v = 0.0;
          for (int id : cells.at(a, b)) v += weights.dependency[id];
          tab(a, b) = v;
        }
      g.dependency.push_back(std::move(tab));
    }
  }
  return g;
}

MarginalSet sum_inference(const FactorGraph& g) {
  MarginalSet m;
  const Chain c = build_chain(g, false);
  const ForwardBackward fb = forward_backward(c);
  m.log_partition = fb.log_z;
  auto pairs = pair_marginals(c, fb);

  if (g.kind != ModelKind::Factorial) {
    const int task = uses_chain(g.kind, 0) ? 0 : 1;
    if (uses_dependency(g.kind)) {
      const std::size_t other = g.label_counts[1 - task];
      std::vector<double> buf(other);
      for (std::size_t t = 0; t < g.length; ++t) {
        const Table& dep = g.dependency[t];
        const auto u = unary(fb, t);
        Table d(dep.rows, dep.cols);
        for (std::size_t s = 0; s < c.states; ++s) {
          for (std::size_t o = 0; o < other; ++o) buf[o] = task == 0 ? dep(s, o) : dep(o, s);
          const double node = log_sum_exp(buf);
          for (std::size_t o = 0; o < other; ++o) {
            const double p = u[s] * std::exp(buf[o] - node);
            if (task == 0) d(s, o) = p; else d(o, s) = p;
          }
        }
        m.dependency.push_back(std::move(d));
      }
    }
    m.transition[task] = std::move(pairs);
    return m;
  }

  const std::size_t ny = g.label_counts[0], nz = g.label_counts[1];
  for (std::size_t t = 0; t < g.length; ++t) {
    const Table& p = pairs[t];
    const bool at_start = t == 0;
    Table my(t == 0 ? 1 : ny, ny), mz(t == 0 ? 1 : nz, nz), d(ny, nz);
    for (std::size_t r = 0; r < p.rows; ++r) {
      const std::size_t pa = at_start ? 0 : r / nz, pb = at_start ? 0 : r % nz;
      for (std::size_t a = 0; a < ny; ++a)
        for (std::size_t b = 0; b < nz; ++b) {
          const double v = p(r, a * nz + b);
          my(pa, a) += v;
          mz(pb, b) += v;
          d(a, b) += v;
        }
    }
    m.transition[0].push_back(std::move(my));
    m.transition[1].push_back(std::move(mz));
    m.dependency.push_back(std::move(d));
  }
  return m;
}

Decoded max_inference(const FactorGraph& g) {
  Decoded out;
  switch (g.kind) {
    case ModelKind::ChainY:
    case ModelKind::TaskY: out.assignment = decode_tree(g, 0); break;
    case ModelKind::ChainZ: out.assignment = decode_tree(g, 1); break;
    case ModelKind::TaskZ:
    case ModelKind::Factorial: out.assignment = decode_product(g); break;
  }
  out.score = score(g, out.assignment);
  return out;
}

double score(const FactorGraph& g, const Assignment& a) {
  double s = 0.0;
  for (int task = 0; task < 2; ++task) {
    if (!uses_chain(g.kind, task)) continue;
    const auto& row = a.rows[task];
    if (row.size() != g.length) throw Error("score: assignment row length does not match the graph");
    for (std::size_t t = 0; t < g.length; ++t) s += g.transition[task][t](t == 0 ? 0 : row[t - 1], row[t]);
  }
  if (uses_dependency(g.kind)) {
    if (a.rows[0].size() != g.length || a.rows[1].size() != g.length)
      throw Error("score: assignment row length does not match the graph");
    for (std::size_t t = 0; t < g.length; ++t) s += g.dependency[t](a.rows[0][t], a.rows[1][t]);
  }
  return s;
}

}  // namespace mtcrf

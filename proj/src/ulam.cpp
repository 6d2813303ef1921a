#include "singflow/ulam.hpp"

#include "singflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>

namespace singflow {

std::size_t UlamOperator::nonzeros() const {
  std::size_t s = 0;
  for (const auto& r : rows) s += r.size();
  return s;
}

double UlamOperator::row_sum_defect() const {
  double worst = 0.0;
  for (const auto& r : rows) {
    double s = 0.0;
    for (const auto& [j, p] : r) s += p;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

std::vector<double> UlamOperator::left_multiply(const std::vector<double>& v) const {
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (const auto& [j, p] : rows[i]) out[j] += vi * p;
  }
  return out;
}

std::vector<double> UlamOperator::right_multiply(const std::vector<double>& h) const {
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& [j, p] : rows[i]) s += p * h[j];
    out[i] = s;
  }
  return out;
}

namespace {

std::vector<std::pair<int, double>> assemble_row(const PiecewiseMap1D& map, int n, int i) {
  const double w = (map.hi() - map.lo()) / n;
  const double a = map.lo() + i * w;
  const double b = (i + 1 == n) ? map.hi() : a + w;
  std::vector<std::pair<int, double>> row;
  auto bin_of = [&](double y) {
    return std::clamp(static_cast<int>(std::floor((y - map.lo()) / w)), 0, n - 1);
  };
  for (const auto& br : map.branches()) {
    const double s = std::max(a, br.lo);
    const double t = std::min(b, br.hi);
    if (!(t > s)) continue;
    double ys = br.map(s), yt = br.map(t);
    double ya = std::min(ys, yt), yb = std::max(ys, yt);
    // Mass landing outside the domain is lost and later renormalized away.
    ya = std::max(ya, map.lo());
    yb = std::min(yb, map.hi());
    if (!(yb > ya)) continue;
    const int ja = bin_of(ya), jb = bin_of(yb);
    for (int j = ja; j <= jb; ++j) {
      const double cl = std::max(ya, map.lo() + j * w);
      const double ch = std::min(yb, (j + 1 == n) ? map.hi() : map.lo() + (j + 1) * w);
      if (!(ch > cl)) continue;
      const double xl = std::clamp(br.preimage(cl), s, t);
      const double xh = std::clamp(br.preimage(ch), s, t);
      const double frac = std::abs(xh - xl) / (b - a);
      if (frac > 0.0) row.emplace_back(j, frac);
    }
  }
  std::sort(row.begin(), row.end());
  // Merge duplicates from different branches hitting the same bin.
  std::vector<std::pair<int, double>> merged;
  for (const auto& e : row) {
    if (!merged.empty() && merged.back().first == e.first) {
      merged.back().second += e.second;
    } else {
      merged.push_back(e);
    }
  }
  double total = 0.0;
  for (const auto& e : merged) total += e.second;
  std::vector<std::pair<int, double>> kept;
  for (const auto& e : merged) {
    if (e.second >= kUlamDropTol * total) kept.push_back(e);
  }
  double ks = 0.0;
  for (const auto& e : kept) ks += e.second;
  if (!(ks > 0.0)) throw NumericError("Ulam row " + std::to_string(i) + " has no image mass");
  for (auto& e : kept) e.second /= ks;
  return kept;
}

void check_inputs(const PiecewiseMap1D& map, int n) {
  if (n < 64) throw ParameterError("Ulam discretization needs at least 64 bins");
  map.check_expansion();
}

}  // namespace

UlamOperator ulam_build(const PiecewiseMap1D& map, int n) {
  check_inputs(map, n);
  UlamOperator op{n, map.lo(), map.hi(), std::vector<std::vector<std::pair<int, double>>>(n)};
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (int i = 0; i < n; ++i) {
    try {
      op.rows[i] = assemble_row(map, n, i);
    } catch (...) {
#pragma omp critical(singflow_ulam_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return op;
}

UlamOperator ulam_build_serial(const PiecewiseMap1D& map, int n) {
  check_inputs(map, n);
  UlamOperator op{n, map.lo(), map.hi(), std::vector<std::vector<std::pair<int, double>>>(n)};
  for (int i = 0; i < n; ++i) op.rows[i] = assemble_row(map, n, i);
  return op;
}

namespace {

// Iterative Tarjan; returns component id per vertex.
std::vector<int> strong_components(const UlamOperator& op, int& count) {
  const int n = op.n;
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  int next = 0;
  count = 0;
  struct Frame {
    int v;
    std::size_t edge;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = next++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto& row = op.rows[f.v];
      if (f.edge < row.size()) {
        const int w = row[f.edge++].first;
        if (index[w] < 0) {
          index[w] = low[w] = next++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const int v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
    }
  }
  return comp;
}

double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace

UlamResult invariant_densities(const UlamOperator& op, double eig_tol) {
  if (!(eig_tol >= 1e-12 && eig_tol <= 1e-6)) {
    throw ParameterError("eig_tol must lie in [1e-12, 1e-6]");
  }
  const int n = op.n;
  int ncomp = 0;
  const std::vector<int> comp = strong_components(op, ncomp);
  std::vector<char> closed(ncomp, 1);
  for (int i = 0; i < n; ++i) {
    for (const auto& [j, p] : op.rows[i]) {
      if (comp[j] != comp[i]) closed[comp[i]] = 0;
    }
  }

  UlamResult res;
  std::vector<std::vector<double>> fixed;  // probability vectors
  for (int c = 0; c < ncomp; ++c) {
    if (!closed[c]) continue;
    std::vector<int> support;
    for (int i = 0; i < n; ++i) {
      if (comp[i] == c) support.push_back(i);
    }
    std::vector<double> p(n, 0.0);
    for (int i : support) p[i] = 1.0 / support.size();
    double resid = 1.0;
    // Lazy iteration (I + P)/2 removes periodicity within the class.
    for (int it = 0; it < 200000; ++it) {
      std::vector<double> q = op.left_multiply(p);
      resid = l1_diff(q, p);
      if (resid <= 0.1 * eig_tol) break;
      for (int i = 0; i < n; ++i) p[i] = 0.5 * (p[i] + q[i]);
    }
    if (resid > eig_tol) {
      throw NumericError("no fixed vector within eig_tol of eigenvalue 1 (residual " +
                         std::to_string(resid) + ")");
    }
    double mass = 0.0;
    for (double v : p) mass += v;
    for (double& v : p) v /= mass;
    res.fixed_residual = std::max(res.fixed_residual, resid);
    std::vector<double> density(n);
    for (int i = 0; i < n; ++i) density[i] = p[i] / op.bin_width();
    res.densities.push_back(std::move(density));
    res.supports.push_back(std::move(support));
    fixed.push_back(std::move(p));
  }
  res.count = static_cast<int>(fixed.size());
  if (res.count == 0) throw NumericError("stochastic operator without a closed class");

  // Absorption probabilities h_k = lim P^m 1_{C_k}; sum_k h_k p_k is the
  // spectral projector onto the fixed space.
  std::vector<std::vector<double>> absorb;
  for (const auto& support : res.supports) {
    std::vector<double> h(n, 0.0);
    for (int i : support) h[i] = 1.0;
    for (int it = 0; it < 20000; ++it) {
      std::vector<double> g = op.right_multiply(h);
      const double d = l1_diff(g, h);
      h.swap(g);
      if (d <= 1e-14 * n) break;
    }
    absorb.push_back(std::move(h));
  }

  auto deflate = [&](std::vector<double>& v) {
    for (std::size_t k = 0; k < fixed.size(); ++k) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += v[i] * absorb[k][i];
      for (int i = 0; i < n; ++i) v[i] -= dot * fixed[k][i];
    }
  };
  std::vector<double> v(n);
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  for (int i = 0; i < n; ++i) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    v[i] = static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5;
  }
  deflate(v);
  auto norm = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += std::abs(e);
    return s;
  };
  double nv = norm(v);
  const int iters = 400, window = 100;
  double log_sum = 0.0;
  int counted = 0;
  for (int it = 0; it < iters && nv > 0.0; ++it) {
    for (double& e : v) e /= nv;
    v = op.left_multiply(v);
    deflate(v);
    nv = norm(v);
    if (nv <= 1e-300) {
      nv = 0.0;
      break;
    }
    if (it >= iters - window) {
      log_sum += std::log(nv);
      ++counted;
    }
  }
  res.subdominant_modulus = (counted > 0 && nv > 0.0) ? std::exp(log_sum / counted) : 0.0;
  return res;
}

double density_mean(const UlamOperator& op, const std::vector<double>& density,
                    const std::function<double(double)>& observable) {
  double s = 0.0;
  for (int i = 0; i < op.n; ++i) s += observable(op.midpoint(i)) * density[i];
  return s * op.bin_width();
}

void write_density_csv(std::ostream& out, const UlamOperator& op, const UlamResult& result) {
  out << "component,bin_midpoint,density\n";
  out.precision(12);
  for (std::size_t c = 0; c < result.densities.size(); ++c) {
    for (int i = 0; i < op.n; ++i) {
      out << c << ',' << op.midpoint(i) << ',' << result.densities[c][i] << '\n';
    }
  }
}

}  // namespace singflow

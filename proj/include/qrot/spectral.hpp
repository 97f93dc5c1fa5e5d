#pragma once

// Spectral pipeline: normalised Laplacians, eigenpairs, eigenmaps,
// principal angles, perplexity, k-means and NMI.

#include "qrot/baselines.hpp"
#include "qrot/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>

namespace qrot {

/// Cluster ids in [0, k).
struct Labels {
  std::vector<int> assignments;
  int k = 0;

  Labels() = default;
  Labels(std::vector<int> a, int num_clusters) : assignments(std::move(a)), k(num_clusters) {
    for (int v : assignments) {
      if (v < 0 || v >= k) throw std::invalid_argument("label outside [0, k)");
    }
  }
  std::size_t size() const { return assignments.size(); }
};

/// Eigenvalues ascending, one orthonormal eigenvector column per value.
struct EigenSystem {
  Vector eigenvalues;
  Matrix eigenvectors;
};

namespace detail {

inline void zero_row_error(const Vector& d) {
  for (Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      throw std::invalid_argument("row " + std::to_string(i) +
                                  " has no positive weight (isolated vertex)");
    }
  }
}

}  // namespace detail

/// D^-1/2 W D^-1/2 with D = diag(W 1).
inline Matrix symmetric_normalize(const Matrix& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("affinity must be square");
  const Vector d = w.rowwise().sum();
  detail::zero_row_error(d);
  const Vector s = d.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * w * s.asDiagonal();
}

inline SparseMatrix symmetric_normalize(const SparseMatrix& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("affinity must be square");
  Vector d = Vector::Zero(w.rows());
  for (Index k = 0; k < w.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(w, k); it; ++it) d[it.row()] += it.value();
  }
  detail::zero_row_error(d);
  const Vector s = d.cwiseSqrt().cwiseInverse();
  SparseMatrix out = w;
  for (Index k = 0; k < out.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(out, k); it; ++it) {
      it.valueRef() *= s[it.row()] * s[it.col()];
    }
  }
  return out;
}

inline Matrix symmetric_normalize(const DenseAffinity& w) { return symmetric_normalize(w.entries()); }
inline SparseMatrix symmetric_normalize(const SparsePlan& p) { return symmetric_normalize(p.to_sparse()); }

/// L = I - Wbar.
inline Matrix laplacian(const Matrix& wbar) {
  return Matrix::Identity(wbar.rows(), wbar.cols()) - wbar;
}

inline SparseMatrix laplacian(const SparseMatrix& wbar) {
  SparseMatrix id(wbar.rows(), wbar.cols());
  id.setIdentity();
  return id - wbar;
}

namespace detail {

template <class Mat>
double max_residual(const Mat& l, const EigenSystem& es) {
  double worst = 0.0;
  for (Index c = 0; c < es.eigenvectors.cols(); ++c) {
    const Vector v = es.eigenvectors.col(c);
    worst = std::max(worst, (l * v - es.eigenvalues[c] * v).norm());
  }
  return worst;
}

// Lanczos with full reorthogonalisation for the largest eigenpairs of
// shift*I - L, i.e. the smallest of L. The Krylov dimension doubles until
// every requested pair meets `tol`.
inline EigenSystem lanczos_smallest(const SparseMatrix& l, Index k, double tol) {
  const Index n = l.rows();
  double shift = 0.0;
  for (Index c = 0; c < l.outerSize(); ++c) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(l, c); it; ++it) s += std::abs(it.value());
    shift = std::max(shift, s);
  }
  Index m = std::min<Index>(n, std::max<Index>(3 * k + 40, 150));
  const Index m_cap = std::min<Index>(n, 4000);
  for (;;) {
    Matrix q(n, m + 1);
    Vector alpha = Vector::Zero(m);
    Vector beta = Vector::Zero(m);
    Vector start(n);
    for (Index i = 0; i < n; ++i) start[i] = 1.0 + 0.5 * std::sin(1.0 + 0.7 * static_cast<double>(i));
    q.col(0) = start.normalized();
    Index steps = m;
    for (Index j = 0; j < m; ++j) {
      Vector w = shift * q.col(j) - l * q.col(j);
      alpha[j] = q.col(j).dot(w);
      for (int pass = 0; pass < 2; ++pass) {
        w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
      }
      const double b = w.norm();
      if (b < 1e-12) {
        steps = j + 1;
        break;
      }
      beta[j] = b;
      q.col(j + 1) = w / b;
    }
    Matrix t = Matrix::Zero(steps, steps);
    for (Index j = 0; j < steps; ++j) {
      t(j, j) = alpha[j];
      if (j + 1 < steps) {
        t(j, j + 1) = beta[j];
        t(j + 1, j) = beta[j];
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> tri(t);
    const Index got = std::min(k, steps);
    EigenSystem es;
    es.eigenvalues.resize(got);
    es.eigenvectors.resize(n, got);
    for (Index c = 0; c < got; ++c) {
      const Index src = steps - 1 - c;  // largest of shift*I - L first
      es.eigenvalues[c] = shift - tri.eigenvalues()[src];
      es.eigenvectors.col(c) = (q.leftCols(steps) * tri.eigenvectors().col(src)).normalized();
    }
    if (got == k && max_residual(l, es) <= tol) return es;
    if (m >= m_cap) {
      std::ostringstream msg;
      msg << "Lanczos did not converge: residual " << max_residual(l, es) << " with Krylov dimension " << m;
      throw std::runtime_error(msg.str());
    }
    m = std::min(m_cap, 2 * m);
  }
}

}  // namespace detail

/// k algebraically smallest eigenpairs of a symmetric matrix (dense
/// tridiagonalisation + QR).
inline EigenSystem eigenpairs_smallest(const Matrix& l, Index k) {
  const Index n = l.rows();
  if (l.cols() != n) throw std::invalid_argument("matrix must be square");
  if (k < 1 || k > n) throw std::invalid_argument("k must lie in [1, n]");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (l + l.transpose()));
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen-decomposition failed");
  EigenSystem es{solver.eigenvalues().head(k), solver.eigenvectors().leftCols(k)};
  const double res = detail::max_residual(l, es);
  if (res > 1e-8 * std::max(1.0, l.cwiseAbs().maxCoeff())) {
    throw std::runtime_error("eigenpair residual " + std::to_string(res) + " above tolerance");
  }
  return es;
}

/// Sparse input: dense path up to n = 2000, Lanczos beyond.
inline EigenSystem eigenpairs_smallest(const SparseMatrix& l, Index k) {
  const Index n = l.rows();
  if (l.cols() != n) throw std::invalid_argument("matrix must be square");
  if (k < 1 || k > n) throw std::invalid_argument("k must lie in [1, n]");
  if (n <= 2000) return eigenpairs_smallest(Matrix(l), k);
  return detail::lanczos_smallest(l, k, 1e-8);
}

/// Columns 2..ell+1 of the eigenvector matrix (the trivial first one dropped).
inline Matrix eigenmap_embed(const EigenSystem& es, Index ell) {
  if (ell < 0) throw std::invalid_argument("ell must be >= 0");
  if (es.eigenvectors.cols() < ell + 1) {
    throw std::invalid_argument("eigen system has " + std::to_string(es.eigenvectors.cols()) +
                                " pairs, embedding needs " + std::to_string(ell + 1));
  }
  return es.eigenvectors.middleCols(1, ell);
}

/// Modified Gram-Schmidt with one reorthogonalisation pass. Throws when a
/// column collapses below `tol` relative to its original norm.
inline Matrix orthonormalize(const Matrix& v, double tol = 1e-10) {
  Matrix q = v;
  for (Index c = 0; c < q.cols(); ++c) {
    const double original = q.col(c).norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Index p = 0; p < c; ++p) q.col(c) -= q.col(p).dot(q.col(c)) * q.col(p);
    }
    const double norm = q.col(c).norm();
    if (!(original > 0.0) || norm <= tol * original) {
      throw std::invalid_argument("basis is rank deficient at column " + std::to_string(c));
    }
    q.col(c) /= norm;
  }
  return q;
}

/// Principal angles in ascending order, arccos of the singular values of V1^T V2.
inline std::vector<double> principal_angles(const Matrix& v1, const Matrix& v2) {
  if (v1.rows() != v2.rows()) throw std::invalid_argument("bases must share the ambient dimension");
  if (v1.cols() == 0 || v2.cols() == 0) throw std::invalid_argument("bases must be nonempty");
  const Matrix q1 = orthonormalize(v1);
  const Matrix q2 = orthonormalize(v2);
  Eigen::JacobiSVD<Matrix> svd(q1.transpose() * q2);
  const Vector s = svd.singularValues();  // descending
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) angles.push_back(std::acos(std::clamp(s[i], 0.0, 1.0)));
  return angles;
}

inline double mean_principal_angle(const Matrix& v1, const Matrix& v2) {
  const auto a = principal_angles(v1, v2);
  return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

/// exp of the Shannon entropy, with 0 log 0 = 0.
inline double perplexity(const Vector& p) {
  if ((p.array() < 0.0).any()) throw std::invalid_argument("probabilities must be nonnegative");
  if (std::abs(p.sum() - 1.0) > 1e-8) throw std::invalid_argument("probabilities must sum to 1");
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return std::exp(h);
}

namespace detail {

inline double row_perplexity(const std::vector<double>& row) {
  double total = 0.0;
  for (double v : row) total += v;
  if (!(total > 0.0)) throw std::invalid_argument("row with zero mass has no perplexity");
  double h = 0.0;
  for (double v : row) {
    if (v > 0.0) {
      const double p = v / total;
      h -= p * std::log(p);
    }
  }
  return std::exp(h);
}

}  // namespace detail

/// Mean over rows of the perplexity of the row-normalised weights.
inline double mean_perplexity(const Matrix& w) {
  const Index n = w.rows();
  if (n == 0) throw std::invalid_argument("empty affinity");
  double acc = 0.0;
  std::vector<double> row(static_cast<std::size_t>(w.cols()));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < w.cols(); ++j) row[static_cast<std::size_t>(j)] = w(i, j);
    acc += detail::row_perplexity(row);
  }
  return acc / static_cast<double>(n);
}

inline double mean_perplexity(const SparsePlan& plan) {
  const Index n = plan.n();
  if (n == 0) throw std::invalid_argument("empty plan");
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
  for (const auto& e : plan.entries()) {
    rows[static_cast<std::size_t>(e.i)].push_back(e.value);
    rows[static_cast<std::size_t>(e.j)].push_back(e.value);
  }
  double acc = 0.0;
  for (const auto& r : rows) acc += detail::row_perplexity(r);
  return acc / static_cast<double>(n);
}

inline double mean_perplexity(const DenseAffinity& w) { return mean_perplexity(w.entries()); }

struct PerplexityTuning {
  double epsilon = 0.0;
  double achieved = 0.0;
  std::vector<std::pair<double, double>> trace;  // (epsilon, mean perplexity)
};

struct PerplexitySearch {
  double tol = 0.1;
  double lower = 1e-3;   // bracket on epsilon
  double upper = 1e3;
  double sinkhorn_tol = 1e-9;
  int sinkhorn_max_iters = 20000;
  int max_steps = 100;
};

/// Bisection on log(eps) for the entropic plan whose mean perplexity hits `target`.
inline PerplexityTuning tune_epsilon_to_perplexity(const CostMatrix& c, double target,
                                                   const PerplexitySearch& search = {}) {
  const double n = static_cast<double>(c.n());
  if (!(target > 1.0 && target < n - 1.0)) throw std::invalid_argument("target must lie in (1, n-1)");
  if (!(search.lower > 0.0 && search.upper > search.lower)) {
    throw std::invalid_argument("bracket must satisfy 0 < lower < upper");
  }
  PerplexityTuning out;
  auto eval = [&](double eps) {
    const auto res = sinkhorn_symmetric_hollow(c, eps, search.sinkhorn_tol, search.sinkhorn_max_iters);
    const double p = mean_perplexity(res.plan);
    out.trace.emplace_back(eps, p);
    return p;
  };
  auto trace_text = [&] {
    std::ostringstream s;
    for (const auto& [e, p] : out.trace) s << " (" << e << ", " << p << ")";
    return s.str();
  };
  double lo = std::log(search.lower);
  double hi = std::log(search.upper);
  double plo = eval(search.lower);
  double phi = eval(search.upper);
  if (!(plo <= target && target <= phi)) {
    throw std::invalid_argument("perplexity bracket does not straddle the target:" + trace_text());
  }
  for (int step = 0; step < search.max_steps; ++step) {
    if (std::abs(plo - target) <= search.tol) return {std::exp(lo), plo, out.trace};
    if (std::abs(phi - target) <= search.tol) return {std::exp(hi), phi, out.trace};
    const double mid = 0.5 * (lo + hi);
    const double pm = eval(std::exp(mid));
    if (pm < plo || pm > phi) {
      throw std::runtime_error("mean perplexity is not monotone in epsilon:" + trace_text());
    }
    if (std::abs(pm - target) <= search.tol) return {std::exp(mid), pm, out.trace};
    if (pm < target) {
      lo = mid;
      plo = pm;
    } else {
      hi = mid;
      phi = pm;
    }
  }
  throw std::runtime_error("perplexity bisection exhausted its steps:" + trace_text());
}

struct KMeansResult {
  Labels labels;
  double inertia = 0.0;
  int best_restart = 0;
};

namespace detail {

inline double sq_dist(const Matrix& x, Index i, const Matrix& centers, Index c) {
  return (x.row(i) - centers.row(c)).squaredNorm();
}

inline KMeansResult kmeans_once(const Matrix& x, int k, std::mt19937_64& rng, int max_iters) {
  const Index n = x.rows();
  Matrix centers(k, x.cols());
  // k-means++ seeding
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = sq_dist(x, i, centers, 0);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double r = u(rng);
      double acc = 0.0;
      pick = -1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        // Rounding pushed r past the running sum; take the last candidate.
        pick = n - 1;
        while (pick > 0 && d2[pick] == 0.0) --pick;
      }
    } else {
      while (pick < n - 1 && chosen[static_cast<std::size_t>(pick)]) ++pick;
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    centers.row(c) = x.row(pick);
    for (Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x, i, centers, c));
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  double inertia = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    double next = 0.0;
    Vector own(n);
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(x, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(x, i, centers, c);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
      own[i] = bd;
      next += bd;
    }
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: re-seed from the point farthest from its centroid.
        Index far = 0;
        own.maxCoeff(&far);
        centers.row(c) = x.row(far);
        own[far] = 0.0;
      }
    }
    const bool settled = std::isfinite(inertia) &&
                         std::abs(inertia - next) <= 1e-8 * std::max(inertia, 1e-300);
    inertia = next;
    if (settled || inertia == 0.0) break;
  }
  // Final assignment against the last centroids.
  double final_inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double bd = sq_dist(x, i, centers, 0);
    for (int c = 1; c < k; ++c) {
      const double d = sq_dist(x, i, centers, c);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    assign[static_cast<std::size_t>(i)] = best;
    final_inertia += bd;
  }
  return {Labels(std::move(assign), k), final_inertia, 0};
}

}  // namespace detail

/// Best-inertia k-means over seeded k-means++ restarts. Ties go to the
/// lowest restart index.
inline KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 10,
                           int max_iters = 300) {
  const Index n = x.rows();
  if (k < 1 || k > n) throw std::invalid_argument("k must lie in [1, n]");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    KMeansResult res = detail::kmeans_once(x, k, rng, max_iters);
    if (res.inertia < best.inertia) {
      best = std::move(res);
      best.best_restart = r;
    }
  }
  return best;
}

/// Mutual information over the arithmetic mean of the two entropies.
/// Both entropies zero gives 1; exactly one zero gives 0.
inline double nmi(const Labels& a, const Labels& b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  if (a.size() == 0) throw std::invalid_argument("labelings are empty");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa;
  std::map<int, double> pb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a.assignments[i], b.assignments[i]}] += 1.0;
    pa[a.assignments[i]] += 1.0;
    pb[b.assignments[i]] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& m) {
    double h = 0.0;
    for (const auto& [_, c] : m) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(pa);
  const double hb = entropy(pb);
  if (ha <= 0.0 && hb <= 0.0) return 1.0;
  if (ha <= 0.0 || hb <= 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pij = c / n;
    mi += pij * std::log(pij / ((pa[key.first] / n) * (pb[key.second] / n)));
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

/// Cluster-indicator columns scaled to unit norm.
inline Matrix template_subspace(const Labels& truth, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const Index n = static_cast<Index>(truth.size());
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (int v : truth.assignments) {
    if (v < 0 || v >= k) throw std::invalid_argument("label outside [0, k)");
    counts[static_cast<std::size_t>(v)] += 1.0;
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0.0) {
      throw std::invalid_argument("cluster " + std::to_string(c) + " is empty");
    }
  }
  Matrix u = Matrix::Zero(n, k);
  for (Index i = 0; i < n; ++i) {
    const int c = truth.assignments[static_cast<std::size_t>(i)];
    u(i, c) = 1.0 / std::sqrt(counts[static_cast<std::size_t>(c)]);
  }
  return u;
}

/// Leading `count` eigenvectors of the symmetric-normalised Laplacian of W.
template <class Affinity>
EigenSystem laplacian_eigenpairs(const Affinity& w, Index count) {
  return eigenpairs_smallest(laplacian(symmetric_normalize(w)), count);
}

/// Spectral clustering: k-means on the k leading Laplacian eigenvectors.
/// The first is the trivial D^1/2 1 direction and is kept, so disconnected
/// components are separated by the null space alone.
template <class Affinity>
KMeansResult spectral_clustering(const Affinity& w, int k, std::uint64_t seed,
                                 bool normalize_rows = false, int restarts = 10) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const EigenSystem es = laplacian_eigenpairs(w, k);
  Matrix x = es.eigenvectors.leftCols(k);
  if (normalize_rows) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double r = x.row(i).norm();
      if (r > 0.0) x.row(i) /= r;
    }
  }
  return kmeans(x, k, seed, restarts);
}

}  // namespace qrot

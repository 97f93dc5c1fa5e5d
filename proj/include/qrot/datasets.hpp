#pragma once

// Seeded point-cloud generators. All randomness comes from std::mt19937_64
// seeded with the caller's seed.

#include "qrot/core.hpp"
#include "qrot/spectral.hpp"

#include <Eigen/QR>

#include <map>
#include <numbers>
#include <optional>
#include <random>

namespace qrot {

struct GeneratorInfo {
  std::string name;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
};

/// Points as rows. `parameter` holds per-point metadata such as the curve
/// parameter t (empty when unused).
struct LabeledCloud {
  Matrix points;
  std::optional<Labels> labels;
  Vector parameter;
  GeneratorInfo info;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  void validate() const {
    if (labels && static_cast<Index>(labels->size()) != points.rows()) {
      throw std::invalid_argument("labels length does not match number of points");
    }
    if (parameter.size() != 0 && parameter.size() != points.rows()) {
      throw std::invalid_argument("parameter length does not match number of points");
    }
  }
};

inline Vector spiral_point(double t) {
  Vector x(3);
  x << std::cos(t) * (0.5 * std::cos(6.0 * t) + 1.0), std::sin(t) * (0.4 * std::cos(6.0 * t) + 1.0),
      0.4 * std::sin(6.0 * t);
  return x;
}

/// Closed spiral with t_i = 2 pi i / N.
inline LabeledCloud spiral(Index n) {
  if (n < 1) throw std::invalid_argument("spiral needs N >= 1");
  LabeledCloud out;
  out.points.resize(n, 3);
  out.parameter.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    out.parameter[i] = t;
    out.points.row(i) = spiral_point(t).transpose();
  }
  out.info = {"spiral", {{"n", static_cast<double>(n)}}, 0};
  return out;
}

/// 0.05 + 0.95 (1 + cos 6 theta) / 2
inline double noise_radius(double theta) { return 0.05 + 0.95 * (1.0 + std::cos(6.0 * theta)) / 2.0; }

/// d x 3 matrix with orthonormal columns from Householder QR of a Gaussian draw.
inline Matrix random_orthonormal_frame(Index d, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < d; ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, cols);
  // fix signs so the frame is a deterministic function of g
  const Matrix r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

/// x_hat_i = R x_i + rho(t_i) Z_i / |Z_i| with R a random d x 3 frame.
/// The cloud's parameter vector supplies theta.
inline LabeledCloud embed_with_noise(const LabeledCloud& cloud, Index d, std::uint64_t seed) {
  if (cloud.dim() != 3) throw std::invalid_argument("embed_with_noise expects a 3-D cloud");
  if (d < 3) throw std::invalid_argument("ambient dimension must be >= 3");
  if (cloud.parameter.size() != cloud.size()) {
    throw std::invalid_argument("cloud carries no per-point parameter for the noise radius");
  }
  std::mt19937_64 rng(seed);
  const Matrix r = random_orthonormal_frame(d, 3, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledCloud out;
  out.points = cloud.points * r.transpose();
  Vector z(d);
  for (Index i = 0; i < cloud.size(); ++i) {
    double norm = 0.0;
    while (!(norm > 0.0)) {
      for (Index k = 0; k < d; ++k) z[k] = normal(rng);
      norm = z.norm();
    }
    out.points.row(i) += (noise_radius(cloud.parameter[i]) / norm) * z.transpose();
  }
  out.labels = cloud.labels;
  out.parameter = cloud.parameter;
  out.info = cloud.info;
  out.info.name += "+noise";
  out.info.params["d"] = static_cast<double>(d);
  out.info.seed = seed;
  return out;
}

/// Clean embedding R x_i with the same frame embed_with_noise draws for `seed`.
inline Matrix embed_clean(const LabeledCloud& cloud, Index d, std::uint64_t seed) {
  if (cloud.dim() != 3) throw std::invalid_argument("embed_clean expects a 3-D cloud");
  if (d < 3) throw std::invalid_argument("ambient dimension must be >= 3");
  std::mt19937_64 rng(seed);
  return cloud.points * random_orthonormal_frame(d, 3, rng).transpose();
}

inline Vector gmm_mean(int component, Index d) {
  static constexpr double angles[3] = {0.0, 2.0 * std::numbers::pi / 3.0, -2.0 * std::numbers::pi / 3.0};
  Vector mu = Vector::Zero(d);
  mu[0] = std::sin(angles[component]);
  mu[1] = std::cos(angles[component]);
  return mu;
}

inline constexpr double gmm_sigma[3] = {0.3, 0.6, 1.0};

/// Three isotropic Gaussians, per_cluster draws each, labels 0, 1, 2 in blocks.
inline LabeledCloud gmm_sample(Index per_cluster, Index d, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("gmm needs d >= 2");
  if (per_cluster < 1) throw std::invalid_argument("per_cluster must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledCloud out;
  out.points.resize(3 * per_cluster, d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(3 * per_cluster));
  for (int c = 0; c < 3; ++c) {
    const Vector mu = gmm_mean(c, d);
    for (Index s = 0; s < per_cluster; ++s) {
      const Index row = c * per_cluster + s;
      for (Index k = 0; k < d; ++k) out.points(row, k) = mu[k] + gmm_sigma[c] * normal(rng);
      labels.push_back(c);
    }
  }
  out.labels = Labels(std::move(labels), 3);
  out.info = {"gmm", {{"per_cluster", static_cast<double>(per_cluster)}, {"d", static_cast<double>(d)}}, seed};
  return out;
}

/// Normalised standard Gaussians in R^{d+1}.
inline LabeledCloud sphere_sample(Index n, int d, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("sphere needs d >= 1");
  if (n < 1) throw std::invalid_argument("sphere needs N >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledCloud out;
  out.points.resize(n, d + 1);
  Vector z(d + 1);
  for (Index i = 0; i < n; ++i) {
    double norm = 0.0;
    while (!(norm > 0.0)) {
      for (Index k = 0; k <= d; ++k) z[k] = normal(rng);
      norm = z.norm();
    }
    out.points.row(i) = (z / norm).transpose();
  }
  out.info = {"sphere", {{"n", static_cast<double>(n)}, {"d", static_cast<double>(d)}}, seed};
  return out;
}

inline Vector torus_point(double u, double v, double major, double minor) {
  Vector x(3);
  const double ring = major + minor * std::cos(v);
  x << ring * std::cos(u), ring * std::sin(u), minor * std::sin(v);
  return x;
}

/// Area-uniform torus: u uniform, v accepted with probability (R + r cos v)/(R + r).
/// info.params["acceptance_rate"] records the observed rate.
inline LabeledCloud torus_sample(Index n, double major, double minor, std::uint64_t seed) {
  if (!(minor > 0.0 && minor < major)) throw std::invalid_argument("torus needs 0 < r < R");
  if (n < 1) throw std::invalid_argument("torus needs N >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabeledCloud out;
  out.points.resize(n, 3);
  std::uint64_t proposals = 0;
  for (Index i = 0; i < n; ++i) {
    const double u = angle(rng);
    double v = 0.0;
    for (;;) {
      ++proposals;
      v = angle(rng);
      if (unit(rng) * (major + minor) <= major + minor * std::cos(v)) break;
    }
    out.points.row(i) = torus_point(u, v, major, minor).transpose();
  }
  out.info = {"torus",
              {{"n", static_cast<double>(n)},
               {"R", major},
               {"r", minor},
               {"acceptance_rate", static_cast<double>(n) / static_cast<double>(proposals)}},
              seed};
  return out;
}

inline LabeledCloud torus_sample(Index n, std::uint64_t seed) { return torus_sample(n, 1.0, 0.5, seed); }

}  // namespace qrot

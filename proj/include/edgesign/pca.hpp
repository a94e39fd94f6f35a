#pragma once

// PCA via a cyclic Jacobi eigensolver on the covariance matrix. Fitting is
// done on training questions only; the projection is then applied to every
// question, including unseen ones.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesign/checkpoint.hpp"
#include "edgesign/wordvec.hpp"

namespace edgesign {

struct EigenResult {
  std::vector<double> values;                // descending
  std::vector<std::vector<double>> vectors;  // vectors[k] pairs values[k]
};

// Cyclic Jacobi rotations on a symmetric matrix (row-major, n x n).
inline EigenResult jacobi_eigen_symmetric(std::vector<double> a,
                                          std::size_t n,
                                          int max_sweeps = 64) {
  if (a.size() != n * n) {
    throw SemanticsError("jacobi: matrix size does not match dimension");
  }
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_diag_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::fabs(a[i]));
  const double tol = scale > 0 ? 1e-12 * scale : 0.0;

  for (int sweep = 0; sweep < max_sweeps && off_diag_norm() > tol * double(n);
       ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::fabs(apq) <= tol) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  EigenResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&a, n](std::size_t x, std::size_t y) {
    return a[x * n + x] > a[y * n + y];
  });
  result.values.reserve(n);
  result.vectors.reserve(n);
  for (std::size_t k : order) {
    result.values.push_back(a[k * n + k]);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = v[i * n + k];
    result.vectors.push_back(std::move(col));
  }
  return result;
}

struct PcaProjection {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> mean;                    // in_dim
  std::vector<std::vector<double>> components; // out_dim rows of in_dim
  std::vector<double> explained_variance;      // out_dim eigenvalues

  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != in_dim) {
      throw SemanticsError("pca: input dimension " + std::to_string(x.size()) +
                           " != " + std::to_string(in_dim));
    }
    std::vector<double> out(out_dim, 0.0);
    for (std::size_t k = 0; k < out_dim; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < in_dim; ++j) {
        acc += components[k][j] * (x[j] - mean[j]);
      }
      out[k] = acc;
    }
    return out;
  }
};

// Centers by the fit-set mean and keeps the top-d covariance eigenvectors.
// When fewer informative directions exist than requested, the remaining
// rows are zero so tiny corpora still produce d-dimensional embeddings.
inline PcaProjection fit_pca(const std::vector<std::vector<double>>& samples,
                             std::size_t out_dim) {
  if (samples.size() < 2) {
    throw SemanticsError("pca: need at least 2 vectors to fit");
  }
  const std::size_t n = samples.size();
  const std::size_t d = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != d) throw SemanticsError("pca: ragged input vectors");
  }
  PcaProjection proj;
  proj.in_dim = d;
  proj.out_dim = out_dim;
  proj.mean.assign(d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) proj.mean[j] += s[j];
  }
  for (double& m : proj.mean) m /= double(n);

  std::vector<double> cov(d * d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = s[i] - proj.mean[i];
      for (std::size_t j = i; j < d; ++j) {
        cov[i * d + j] += di * (s[j] - proj.mean[j]);
      }
    }
  }
  const double inv = 1.0 / double(n - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] *= inv;
      cov[j * d + i] = cov[i * d + j];
    }
  }

  EigenResult eig = jacobi_eigen_symmetric(std::move(cov), d);
  proj.components.assign(out_dim, std::vector<double>(d, 0.0));
  proj.explained_variance.assign(out_dim, 0.0);
  const std::size_t keep = std::min(out_dim, d);
  for (std::size_t k = 0; k < keep; ++k) {
    proj.components[k] = eig.vectors[k];
    proj.explained_variance[k] = eig.values[k];
  }
  return proj;
}

inline void save_pca(const std::string& path, const PcaProjection& proj) {
  std::vector<float> mean(proj.mean.begin(), proj.mean.end());
  std::vector<float> comps;
  comps.reserve(proj.out_dim * proj.in_dim);
  for (const auto& row : proj.components) {
    comps.insert(comps.end(), row.begin(), row.end());
  }
  std::vector<float> var(proj.explained_variance.begin(),
                         proj.explained_variance.end());
  NamedTensors<float> tensors;
  tensors.emplace_back("pca.mean",
                       Tensor<float>::from_vector({proj.in_dim}, std::move(mean)));
  tensors.emplace_back("pca.components",
                       Tensor<float>::from_vector({proj.out_dim, proj.in_dim},
                                                  std::move(comps)));
  tensors.emplace_back("pca.explained_variance",
                       Tensor<float>::from_vector({proj.out_dim}, std::move(var)));
  save_checkpoint(path, tensors);
}

inline PcaProjection load_pca(const std::string& path) {
  auto tensors = load_checkpoint<float>(path);
  const auto& mean = tensors.at("pca.mean");
  const auto& comps = tensors.at("pca.components");
  const auto& var = tensors.at("pca.explained_variance");
  PcaProjection proj;
  proj.in_dim = mean.numel();
  proj.out_dim = comps.rows();
  proj.mean.assign(mean.values().begin(), mean.values().end());
  proj.components.assign(proj.out_dim, std::vector<double>(proj.in_dim, 0.0));
  for (std::size_t k = 0; k < proj.out_dim; ++k) {
    for (std::size_t j = 0; j < proj.in_dim; ++j) {
      proj.components[k][j] = comps.at(k, j);
    }
  }
  proj.explained_variance.assign(var.values().begin(), var.values().end());
  return proj;
}

}  // namespace edgesign

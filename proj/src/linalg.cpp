#include "adfilt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adfilt::linalg {

namespace {
void require_square(const Tensor& a, const char* who) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw ShapeError(std::string(who) + " expects a square matrix, got " + a.shape_str());
  }
}

double off_diag_norm(const Tensor& a) {
  const std::size_t n = a.dim(0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) s += a.at(i, j) * a.at(i, j);
    }
  }
  return std::sqrt(s);
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul shapes do not conform: " + a.shape_str() + " x " + b.shape_str());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c.at(i, j) += av * b.at(p, j);
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + a.shape_str());
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

Tensor matvec(const Tensor& a, const std::vector<double>& x) {
  if (a.rank() != 2 || a.dim(1) != x.size()) {
    throw ShapeError("matvec shapes do not conform");
  }
  Tensor y({a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += a.at(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

EigResult eig_sym(const Tensor& a, double tol, int max_sweeps) {
  require_square(a, "eig_sym");
  const std::size_t n = a.dim(0);
  Tensor d = a;
  // symmetrize against tiny asymmetries from accumulated covariance sums
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (d.at(i, j) + d.at(j, i));
      d.at(i, j) = v;
      d.at(j, i) = v;
    }
  }
  Tensor q = Tensor::identity(n);

  double fro = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) fro += d[i] * d[i];
  fro = std::sqrt(fro);
  const double threshold = std::max(tol * fro, 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diag_norm(d) <= threshold) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q_ = p + 1; q_ < n; ++q_) {
        const double apq = d.at(p, q_);
        if (std::abs(apq) <= threshold / (n * n)) continue;
        const double app = d.at(p, p), aqq = d.at(q_, q_);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // rotate rows/cols p and q_
        for (std::size_t k = 0; k < n; ++k) {
          const double dkp = d.at(k, p), dkq = d.at(k, q_);
          d.at(k, p) = c * dkp - s * dkq;
          d.at(k, q_) = s * dkp + c * dkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double dpk = d.at(p, k), dqk = d.at(q_, k);
          d.at(p, k) = c * dpk - s * dqk;
          d.at(q_, k) = s * dpk + c * dqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double qkp = q.at(k, p), qkq = q.at(k, q_);
          q.at(k, p) = c * qkp - s * qkq;
          q.at(k, q_) = s * qkp + c * qkq;
        }
      }
    }
  }

  EigResult r;
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.values[i] = d.at(i, i);
  // sort ascending, permute eigenvector columns to match
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return r.values[x] < r.values[y]; });
  std::vector<double> sorted(n);
  Tensor vecs({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    sorted[j] = r.values[order[j]];
    for (std::size_t i = 0; i < n; ++i) vecs.at(i, j) = q.at(i, order[j]);
  }
  r.values = std::move(sorted);
  r.vectors = std::move(vecs);
  return r;
}

EigResult eig_sym_generalized(const Tensor& a, const Tensor& b, double ridge) {
  require_square(a, "eig_sym_generalized");
  require_square(b, "eig_sym_generalized");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("eig_sym_generalized matrices differ in size: " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  const std::size_t n = a.dim(0);
  Tensor breg = b;
  for (std::size_t i = 0; i < n; ++i) breg.at(i, i) += ridge;

  EigResult eb = eig_sym(breg);
  const double bmax = std::abs(eb.values.back());
  for (double v : eb.values) {
    if (v <= 0.0 || v <= 1e-14 * bmax) {
      throw NumericError("eig_sym_generalized: B not positive definite (eigenvalue " +
                         std::to_string(v) + ")");
    }
  }
  // whitening transform P = diag(1/sqrt(lambda)) * U^T, so P B P^T = I
  Tensor p({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_sqrt = 1.0 / std::sqrt(eb.values[i]);
    for (std::size_t j = 0; j < n; ++j) p.at(i, j) = inv_sqrt * eb.vectors.at(j, i);
  }
  Tensor s = matmul(matmul(p, a), transpose(p));
  EigResult es = eig_sym(s);
  // map back: v = P^T u solves A v = lambda B v
  EigResult r;
  r.values = es.values;
  r.vectors = matmul(transpose(p), es.vectors);
  return r;
}

}  // namespace adfilt::linalg

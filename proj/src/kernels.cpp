#include "uniadapt/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "uniadapt/common.hpp"

namespace uniadapt::kernels {

namespace {

// Row workers shared by the OpenMP path and the serial reference. Keeping the
// arithmetic in one place is what makes the two paths bitwise identical.

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void dense_forward_row(std::span<const double> x, const Matrix& w,
                              const std::vector<double>& bias, std::span<double> y) {
  for (std::size_t o = 0; o < w.rows(); ++o) y[o] = dot(w.row(o), x) + bias[o];
}

inline void dense_backward_data_row(std::span<const double> g, const Matrix& w,
                                    std::span<double> dx) {
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = 0.0;
  for (std::size_t o = 0; o < w.rows(); ++o) {
    const double go = g[o];
    std::span<const double> wr = w.row(o);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += go * wr[i];
  }
}

// One output neuron: accumulate over the batch in fixed order.
inline void dense_backward_params_row(std::size_t o, const Matrix& g, const Matrix& x,
                                      std::span<double> dw_row, double& db_o) {
  for (std::size_t i = 0; i < dw_row.size(); ++i) dw_row[i] = 0.0;
  db_o = 0.0;
  for (std::size_t b = 0; b < g.rows(); ++b) {
    const double gbo = g(b, o);
    db_o += gbo;
    std::span<const double> xr = x.row(b);
    for (std::size_t i = 0; i < dw_row.size(); ++i) dw_row[i] += gbo * xr[i];
  }
}

inline void tanh_forward_row(std::span<const double> z, std::span<double> a) {
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::tanh(z[i]);
}

inline void tanh_backward_row(std::span<const double> a, std::span<const double> g,
                              std::span<double> dz) {
  for (std::size_t i = 0; i < a.size(); ++i) dz[i] = g[i] * (1.0 - a[i] * a[i]);
}

// Returns the row norm; caller decides whether it is degenerate.
inline double l2_normalize_row(std::span<const double> z, std::span<double> f) {
  double norm = std::sqrt(dot(z, z));
  if (norm >= kDegenerateNorm) {
    const double inv = 1.0 / norm;
    for (std::size_t i = 0; i < z.size(); ++i) f[i] = z[i] * inv;
  }
  return norm;
}

inline void l2_normalize_backward_row(std::span<const double> f, double norm,
                                      std::span<const double> g, std::span<double> dz) {
  const double fg = dot(f, g);
  const double inv = 1.0 / norm;
  for (std::size_t i = 0; i < f.size(); ++i) dz[i] = (g[i] - f[i] * fg) * inv;
}

inline void similarity_row(const Matrix& bank, std::span<const double> q, int self, double tau,
                           std::span<double> out) {
  const std::size_t n = bank.rows();
  const double inv_tau = 1.0 / tau;
  double max_s = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (static_cast<int>(j) == self) continue;
    const double s = dot(bank.row(j), q) * inv_tau;
    out[j] = s;
    if (s > max_s) max_s = s;
  }
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (static_cast<int>(j) == self) continue;
    out[j] = std::exp(out[j] - max_s);
    denom += out[j];
  }
  const double inv_denom = 1.0 / denom;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = (static_cast<int>(j) == self) ? 0.0 : out[j] * inv_denom;
  }
}

void check_degenerate(const std::vector<double>& norms) {
  for (std::size_t b = 0; b < norms.size(); ++b) {
    if (!std::isfinite(norms[b]) || norms[b] < kDegenerateNorm) {
      throw NumericError("degenerate feature: pre-normalization activation of row " +
                         std::to_string(b) + " has norm " + std::to_string(norms[b]));
    }
  }
}

}  // namespace

void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias, Matrix& y) {
  y.resize(x.rows(), w.rows());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) dense_forward_row(x.row(b), w, bias, y.row(b));
}

void dense_backward_data(const Matrix& g, const Matrix& w, Matrix& dx) {
  dx.resize(g.rows(), w.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(g.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) dense_backward_data_row(g.row(b), w, dx.row(b));
}

void dense_backward_params(const Matrix& g, const Matrix& x, Matrix& dw, std::vector<double>& db) {
  dw.resize(g.cols(), x.cols());
  db.resize(g.cols());
  const std::ptrdiff_t outs = static_cast<std::ptrdiff_t>(dw.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < outs; ++o)
    dense_backward_params_row(static_cast<std::size_t>(o), g, x, dw.row(o), db[o]);
}

void tanh_forward(const Matrix& z, Matrix& a) {
  a.resize(z.rows(), z.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(z.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) tanh_forward_row(z.row(b), a.row(b));
}

void tanh_backward(const Matrix& a, const Matrix& g, Matrix& dz) {
  dz.resize(a.rows(), a.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) tanh_backward_row(a.row(b), g.row(b), dz.row(b));
}

void l2_normalize(const Matrix& z, Matrix& f, std::vector<double>& norms) {
  f.resize(z.rows(), z.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(z.rows());
  norms.resize(z.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) norms[b] = l2_normalize_row(z.row(b), f.row(b));
  check_degenerate(norms);
}

void l2_normalize_backward(const Matrix& f, const std::vector<double>& norms, const Matrix& g,
                           Matrix& dz) {
  dz.resize(f.rows(), f.cols());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(f.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b)
    l2_normalize_backward_row(f.row(b), norms[b], g.row(b), dz.row(b));
}

void similarity_rows(const Matrix& bank, const Matrix& queries, std::span<const int> self_indices,
                     double tau, Matrix& out) {
  out.resize(queries.rows(), bank.rows());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b)
    similarity_row(bank, queries.row(b), self_indices[b], tau, out.row(b));
}

namespace reference {

void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias, Matrix& y) {
  y.resize(x.rows(), w.rows());
  for (std::size_t b = 0; b < x.rows(); ++b) dense_forward_row(x.row(b), w, bias, y.row(b));
}

void dense_backward_data(const Matrix& g, const Matrix& w, Matrix& dx) {
  dx.resize(g.rows(), w.cols());
  for (std::size_t b = 0; b < g.rows(); ++b) dense_backward_data_row(g.row(b), w, dx.row(b));
}

void dense_backward_params(const Matrix& g, const Matrix& x, Matrix& dw, std::vector<double>& db) {
  dw.resize(g.cols(), x.cols());
  db.resize(g.cols());
  for (std::size_t o = 0; o < dw.rows(); ++o)
    dense_backward_params_row(o, g, x, dw.row(o), db[o]);
}

void tanh_forward(const Matrix& z, Matrix& a) {
  a.resize(z.rows(), z.cols());
  for (std::size_t b = 0; b < z.rows(); ++b) tanh_forward_row(z.row(b), a.row(b));
}

void tanh_backward(const Matrix& a, const Matrix& g, Matrix& dz) {
  dz.resize(a.rows(), a.cols());
  for (std::size_t b = 0; b < a.rows(); ++b) tanh_backward_row(a.row(b), g.row(b), dz.row(b));
}

void l2_normalize(const Matrix& z, Matrix& f, std::vector<double>& norms) {
  f.resize(z.rows(), z.cols());
  norms.resize(z.rows());
  for (std::size_t b = 0; b < z.rows(); ++b) norms[b] = l2_normalize_row(z.row(b), f.row(b));
  check_degenerate(norms);
}

void l2_normalize_backward(const Matrix& f, const std::vector<double>& norms, const Matrix& g,
                           Matrix& dz) {
  dz.resize(f.rows(), f.cols());
  for (std::size_t b = 0; b < f.rows(); ++b)
    l2_normalize_backward_row(f.row(b), norms[b], g.row(b), dz.row(b));
}

void similarity_rows(const Matrix& bank, const Matrix& queries, std::span<const int> self_indices,
                     double tau, Matrix& out) {
  out.resize(queries.rows(), bank.rows());
  for (std::size_t b = 0; b < queries.rows(); ++b)
    similarity_row(bank, queries.row(b), self_indices[b], tau, out.row(b));
}

}  // namespace reference

}  // namespace uniadapt::kernels

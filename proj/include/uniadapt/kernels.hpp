#ifndef UNIADAPT_KERNELS_HPP
#define UNIADAPT_KERNELS_HPP

#include <span>
#include <vector>

#include "uniadapt/matrix.hpp"

namespace uniadapt::kernels {

// Data-parallel inner loops used by the network and the memory bank.
// The primary versions parallelize over independent output rows with OpenMP;
// every row is computed by the same row worker as the serial reference in
// kernels::reference, so the two paths are bitwise identical for any thread
// count. Each kernel sizes its outputs itself. Reductions that cross rows
// are left to callers, which sum in fixed order.

// y[b] = w * x[b] + bias, with w laid out out_dim x in_dim.
void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias, Matrix& y);

// dx[b] = g[b] * w  (gradient w.r.t. the layer input).
void dense_backward_data(const Matrix& g, const Matrix& w, Matrix& dx);

// dw[o][i] = sum_b g[b][o] * x[b][i]; db[o] = sum_b g[b][o]. Overwrites.
void dense_backward_params(const Matrix& g, const Matrix& x, Matrix& dw, std::vector<double>& db);

void tanh_forward(const Matrix& z, Matrix& a);

// dz = g * (1 - a^2) where a = tanh(z).
void tanh_backward(const Matrix& a, const Matrix& g, Matrix& dz);

// Row-wise f[b] = z[b] / ||z[b]||. Throws NumericError if a row norm falls
// below the degeneracy threshold or is not finite.
void l2_normalize(const Matrix& z, Matrix& f, std::vector<double>& norms);

// Pullback of the row-wise normalization: dz = (g - f * (f . g)) / norm.
void l2_normalize_backward(const Matrix& f, const std::vector<double>& norms, const Matrix& g,
                           Matrix& dz);

// out[b][j] = exp(bank[j] . q[b] / tau) normalized over j != self[b];
// out[b][self[b]] = 0. Stable (max-shifted) exponentials.
void similarity_rows(const Matrix& bank, const Matrix& queries, std::span<const int> self_indices,
                     double tau, Matrix& out);

// Pre-normalization activations with norm below this are treated as
// degenerate features.
inline constexpr double kDegenerateNorm = 1e-12;

namespace reference {
void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias, Matrix& y);
void dense_backward_data(const Matrix& g, const Matrix& w, Matrix& dx);
void dense_backward_params(const Matrix& g, const Matrix& x, Matrix& dw, std::vector<double>& db);
void tanh_forward(const Matrix& z, Matrix& a);
void tanh_backward(const Matrix& a, const Matrix& g, Matrix& dz);
void l2_normalize(const Matrix& z, Matrix& f, std::vector<double>& norms);
void l2_normalize_backward(const Matrix& f, const std::vector<double>& norms, const Matrix& g,
                           Matrix& dz);
void similarity_rows(const Matrix& bank, const Matrix& queries, std::span<const int> self_indices,
                     double tau, Matrix& out);
}  // namespace reference

}  // namespace uniadapt::kernels

#endif

#include "uniadapt/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "uniadapt/common.hpp"
#include "uniadapt/kernels.hpp"

namespace uniadapt::bank {

namespace {

void check_normalized(std::span<const double> row, std::size_t index) {
  double sq = 0.0;
  for (double v : row) sq += v * v;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-6)
    throw ValidationError("memory bank row " + std::to_string(index) +
                          " is not l2-normalized (norm " + std::to_string(std::sqrt(sq)) + ")");
}

}  // namespace

MemoryBank::MemoryBank(std::size_t size, std::size_t dim, double tau)
    : rows_(size, dim), tau_(tau) {
  if (size == 0 || dim == 0) throw ValidationError("memory bank dimensions must be positive");
  if (!(tau > 0.0)) throw ValidationError("memory bank temperature must be positive");
}

void MemoryBank::initialize(const Matrix& features) {
  if (features.rows() != rows_.rows() || features.cols() != rows_.cols())
    throw ValidationError("memory bank init expects " + std::to_string(rows_.rows()) + "x" +
                          std::to_string(rows_.cols()) + " features, got " +
                          std::to_string(features.rows()) + "x" + std::to_string(features.cols()));
  for (std::size_t i = 0; i < features.rows(); ++i) check_normalized(features.row(i), i);
  rows_ = features;
  initialized_ = true;
}

void MemoryBank::update_batch(std::span<const int> indices, const Matrix& features) {
  if (features.rows() != indices.size() || (!indices.empty() && features.cols() != rows_.cols()))
    throw ValidationError("memory bank update shape mismatch");
  std::vector<int> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= static_cast<int>(rows_.rows()))
      throw ValidationError("memory bank index " + std::to_string(sorted[i]) + " out of range");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw ValidationError("duplicate memory bank index " + std::to_string(sorted[i]));
  }
  for (std::size_t b = 0; b < indices.size(); ++b) {
    check_normalized(features.row(b), static_cast<std::size_t>(indices[b]));
    std::copy(features.row(b).begin(), features.row(b).end(),
              rows_.row(static_cast<std::size_t>(indices[b])).begin());
  }
}

std::vector<double> MemoryBank::similarity_row(std::size_t i, std::span<const double> feature) const {
  if (size() < 2) throw ValidationError("similarity needs a bank with at least 2 rows");
  if (i >= size()) throw ValidationError("similarity self-index out of range");
  if (feature.size() != dim()) throw ValidationError("similarity query dimension mismatch");
  Matrix query(1, dim());
  std::copy(feature.begin(), feature.end(), query.row(0).begin());
  const int self = static_cast<int>(i);
  Matrix out(1, size());
  kernels::similarity_rows(rows_, query, std::span<const int>(&self, 1), tau_, out);
  return {out.row(0).begin(), out.row(0).end()};
}

Matrix MemoryBank::similarity_rows(std::span<const int> self_indices, const Matrix& features) const {
  if (size() < 2) throw ValidationError("similarity needs a bank with at least 2 rows");
  if (features.rows() != self_indices.size() || features.cols() != dim())
    throw ValidationError("similarity batch shape mismatch");
  for (int i : self_indices)
    if (i < 0 || i >= static_cast<int>(size()))
      throw ValidationError("similarity self-index out of range");
  Matrix out(features.rows(), size());
  kernels::similarity_rows(rows_, features, self_indices, tau_, out);
  return out;
}

}  // namespace uniadapt::bank

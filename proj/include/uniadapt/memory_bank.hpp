#ifndef UNIADAPT_MEMORY_BANK_HPP
#define UNIADAPT_MEMORY_BANK_HPP

#include <span>
#include <vector>

#include "uniadapt/matrix.hpp"

namespace uniadapt::bank {

// One l2-normalized feature row per target sample, row i owned by sample i
// for the whole epoch. Rows are replaced in place by each mini-batch;
// similarity queries against the bank treat stored rows as constants.
// Single writer (the training loop); concurrent reads are fine between
// mutations.
class MemoryBank {
 public:
  MemoryBank(std::size_t size, std::size_t dim, double tau);

  // Copies all rows in; every row must be normalized. Row count must equal
  // the bank size.
  void initialize(const Matrix& features);

  // Direct replacement of the addressed rows, no momentum. Indices must be
  // distinct and in range.
  void update_batch(std::span<const int> indices, const Matrix& features);

  // Temperature-scaled softmax of bank-row similarities for one query, with
  // the query's own slot excluded (entry i is exactly 0).
  std::vector<double> similarity_row(std::size_t i, std::span<const double> feature) const;

  // Batch form used by the trainer; row b is similarity_row(self[b], f[b]).
  Matrix similarity_rows(std::span<const int> self_indices, const Matrix& features) const;

  const Matrix& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  double tau() const noexcept { return tau_; }
  bool initialized() const noexcept { return initialized_; }

 private:
  Matrix rows_;
  double tau_;
  bool initialized_ = false;
};

}  // namespace uniadapt::bank

#endif

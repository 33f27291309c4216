#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace refinerl {

// Dense row-major matrix of 64-bit reals. All products below accumulate in
// ascending inner-index order, so results are identical for every thread
// count (rows are partitioned, never the reduction dimension).
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
};

// Number of threads matrix products may use internally (1 = serial). Callers
// that already parallelise across runs should leave this at 1.
void set_matmul_threads(int n);
int matmul_threads();

// out = a * b
void matmul(const RealMatrix& a, const RealMatrix& b, RealMatrix& out);
// out = transpose(a) * b
void matmul_at_b(const RealMatrix& a, const RealMatrix& b, RealMatrix& out);
// out = a * transpose(b)
void matmul_a_bt(const RealMatrix& a, const RealMatrix& b, RealMatrix& out);

RealMatrix transposed(const RealMatrix& a);

bool all_finite(std::span<const double> values);

}  // namespace refinerl

#include "refinerl/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refinerl {

namespace {

std::atomic<int> g_threads{1};

void check_shapes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string("matrix shape mismatch in ") + what);
  }
}

// All product kernels accumulate each output element over the shared
// dimension p in ascending order with separate multiply and add, so every
// code path (register tiles, edge rows/columns, the AtB variant, any thread
// count) produces bit-identical results to the textbook triple loop.
constexpr std::size_t kRowTile = 4;
constexpr std::size_t kColTile = 32;

// c[i_begin..i_end) = a * b rows; a is (m x k) row-major, b is (k x n).
void gemm_rows(const double* a, const double* b, double* c, std::size_t i_begin,
               std::size_t i_end, std::size_t k, std::size_t n) {
  if (n == 1) {
    for (std::size_t i = i_begin; i < i_end; ++i) {
      const double* a_row = a + i * k;
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a_row[p] * b[p];
      c[i] = sum;
    }
    return;
  }
  if (k <= 4) {
    for (std::size_t i = i_begin; i < i_end; ++i) {
      double* c_row = c + i * n;
      const double* a_row = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a_row[p];
        const double* b_row = b + p * n;
        for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
      }
    }
    return;
  }
  std::size_t i = i_begin;
  for (; i + kRowTile <= i_end; i += kRowTile) {
    std::size_t j = 0;
    for (; j + kColTile <= n; j += kColTile) {
      double acc[kRowTile][kColTile] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* b_row = b + p * n + j;
        for (std::size_t r = 0; r < kRowTile; ++r) {
          const double av = a[(i + r) * k + p];
          for (std::size_t col = 0; col < kColTile; ++col) {
            acc[r][col] += av * b_row[col];
          }
        }
      }
      for (std::size_t r = 0; r < kRowTile; ++r) {
        std::memcpy(c + (i + r) * n + j, acc[r], kColTile * sizeof(double));
      }
    }
    if (j < n) {
      for (std::size_t p = 0; p < k; ++p) {
        const double* b_row = b + p * n;
        for (std::size_t r = 0; r < kRowTile; ++r) {
          const double av = a[(i + r) * k + p];
          for (std::size_t col = j; col < n; ++col) {
            c[(i + r) * n + col] += av * b_row[col];
          }
        }
      }
    }
  }
  for (; i < i_end; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        c[i * n + j] += av * b_row[j];
      }
    }
  }
}

// c[i_begin..i_end) rows of transpose(a) * b; a is (m x k), b is (m x n),
// c is (k x n). Inner loads from a are contiguous because transposed rows
// are columns of a.
void gemm_at_rows(const double* a, const double* b, double* c, std::size_t i_begin,
                  std::size_t i_end, std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = i_begin;
  for (; i + kRowTile <= i_end; i += kRowTile) {
    std::size_t j = 0;
    for (; j + kColTile <= n; j += kColTile) {
      double acc[kRowTile][kColTile] = {};
      for (std::size_t p = 0; p < m; ++p) {
        const double* b_row = b + p * n + j;
        const double* a_cols = a + p * k + i;
        for (std::size_t r = 0; r < kRowTile; ++r) {
          const double av = a_cols[r];
          for (std::size_t col = 0; col < kColTile; ++col) {
            acc[r][col] += av * b_row[col];
          }
        }
      }
      for (std::size_t r = 0; r < kRowTile; ++r) {
        std::memcpy(c + (i + r) * n + j, acc[r], kColTile * sizeof(double));
      }
    }
    if (j < n) {
      for (std::size_t p = 0; p < m; ++p) {
        const double* b_row = b + p * n;
        const double* a_cols = a + p * k + i;
        for (std::size_t r = 0; r < kRowTile; ++r) {
          const double av = a_cols[r];
          for (std::size_t col = j; col < n; ++col) {
            c[(i + r) * n + col] += av * b_row[col];
          }
        }
      }
    }
  }
  for (; i < i_end; ++i) {
    for (std::size_t p = 0; p < m; ++p) {
      const double av = a[p * k + i];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        c[i * n + j] += av * b_row[j];
      }
    }
  }
}

template <typename RowFn>
void run_rows(std::size_t rows, const RowFn& fn) {
  const int threads = g_threads.load();
#ifdef _OPENMP
  if (threads > 1 && rows >= 2 * kRowTile) {
#pragma omp parallel num_threads(threads)
    {
      const int tid = omp_get_thread_num();
      const int count = omp_get_num_threads();
      const std::size_t tiles = (rows + kRowTile - 1) / kRowTile;
      const std::size_t per = (tiles + count - 1) / count;
      const std::size_t begin = std::min(rows, tid * per * kRowTile);
      const std::size_t end = std::min(rows, (tid + 1) * per * kRowTile);
      if (begin < end) fn(begin, end);
    }
    return;
  }
#else
  (void)threads;
#endif
  fn(0, rows);
}

}  // namespace

void set_matmul_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int matmul_threads() { return g_threads.load(); }

void matmul(const RealMatrix& a, const RealMatrix& b, RealMatrix& out) {
  check_shapes(a.cols, b.rows, "matmul");
  out.rows = a.rows;
  out.cols = b.cols;
  out.data.assign(a.rows * b.cols, 0.0);
  run_rows(a.rows, [&](std::size_t begin, std::size_t end) {
    gemm_rows(a.data.data(), b.data.data(), out.data.data(), begin, end, a.cols, b.cols);
  });
}

void matmul_at_b(const RealMatrix& a, const RealMatrix& b, RealMatrix& out) {
  check_shapes(a.rows, b.rows, "matmul_at_b");
  out.rows = a.cols;
  out.cols = b.cols;
  out.data.assign(a.cols * b.cols, 0.0);
  run_rows(a.cols, [&](std::size_t begin, std::size_t end) {
    gemm_at_rows(a.data.data(), b.data.data(), out.data.data(), begin, end, a.rows, a.cols,
                 b.cols);
  });
}

void matmul_a_bt(const RealMatrix& a, const RealMatrix& b, RealMatrix& out) {
  check_shapes(a.cols, b.cols, "matmul_a_bt");
  const RealMatrix bt = transposed(b);
  out.rows = a.rows;
  out.cols = bt.cols;
  out.data.assign(a.rows * bt.cols, 0.0);
  run_rows(a.rows, [&](std::size_t begin, std::size_t end) {
    gemm_rows(a.data.data(), bt.data.data(), out.data.data(), begin, end, a.cols, bt.cols);
  });
}

RealMatrix transposed(const RealMatrix& a) {
  RealMatrix t(a.cols, a.rows);
  constexpr std::size_t kBlock = 32;
  for (std::size_t ib = 0; ib < a.rows; ib += kBlock) {
    const std::size_t i_end = std::min(a.rows, ib + kBlock);
    for (std::size_t jb = 0; jb < a.cols; jb += kBlock) {
      const std::size_t j_end = std::min(a.cols, jb + kBlock);
      for (std::size_t i = ib; i < i_end; ++i) {
        const double* row = a.row(i);
        for (std::size_t j = jb; j < j_end; ++j) {
          t.data[j * a.rows + i] = row[j];
        }
      }
    }
  }
  return t;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace refinerl

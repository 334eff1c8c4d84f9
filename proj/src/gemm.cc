/*
 * Copyright 2026 The Brushwork Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "gemm.h"

#include <algorithm>

namespace brushwork::internal {

namespace {

constexpr std::size_t kColumnTile = 256;

void row_block4(std::size_t n, std::size_t k, const float* __restrict a0,
                const float* __restrict a1, const float* __restrict a2,
                const float* __restrict a3, const float* __restrict b,
                std::size_t ldb, float* __restrict c0, float* __restrict c1,
                float* __restrict c2, float* __restrict c3) {
  for (std::size_t p = 0; p < k; ++p) {
    const float* __restrict brow = b + p * ldb;
    const float x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
    for (std::size_t j = 0; j < n; ++j) {
      const float bj = brow[j];
      c0[j] += x0 * bj;
      c1[j] += x1 * bj;
      c2[j] += x2 * bj;
      c3[j] += x3 * bj;
    }
  }
}

void row_block1(std::size_t n, std::size_t k, const float* __restrict a0,
                const float* __restrict b, std::size_t ldb,
                float* __restrict c0) {
  for (std::size_t p = 0; p < k; ++p) {
    const float* __restrict brow = b + p * ldb;
    const float x0 = a0[p];
    for (std::size_t j = 0; j < n; ++j) c0[j] += x0 * brow[j];
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             std::size_t lda, const float* b, std::size_t ldb, float* c,
             std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0f);
  }
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnTile) {
    const std::size_t nb = std::min(kColumnTile, n - j0);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      row_block4(nb, k, a + i * lda, a + (i + 1) * lda, a + (i + 2) * lda,
                 a + (i + 3) * lda, b + j0, ldb, c + i * ldc + j0,
                 c + (i + 1) * ldc + j0, c + (i + 2) * ldc + j0,
                 c + (i + 3) * ldc + j0);
    }
    for (; i < m; ++i) {
      row_block1(nb, k, a + i * lda, b + j0, ldb, c + i * ldc + j0);
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const float* src,
               float* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile);
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t cc = c0; cc < c1; ++cc) dst[cc * rows + r] = src[r * cols + cc];
      }
    }
  }
}

}  // namespace brushwork::internal

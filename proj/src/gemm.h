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

// Row-major single precision matrix products used by the conv and dense
// kernels. Each output element is accumulated over the inner dimension in
// ascending order, so results do not depend on blocking or threading.

#ifndef BRUSHWORK_SRC_GEMM_H_
#define BRUSHWORK_SRC_GEMM_H_

#include <cstddef>
#include <vector>

namespace brushwork::internal {

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             std::size_t lda, const float* b, std::size_t ldb, float* c,
             std::size_t ldc, bool accumulate);

// Writes the [cols, rows] transpose of a row-major [rows, cols] matrix.
void transpose(std::size_t rows, std::size_t cols, const float* src,
               float* dst);

}  // namespace brushwork::internal

#endif  // BRUSHWORK_SRC_GEMM_H_

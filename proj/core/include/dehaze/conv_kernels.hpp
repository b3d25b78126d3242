#pragma once

#include <cstdint>
#include <vector>

namespace dehaze::ad {

// Low-level kernels behind conv2d. All loops have a fixed iteration order,
// and the OpenMP splits assign whole output rows to one thread each, so
// results are bit-identical no matter the thread count.

// cols[(c*kh+ki)*kw+kj][gy*gw+gx] = in[c][gy*stride-pad+ki][gx*stride-pad+kj]
// (zero where the tap falls outside the image). The grid (gh, gw) is the
// set of kernel placements, i.e. the conv output size.
template <typename T>
void im2col(const T* in, int channels, int height, int width, int kh, int kw,
            int stride, int pad, int gh, int gw, T* cols) {
  const std::int64_t grid = static_cast<std::int64_t>(gh) * gw;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = cols + ((static_cast<std::int64_t>(c) * kh + ki) * kw + kj) * grid;
        for (int gy = 0; gy < gh; ++gy) {
          const int y = gy * stride - pad + ki;
          if (y < 0 || y >= height) {
            for (int gx = 0; gx < gw; ++gx) row[gy * gw + gx] = T(0);
            continue;
          }
          const T* src = in + (static_cast<std::int64_t>(c) * height + y) * width;
          for (int gx = 0; gx < gw; ++gx) {
            const int x = gx * stride - pad + kj;
            row[gy * gw + gx] = (x >= 0 && x < width) ? src[x] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds cols back onto the image.
template <typename T>
void col2im(const T* cols, int channels, int height, int width, int kh, int kw,
            int stride, int pad, int gh, int gw, T* out) {
  const std::int64_t grid = static_cast<std::int64_t>(gh) * gw;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row = cols + ((static_cast<std::int64_t>(c) * kh + ki) * kw + kj) * grid;
        for (int gy = 0; gy < gh; ++gy) {
          const int y = gy * stride - pad + ki;
          if (y < 0 || y >= height) continue;
          T* dst = out + (static_cast<std::int64_t>(c) * height + y) * width;
          for (int gx = 0; gx < gw; ++gx) {
            const int x = gx * stride - pad + kj;
            if (x >= 0 && x < width) dst[x] += row[gy * gw + gx];
          }
        }
      }
    }
  }
}

// C[M,N] += A[M,K] * B[K,N], all row-major.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::int64_t>(i) * k + p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A^T[M,K] * B[K,N] where A is stored [K,M].
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::int64_t>(p) * m + i];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B^T[K,N] where B is stored [N,K].
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::int64_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

}  // namespace dehaze::ad

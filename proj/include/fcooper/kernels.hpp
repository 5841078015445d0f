#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fcooper::kernels {

// Dense tensor stored [c][d][h][w], row-major in w.
struct Tensor4 {
  int c = 0, d = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int c_, int d_, int h_, int w_)
      : c(c_), d(d_), h(h_), w(w_),
        data(static_cast<size_t>(c_) * d_ * h_ * w_, 0.f) {}

  size_t idx(int ci, int di, int hi, int wi) const {
    return ((static_cast<size_t>(ci) * d + di) * h + hi) * w + wi;
  }
  float& at(int ci, int di, int hi, int wi) { return data[idx(ci, di, hi, wi)]; }
  float at(int ci, int di, int hi, int wi) const { return data[idx(ci, di, hi, wi)]; }
  size_t size() const { return data.size(); }
};

// 3x3x3 convolution. Stride and padding apply to the depth axis only;
// height and width always run stride 1, pad 1, so H and W are preserved.
struct Conv3DSpec {
  int in_c = 0, out_c = 0;
  int stride_d = 1;
  int pad_d = 0;
  bool relu = true;

  int out_depth(int in_d) const { return (in_d + 2 * pad_d - 3) / stride_d + 1; }
};

inline constexpr int kKernel = 3;

// OpenMP direct convolution. Skips all-zero input planes and restricts
// work to the populated H/W bounding box, so cost tracks the occupied
// region of a sparse scatter rather than the full canvas. Per-cell
// accumulation order is fixed, making results independent of the thread
// count.
// weights layout [oc][ic][kd][kh][kw], bias [oc].
void conv3d(const Tensor4& in, std::span<const float> weights,
            std::span<const float> bias, const Conv3DSpec& spec, Tensor4& out);

// element-wise max, a and b same length
void maxout(std::span<const float> a, std::span<const float> b, std::span<float> out);

namespace ref {

// Plain serial loops over every output cell and every tap; the test
// oracle for the OpenMP kernels above.
void conv3d(const Tensor4& in, std::span<const float> weights,
            std::span<const float> bias, const Conv3DSpec& spec, Tensor4& out);

void maxout(std::span<const float> a, std::span<const float> b, std::span<float> out);

}  // namespace ref

}  // namespace fcooper::kernels

#include "fcooper/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace fcooper::kernels {

namespace {

struct Support {
  std::vector<uint8_t> plane_nonzero;  // [ic * in_d + id]
  int h0 = 0, h1 = -1, w0 = 0, w1 = -1;
  int d0 = 0, d1 = -1;
  bool empty = true;
};

Support scan_support(const Tensor4& in) {
  Support s;
  s.plane_nonzero.assign(static_cast<size_t>(in.c) * in.d, 0);
  s.h0 = in.h;
  s.w0 = in.w;
  s.d0 = in.d;

#pragma omp parallel
  {
    int lh0 = in.h, lh1 = -1, lw0 = in.w, lw1 = -1, ld0 = in.d, ld1 = -1;
#pragma omp for schedule(static) collapse(2)
    for (int ci = 0; ci < in.c; ++ci) {
      for (int di = 0; di < in.d; ++di) {
        const float* plane = &in.data[in.idx(ci, di, 0, 0)];
        bool nonzero = false;
        for (int hi = 0; hi < in.h; ++hi) {
          const float* row = plane + static_cast<size_t>(hi) * in.w;
          int first = -1, last = -1;
          for (int wi = 0; wi < in.w; ++wi) {
            if (row[wi] != 0.f) {
              if (first < 0) first = wi;
              last = wi;
            }
          }
          if (first >= 0) {
            nonzero = true;
            lh0 = std::min(lh0, hi);
            lh1 = std::max(lh1, hi);
            lw0 = std::min(lw0, first);
            lw1 = std::max(lw1, last);
          }
        }
        if (nonzero) {
          s.plane_nonzero[static_cast<size_t>(ci) * in.d + di] = 1;
          ld0 = std::min(ld0, di);
          ld1 = std::max(ld1, di);
        }
      }
    }
#pragma omp critical
    {
      s.h0 = std::min(s.h0, lh0);
      s.h1 = std::max(s.h1, lh1);
      s.w0 = std::min(s.w0, lw0);
      s.w1 = std::max(s.w1, lw1);
      s.d0 = std::min(s.d0, ld0);
      s.d1 = std::max(s.d1, ld1);
    }
  }
  s.empty = s.h1 < s.h0;
  return s;
}

inline float activate(float v, bool relu) { return relu && v < 0.f ? 0.f : v; }

}  // namespace

void conv3d(const Tensor4& in, std::span<const float> weights,
            std::span<const float> bias, const Conv3DSpec& spec, Tensor4& out) {
  if (in.c != spec.in_c) throw std::invalid_argument("conv3d: channel mismatch");
  const size_t want = static_cast<size_t>(spec.out_c) * spec.in_c * 27;
  if (weights.size() != want || bias.size() != static_cast<size_t>(spec.out_c))
    throw std::invalid_argument("conv3d: weight/bias size mismatch");
  const int od = spec.out_depth(in.d);
  if (od < 1) throw std::invalid_argument("conv3d: depth too small for plan");

  const int H = in.h, W = in.w;
  out = Tensor4(spec.out_c, od, H, W);

  const Support sup = scan_support(in);

  // cells untouched by any input support are act(bias)
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < spec.out_c; ++oc) {
    const float fill = activate(bias[oc], spec.relu);
    if (fill != 0.f) {
      float* base = &out.data[out.idx(oc, 0, 0, 0)];
      std::fill(base, base + static_cast<size_t>(od) * H * W, fill);
    }
  }
  if (sup.empty) return;

  const int oh0 = std::max(0, sup.h0 - 1);
  const int oh1 = std::min(H - 1, sup.h1 + 1);
  const int ow0 = std::max(0, sup.w0 - 1);
  const int ow1 = std::min(W - 1, sup.w1 + 1);

  // output depths whose kernel window reaches the populated depth range
  std::vector<int> depths;
  for (int odi = 0; odi < od; ++odi) {
    const int lo = odi * spec.stride_d - spec.pad_d;
    if (lo + 2 >= sup.d0 && lo <= sup.d1) depths.push_back(odi);
  }

  const int n_out = spec.out_c * static_cast<int>(depths.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int job = 0; job < n_out; ++job) {
    const int oc = job / static_cast<int>(depths.size());
    const int odi = depths[job % depths.size()];
    const float b = bias[oc];
    for (int ohi = oh0; ohi <= oh1; ++ohi) {
      float* orow = &out.data[out.idx(oc, odi, ohi, 0)];
      for (int wi = ow0; wi <= ow1; ++wi) orow[wi] = b;
      for (int ic = 0; ic < spec.in_c; ++ic) {
        for (int kd = 0; kd < 3; ++kd) {
          const int id = odi * spec.stride_d - spec.pad_d + kd;
          if (id < 0 || id >= in.d) continue;
          if (!sup.plane_nonzero[static_cast<size_t>(ic) * in.d + id]) continue;
          for (int kh = 0; kh < 3; ++kh) {
            const int ih = ohi - 1 + kh;
            if (ih < 0 || ih >= H) continue;
            const float* irow = &in.data[in.idx(ic, id, ih, 0)];
            const float* wk =
                weights.data() +
                ((static_cast<size_t>(oc) * spec.in_c + ic) * 3 + kd) * 9 +
                static_cast<size_t>(kh) * 3;
            for (int kw = 0; kw < 3; ++kw) {
              const float wv = wk[kw];
              if (wv == 0.f) continue;
              const int shift = kw - 1;
              const int lo = std::max(ow0, -shift);
              const int hi = std::min(ow1, W - 1 - shift);
              const float* ip = irow + shift;
              for (int wi = lo; wi <= hi; ++wi) orow[wi] += wv * ip[wi];
            }
          }
        }
      }
      if (spec.relu) {
        for (int wi = ow0; wi <= ow1; ++wi)
          orow[wi] = orow[wi] > 0.f ? orow[wi] : 0.f;
      }
    }
  }
}

void maxout(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  if (a.size() != b.size() || a.size() != out.size())
    throw std::invalid_argument("maxout: length mismatch");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

}  // namespace fcooper::kernels

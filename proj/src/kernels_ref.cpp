#include "fcooper/kernels.hpp"

#include <stdexcept>

namespace fcooper::kernels::ref {

void conv3d(const Tensor4& in, std::span<const float> weights,
            std::span<const float> bias, const Conv3DSpec& spec, Tensor4& out) {
  if (in.c != spec.in_c) throw std::invalid_argument("conv3d: channel mismatch");
  const size_t want = static_cast<size_t>(spec.out_c) * spec.in_c * 27;
  if (weights.size() != want || bias.size() != static_cast<size_t>(spec.out_c))
    throw std::invalid_argument("conv3d: weight/bias size mismatch");
  const int od = spec.out_depth(in.d);
  if (od < 1) throw std::invalid_argument("conv3d: depth too small for plan");

  out = Tensor4(spec.out_c, od, in.h, in.w);
  for (int oc = 0; oc < spec.out_c; ++oc) {
    for (int odi = 0; odi < od; ++odi) {
      for (int ohi = 0; ohi < in.h; ++ohi) {
        for (int owi = 0; owi < in.w; ++owi) {
          float acc = bias[oc];
          for (int ic = 0; ic < spec.in_c; ++ic) {
            for (int kd = 0; kd < 3; ++kd) {
              const int id = odi * spec.stride_d - spec.pad_d + kd;
              if (id < 0 || id >= in.d) continue;
              for (int kh = 0; kh < 3; ++kh) {
                const int ih = ohi - 1 + kh;
                if (ih < 0 || ih >= in.h) continue;
                for (int kw = 0; kw < 3; ++kw) {
                  const int iw = owi - 1 + kw;
                  if (iw < 0 || iw >= in.w) continue;
                  const float wv =
                      weights[((static_cast<size_t>(oc) * spec.in_c + ic) * 3 + kd) * 9 +
                              static_cast<size_t>(kh) * 3 + kw];
                  acc += wv * in.at(ic, id, ih, iw);
                }
              }
            }
          }
          out.at(oc, odi, ohi, owi) = spec.relu && acc < 0.f ? 0.f : acc;
        }
      }
    }
  }
}

void maxout(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  if (a.size() != b.size() || a.size() != out.size())
    throw std::invalid_argument("maxout: length mismatch");
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

}  // namespace fcooper::kernels::ref

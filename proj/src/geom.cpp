#include "fcooper/geom.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace fcooper::geom {

double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  return w - kPi;
}

RigidTransform2p5D relative_transform(const Pose& receiver, const Pose& sender) {
  RigidTransform2p5D t;
  t.rotation = wrap_angle(sender.yaw - receiver.yaw);
  // receiver-frame offset of the sender origin
  const double ox = sender.x - receiver.x;
  const double oy = sender.y - receiver.y;
  const double c = std::cos(receiver.yaw);
  const double s = std::sin(receiver.yaw);
  t.dx = c * ox + s * oy;
  t.dy = -s * ox + c * oy;
  t.dz = sender.z - receiver.z;
  return t;
}

RigidTransform2p5D inverse(const RigidTransform2p5D& t) {
  RigidTransform2p5D inv;
  inv.rotation = -t.rotation;
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  inv.dx = -(c * t.dx + s * t.dy);
  inv.dy = -(-s * t.dx + c * t.dy);
  inv.dz = -t.dz;
  return inv;
}

Point3 apply_transform(const RigidTransform2p5D& t, const Point3& p) {
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  return {c * p.x - s * p.y + t.dx, s * p.x + c * p.y + t.dy, p.z + t.dz};
}

double box_volume(const Box3D& b) { return b.l * b.w * b.h; }

namespace {

struct P2 {
  double x, y;
};

std::array<P2, 4> bev_corners(const Box3D& b) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  std::array<P2, 4> out;
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  for (int i = 0; i < 4; ++i) {
    out[i] = {b.cx + c * lx[i] - s * ly[i], b.cy + s * lx[i] + c * ly[i]};
  }
  return out;  // CCW
}

double polygon_area(const std::vector<P2>& poly) {
  double a = 0.0;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const P2& p = poly[i];
    const P2& q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(a);
}

// Sutherland-Hodgman clip of `poly` against the half-plane left of a->b
std::vector<P2> clip_edge(const std::vector<P2>& poly, const P2& a, const P2& b) {
  std::vector<P2> out;
  out.reserve(poly.size() + 1);
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  auto side = [&](const P2& p) { return ex * (p.y - a.y) - ey * (p.x - a.x); };
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const P2& cur = poly[i];
    const P2& nxt = poly[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    if (sc >= -1e-12) out.push_back(cur);
    if ((sc > 1e-12 && sn < -1e-12) || (sc < -1e-12 && sn > 1e-12)) {
      const double t = sc / (sc - sn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<P2> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
  }
  if (poly.size() < 3) return 0.0;
  return polygon_area(poly);
}

}  // namespace

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  const double uni = a.l * a.w + b.l * b.w - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double za0 = a.cz - 0.5 * a.h, za1 = a.cz + 0.5 * a.h;
  const double zb0 = b.cz - 0.5 * b.h, zb1 = b.cz + 0.5 * b.h;
  const double dz = std::min(za1, zb1) - std::max(za0, zb0);
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  const double uni = box_volume(a) + box_volume(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace fcooper::geom

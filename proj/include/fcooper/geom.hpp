#pragma once

#include <cmath>

namespace fcooper::geom {

inline constexpr double kPi = 3.14159265358979323846;

// normalize an angle to [-pi, pi)
double wrap_angle(double a);

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Vehicle pose from GPS/IMU: east/north/up position plus heading
// (CCW from +x). yaw is expected normalized to [-pi, pi).
struct Pose {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;

  Pose normalized() const { return {x, y, z, wrap_angle(yaw)}; }
  bool operator==(const Pose&) const = default;
};

// Planar rigid transform with a vertical offset: rotate (x, y) by
// `rotation`, then translate. Ground-vehicle alignment never needs
// roll/pitch here.
struct RigidTransform2p5D {
  double rotation = 0.0;  // radians
  double dx = 0.0, dy = 0.0, dz = 0.0;
};

// Transform mapping sender-frame coordinates into the receiver frame,
// built from the two GPS/IMU poses.
RigidTransform2p5D relative_transform(const Pose& receiver, const Pose& sender);

RigidTransform2p5D inverse(const RigidTransform2p5D& t);

Point3 apply_transform(const RigidTransform2p5D& t, const Point3& p);

// Oriented 3D box: center, extents (l along local x, w along local y,
// h along z), yaw. Extents must be positive.
struct Box3D {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double l = 1.0, w = 1.0, h = 1.0;
  double yaw = 0.0;

  bool operator==(const Box3D&) const = default;
};

double box_volume(const Box3D& b);

// Intersection-over-union of the boxes' bird's-eye-view rectangles
// (rotated overlap via convex polygon clipping).
double iou_bev(const Box3D& a, const Box3D& b);

// Volume IoU: BEV polygon intersection times vertical interval overlap.
// Disjoint boxes give 0; identical boxes give 1.
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace fcooper::geom

#pragma once

#include "crossloc/image.hpp"

namespace crossloc {

// Planar pose offset. x runs along columns (rightward), y along rows
// (downward); theta in degrees, normalised to (-180, 180]. Positive theta
// rotates content from the +x axis towards the +y axis, i.e. the rotation
// matrix is the standard [[c,-s],[s,c]] in (col,row) coordinates.
struct Pose2 {
    double x = 0.0;      // pixels
    double y = 0.0;      // pixels
    double theta = 0.0;  // degrees

    Pose2() = default;
    Pose2(double px, double py, double th);
};

double normalize_deg(double deg);
Pose2 compose(const Pose2& p, const Pose2& q);
Pose2 inverse(const Pose2& p);

enum class Interp { nearest, bilinear };

// Rotation about the image centre followed by a content shift of
// (dx, dy) pixels; samples outside the input are zero.
struct WarpSpec {
    double theta = 0.0;  // degrees
    double dx = 0.0;
    double dy = 0.0;
    Interp interp = Interp::bilinear;
};

ImagePatch warp(const ImagePatch& img, const WarpSpec& spec);

// Convenience wrappers.
ImagePatch rotate(const ImagePatch& img, double theta_deg,
                  Interp interp = Interp::bilinear);
ImagePatch shift(const ImagePatch& img, double dx, double dy,
                 Interp interp = Interp::bilinear);

// Circular (wrap-around) integer shift, exact.
ImagePatch circular_shift(const ImagePatch& img, int dx, int dy);

double px_to_m(double v_px, double res_m_per_px);
double m_to_px(double v_m, double res_m_per_px);

}  // namespace crossloc

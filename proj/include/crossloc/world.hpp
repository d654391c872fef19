#pragma once

#include <array>
#include <random>
#include <vector>

#include "crossloc/image.hpp"

namespace crossloc {

// Procedural 2D world: axis-aligned reflective blocks plus point
// scatterers, deterministic from the seed. World coordinates follow the
// image convention (x rightward, y downward), origin at the centre.
struct WorldSpec {
    unsigned seed = 7;
    double extent_m = 240.0;
    int n_rects = 90;
    int n_scatter = 700;
    // the trajectory annulus is kept free of blocks so the sensor never
    // starts inside one; the band stays narrow so structure remains in view
    double keepout_radius_m = 60.0;
    double keepout_band_m = 2.5;
};

struct WorldRect {
    double cx, cy, hw, hh;  // centre and half-extent, metres
    double angle_deg;       // block orientation about its centre
    double reflect;
};

struct WorldScatterer {
    double x, y;
    double reflect;
};

class World {
public:
    static World build(const WorldSpec& spec);

    const WorldSpec& spec() const { return spec_; }
    const std::vector<WorldRect>& rects() const { return rects_; }
    const std::vector<WorldScatterer>& scatterers() const { return scats_; }

private:
    WorldSpec spec_;
    std::vector<WorldRect> rects_;
    std::vector<WorldScatterer> scats_;
};

struct SensorModel {
    enum class Kind { lidar, radar };
    Kind kind = Kind::lidar;
    double max_range_m = 24.0;
    int azimuths = 720;
    double noise_sigma_m = 0.04;  // range jitter per return
    double dropout_prob = 0.02;   // per-return dropout
    double attenuation = 0.5;     // radar: amplitude factor per prior hit
};

// Top-down raster centred at (cx, cy). The query centre is snapped to the
// pixel lattice, so centres an integer number of pixels apart sample
// identical world points and the overlap is bit-exact.
ImagePatch render_overhead(const World& world, double cx_m, double cy_m,
                           double resolution, int size);

// Ray-cast range image: sensor at the patch centre, heading-up. Lidar
// keeps the first hit per azimuth; radar keeps all hits, attenuated by the
// number of structures already passed. noise_seed = 0 disables noise.
ImagePatch render_range(const World& world, double x_m, double y_m,
                        double heading_deg, const SensorModel& sensor,
                        double resolution, int size, unsigned noise_seed = 0);

// Orthographic projection of a 3D point cloud: drops points below the
// ground plane (z < 0), presence binning, sensor at the patch centre.
ImagePatch pointcloud_to_image(const std::vector<std::array<double, 3>>& points,
                               double resolution, int size);

}  // namespace crossloc

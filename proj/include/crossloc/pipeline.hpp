#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crossloc/config.hpp"
#include "crossloc/embed.hpp"
#include "crossloc/manifest.hpp"

namespace crossloc {

// Every trained network plus the config that shaped them.
struct PipelineModels {
    nn::RotSelector<float> f_r;
    nn::GeneratorBundle<float> gen;
    nn::UNet<float> h_b, h_bt;
    RunConfig cfg;
};

// Freshly initialised models sized for cfg (patch size fixes the U-Net depth).
PipelineModels make_models(const RunConfig& cfg);

struct LocalisationResult {
    double theta_hat = 0.0;           // degrees, absolute heading
    double ax_px = 0.0, ay_px = 0.0;  // solved translation, pixels
    double ax_m = 0.0, ay_m = 0.0;
    double d_intro = 0.0;
    bool low_confidence = false;      // d_intro above threshold
    bool used_fallback = false;       // tracker only
    double t_rotation_ms = 0.0, t_generation_ms = 0.0;
    double t_embedding_ms = 0.0, t_introspect_ms = 0.0;
};

// Rotation-stage input pair. When present, the rotation stack is built and
// scored on these wide-field images instead of (A, B); the solved angle is
// applied to the full-resolution live image either way.
struct RotationView {
    ImagePatch map;
    ImagePatch live;
};

// Dataflow: rotation stack -> generation -> embedding correlation, then the
// introspection self-check. A is the map patch queried at the coarse
// estimate; theta0 the coarse heading.
LocalisationResult localise_frame(const PipelineModels& m, const ImagePatch& A,
                                  const ImagePatch& B, double theta0,
                                  const RotationView* rot_view = nullptr);

// Shift the map by delta, re-solve the known shift through the generation
// and embedding stages, and return ||delta - delta_hat||_2.
double introspect(const PipelineModels& m, const ImagePatch& A,
                  const ImagePatch& b_theta, const ImagePatch& bt_alpha,
                  double dx, double dy);

// Quadrant augmentation for offsets beyond the trained budget: the live
// image is additionally tried shifted into each quadrant, candidates are
// scored by re-solving a known map re-query shift, and the winner's
// compensated solution is returned. requery(sx, sy) as in CrossSample.
LocalisationResult localise_large_offset(
    const PipelineModels& m, const ImagePatch& A, const ImagePatch& B,
    double theta0, const std::function<ImagePatch(int, int)>& requery,
    const RotationView* rot_view = nullptr);

// Raw-image phase correlation between consecutive live frames; returns the
// content shift carrying prev onto cur. No learned modules.
std::pair<double, double> naive_odometry(const ImagePatch& b_prev,
                                         const ImagePatch& b_cur);

struct TrackPoint {
    int frame_id = 0;
    double x_px = 0.0, y_px = 0.0;  // estimated position, world pixel lattice
    double theta_deg = 0.0;
    double x_m = 0.0, y_m = 0.0;
    double d_intro = 0.0;
    bool used_fallback = false;
    bool track_lost = false;
};

// Online tracker over a frame sequence: frame k is initialised from the
// solved pose of frame k-1; introspection failures fall back to
// dead-reckoned odometry with the heading frozen. Map patches come from
// margin-tile re-query around the current estimate.
std::vector<TrackPoint> track(const PipelineModels& m, const Dataset& data,
                              const std::vector<int>& frames,
                              const std::string& csv_path = "");

}  // namespace crossloc

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crossloc/geometry.hpp"
#include "crossloc/models.hpp"

namespace crossloc {

struct RotationStack {
    ImagePatch base;
    std::vector<double> angles;       // degrees, strictly increasing
    std::vector<ImagePatch> copies;   // copies[i] = warp(base, angles[i], 0)
};

// Angles theta0 + k*step for k = -K..K, K = ceil(half_range / step).
RotationStack build_stack(const ImagePatch& base, double theta0,
                          double half_range, double step);

// Hard arg-softmax by default; ties broken toward the smallest
// |angle - theta0|. soft = expectation of the angle under the weights.
double estimate_theta(const std::vector<double>& weights,
                      const std::vector<double>& angles, double theta0,
                      bool soft = false);

// (map patch, live image) pair with the coarse heading estimate; no ground
// truth enters the training loop.
struct RotSample {
    ImagePatch map;
    ImagePatch live;
    double theta0 = 0.0;
};

struct RotTrainOptions {
    double lr = 2e-4;
    int max_epochs = 20;
    int patience = 5;
    unsigned seed = 1;
    double half_range = 22.5;
    double step = 2.0;
    std::string csv_path;         // epoch, train_loss, val_loss
    std::string checkpoint_path;  // written on completion and on NaN abort
    bool single_pass = false;     // ablation: L1 of the pass-1 output vs the map
    int max_train_per_epoch = 0;  // 0 = use every sample
    // > 0: per epoch, rotate the live image by a fresh known angle drawn
    // uniformly from +-augment_deg and shift the stack centre to match; the
    // unknown offset is untouched, so supervision stays self-supervised
    double augment_deg = 0.0;
};

struct TrainResult {
    int epochs = 0;
    double best_val = 0.0;
    bool early_stopped = false;
};

// Double-pass self-supervision: pass 1 selects the live rotation
// conditioned on the map; pass 2 selects from a shuffled stack of rotated
// maps conditioned on the pass-1 output, with an L1 loss against the
// non-rotated map. Best-validation weights are restored on return.
TrainResult train_rotation(nn::RotSelector<float>& f_r,
                           const std::vector<RotSample>& train,
                           const std::vector<RotSample>& val,
                           const RotTrainOptions& opt);

// Inference: returns (theta_hat, per-angle weights).
std::pair<double, std::vector<double>> infer_rotation(
    const nn::RotSelector<float>& f_r, const ImagePatch& map,
    const ImagePatch& live, double theta0, double half_range, double step);

// Stack / image <-> tensor plumbing shared with the pipeline.
nn::Var<float> image_var(const ImagePatch& img);
nn::Var<float> stack_var(const std::vector<ImagePatch>& imgs);

}  // namespace crossloc

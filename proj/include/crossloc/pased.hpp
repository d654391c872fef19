#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crossloc/models.hpp"
#include "crossloc/rotation.hpp"

namespace crossloc {

// Rotated live image plus a map re-query closure. requery(sx, sy) returns
// the map patch whose centre is (sx, sy) pixels from the original query;
// its content equals the original patch's content shifted by (-sx, -sy).
// requery(0, 0) is the map patch itself.
struct CrossSample {
    ImagePatch b_theta;
    std::function<ImagePatch(int, int)> requery;
};

struct PasedTrainOptions {
    double lr = 2e-4;
    int max_epochs = 20;
    int patience = 5;
    unsigned seed = 1;
    int shift_px = 10;            // gamma / re-query range, per axis
    std::string csv_path;
    std::string checkpoint_path;
    bool raw_target = false;      // cross stage: L1 directly against B_{theta,beta-alpha}
    int steps_per_epoch = 0;      // pretrain only; 0 = one step per training image
};

// Stage 1: intra-modality pre-training of E_a, E_p, D on pairs of distinct
// live images with known integer shifts. Best-validation weights restored.
TrainResult pretrain_pased(nn::GeneratorBundle<float>& bundle,
                           const std::vector<ImagePatch>& train_imgs,
                           const std::vector<ImagePatch>& val_imgs,
                           const PasedTrainOptions& opt);

// Stage 2: cross-modality training of E_p* with E_a, E_p, D frozen
// (asserted by checksum every step). The loss target is built through the
// frozen pipeline from the self-supervised shift beta - alpha known via
// map re-query; no individual offset is ever observed.
TrainResult train_cross(nn::GeneratorBundle<float>& bundle,
                        const std::vector<CrossSample>& train,
                        const std::vector<CrossSample>& val,
                        const PasedTrainOptions& opt);

// Inference helper: D(E_a(appearance) || E_pose(pose_ref, pose_shifted)),
// eval mode, plain images.
ImagePatch generate_image(const nn::GeneratorBundle<float>& bundle,
                          const ImagePatch& appearance, const ImagePatch& pose_ref,
                          const ImagePatch& pose_shifted, bool use_cross);

}  // namespace crossloc

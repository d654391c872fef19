#pragma once

#include <string>
#include <vector>

#include "crossloc/correlate.hpp"
#include "crossloc/pased.hpp"

namespace crossloc {

struct EmbedTrainOptions {
    double lr = 2e-6;
    int max_epochs = 20;
    int patience = 5;
    unsigned seed = 1;
    int shift_px = 10;        // map re-query range per axis
    double tau = 10.0;        // soft-argmax temperature
    std::string csv_path;
    std::string checkpoint_path;
};

// Trains H_B (real live images) and H_B~ (synthetic ones) through the
// frozen generation pipeline. Per sample with re-query shift s: the
// forward pass solves beta, the reversed pass solves -alpha, and the loss
// is |(beta_hat + (-alpha_hat)) - (beta - alpha)|_1 with beta - alpha = -s.
TrainResult train_embeddings(nn::UNet<float>& h_b, nn::UNet<float>& h_bt,
                             const nn::GeneratorBundle<float>& frozen,
                             const std::vector<CrossSample>& train,
                             const std::vector<CrossSample>& val,
                             const EmbedTrainOptions& opt);

// Single-channel embedding of a plain image.
ImagePatch embed_image(const nn::UNet<float>& net, const ImagePatch& img);

// Hard-peak translation between a real live image and a synthetic one via
// the two embeddings (2x zero-padded correlation): the returned shift
// carries b_real's content onto b_synth's.
std::pair<double, double> embedding_offset(const nn::UNet<float>& h_b,
                                           const nn::UNet<float>& h_bt,
                                           const ImagePatch& b_real,
                                           const ImagePatch& b_synth);

}  // namespace crossloc

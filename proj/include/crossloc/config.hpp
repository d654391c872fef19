#pragma once

#include <string>

namespace crossloc {

// One flat config drives every stage; each run writes the fully-resolved
// copy next to its outputs so results are reproducible from the artefacts
// alone.
struct RunConfig {
    unsigned seed = 1;

    // world / dataset
    int patch = 64;               // square patch side, pixels
    double resolution = 0.5;      // metres per pixel
    double offset_budget_px = 25;
    double heading_budget_deg = 22.5;
    int frames_train = 400;
    int frames_val = 50;
    int frames_test = 100;
    int map_margin_px = 48;       // extra map border stored for re-query crops
    int map_channels = 1;

    // rotation stack
    double stack_step_deg = 2.0;
    double stack_half_range_deg = 22.5;

    // optimisation
    double lr_rotation = 2e-4;
    double lr_generation = 2e-4;
    double lr_embedding = 2e-6;
    int patience = 5;
    int epochs_rotation = 20;
    int epochs_pretrain = 20;
    int epochs_cross = 20;
    int epochs_embed = 20;
    double width_scale = 0.25;    // 1.0 = exact architecture tables

    // pased
    int pretrain_shift_px = 10;   // gamma range for intra-modality shifts
    int requery_shift_px = 10;    // map re-query range for the cross stage

    // inference
    double soft_peak_tau = 10.0;
    double delta_x = 10.0;        // introspection probe shift
    double delta_y = 10.0;
    double d_intro_threshold = 5.0;

    static RunConfig from_json_file(const std::string& path);
    std::string to_json() const;
    void write_resolved(const std::string& path) const;
};

}  // namespace crossloc

#pragma once

#include <string>
#include <vector>

#include "crossloc/config.hpp"
#include "crossloc/geometry.hpp"
#include "crossloc/image.hpp"
#include "crossloc/world.hpp"

namespace crossloc {

// Live-sensor flavour of a generated dataset. `overhead` renders the live
// image from the map itself (rotated to heading-up) — the degenerate
// same-modality task used for training sanity checks.
enum class Modality { range, overhead };

enum class AccessMode { train, eval };

struct FrameMeta {
    int id = 0;
    std::string map_path;          // margin tile, patch + 2*margin square
    std::string live_path;
    std::string live_coarse_path;  // wide-field render at twice the resolution
    double theta0 = 0.0;    // coarse heading estimate, degrees
    // initial-estimate position: the tile centre on the world pixel lattice
    long long cx_px = 0;
    long long cy_px = 0;
    std::string split;      // train | val | test
};

// Generates maps/, live/, manifest.json and the evaluation-only
// truth.json under out_dir. Deterministic from (world seed, cfg).
void make_dataset(const World& world, const RunConfig& cfg,
                  const std::string& out_dir, Modality modality);

// Loader for a generated dataset directory. In train mode the hidden true
// poses are not readable: truth() throws. Map patches are crops of stored
// margin tiles, so re-querying at a pixel shift is bit-exact.
class Dataset {
public:
    static Dataset open(const std::string& dir, AccessMode mode);

    int count() const { return static_cast<int>(frames_.size()); }
    const FrameMeta& meta(int i) const { return frames_.at(i); }
    std::vector<int> frames(const std::string& split) const;

    double resolution() const { return resolution_; }
    int patch() const { return patch_; }
    int margin() const { return margin_; }

    // central crop of the margin tile
    ImagePatch map_patch(int i) const { return map_requery(i, 0, 0); }
    // crop centred (sx, sy) pixels from the tile centre; the returned
    // content equals the central crop's content shifted by (-sx, -sy)
    ImagePatch map_requery(int i, int sx, int sy) const;
    ImagePatch live(int i) const;

    // rotation-stage companions at twice the resolution: the wide-field live
    // render, and the map tile downsampled 2x and centre-cropped to the patch
    // size (sx, sy request an approximate window move in fine pixels)
    ImagePatch live_coarse(int i) const;
    ImagePatch map_coarse(int i, int sx = 0, int sy = 0) const;

    // hidden ground truth: (dx, dy, theta) such that the live image rotated
    // by theta and shifted by (dx, dy) aligns with the central map crop.
    // Throws std::logic_error in train mode.
    Pose2 truth(int i) const;

private:
    std::string dir_;
    AccessMode mode_ = AccessMode::train;
    double resolution_ = 1.0;
    int patch_ = 0;
    int margin_ = 0;
    std::vector<FrameMeta> frames_;
    std::vector<Pose2> truth_;  // loaded only in eval mode
};

// Ablation splits over an ordered frame-id list (Table VII protocol).
std::vector<int> filter_every_kth(const std::vector<int>& ids, int k);
std::vector<int> filter_first_fraction(const std::vector<int>& ids, double fraction);

}  // namespace crossloc

#include "crossloc/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace crossloc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;

std::string frame_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.pgm", id);
    return buf;
}

double snap(double v, double res) { return std::llround(v / res) * res; }

}  // namespace

void make_dataset(const World& world, const RunConfig& cfg,
                  const std::string& out_dir, Modality modality) {
    const int total = cfg.frames_train + cfg.frames_val + cfg.frames_test;
    if (total <= 0) throw std::invalid_argument("make_dataset: no frames requested");
    if (cfg.offset_budget_px < 0 || cfg.heading_budget_deg < 0)
        throw std::invalid_argument("make_dataset: negative budget");

    fs::create_directories(fs::path(out_dir) / "maps");
    fs::create_directories(fs::path(out_dir) / "live");
    fs::create_directories(fs::path(out_dir) / "live_coarse");

    const double res = cfg.resolution;
    const int tile = cfg.patch + 2 * cfg.map_margin_px;
    const double r0 = world.spec().keepout_radius_m - 2.0;
    const double r1 = world.spec().keepout_radius_m + 2.0;
    const double turns = 3.0;

    std::mt19937 rng(cfg.seed);
    const double off_b = std::max(0.0, cfg.offset_budget_px - 0.51);
    std::uniform_real_distribution<double> off(-off_b, off_b);
    std::uniform_real_distribution<double> herr(-cfg.heading_budget_deg, cfg.heading_budget_deg);

    SensorModel sensor;
    sensor.kind = SensorModel::Kind::radar;  // multi-return: denser live images
    sensor.max_range_m = cfg.patch * 0.5 * res * 1.45;  // cover the patch diagonal

    // wide-field companion render for the rotation stage: same pixel count at
    // half the resolution doubles the metric baseline, so a degree of heading
    // moves twice the structure
    const double res_c = 2.0 * res;
    SensorModel sensor_c = sensor;
    sensor_c.max_range_m = cfg.patch * 0.5 * res_c * 1.45;

    json frames = json::array();
    json truths = json::array();

    for (int id = 0; id < total; ++id) {
        const double t = static_cast<double>(id) / total;
        const double ang = t * turns * 2.0 * kPi;
        const double radius = r0 + (r1 - r0) * t;
        const double vx = radius * std::cos(ang);
        const double vy = radius * std::sin(ang);
        // forward = (sin h, -cos h); the spiral tangent is nearly the circle's
        const double dxdt = -radius * std::sin(ang);
        const double dydt = radius * std::cos(ang);
        const double heading = normalize_deg(std::atan2(dxdt, -dydt) * 180.0 / kPi);

        // live render; the degenerate modality rotates the map itself
        double lx = vx, ly = vy;
        ImagePatch live_img, live_coarse_img;
        if (modality == Modality::overhead) {
            lx = snap(vx, res);
            ly = snap(vy, res);
            ImagePatch over = render_overhead(world, lx, ly, res, cfg.patch);
            live_img = rotate(over, -heading, Interp::bilinear);
            ImagePatch over_c = render_overhead(world, lx, ly, res_c, cfg.patch);
            live_coarse_img = rotate(over_c, -heading, Interp::bilinear);
        } else {
            live_img = render_range(world, lx, ly, heading, sensor, res, cfg.patch,
                                    cfg.seed + 1000u + static_cast<unsigned>(id));
            live_coarse_img =
                render_range(world, lx, ly, heading, sensor_c, res_c, cfg.patch,
                             cfg.seed + 2000u + static_cast<unsigned>(id));
        }

        // artificial offset: map tile centred away from the true position
        const double ax_target = off(rng), ay_target = off(rng);
        const double cx = snap(lx - ax_target * res, res);
        const double cy = snap(ly - ay_target * res, res);
        ImagePatch tile_img = render_overhead(world, cx, cy, res, tile);

        const double theta0 = normalize_deg(heading + herr(rng));
        const char* split = id < cfg.frames_train ? "train"
                            : id < cfg.frames_train + cfg.frames_val ? "val" : "test";

        const std::string map_rel = "maps/" + frame_name(id);
        const std::string live_rel = "live/" + frame_name(id);
        const std::string live_c_rel = "live_coarse/" + frame_name(id);
        write_pgm(tile_img, (fs::path(out_dir) / map_rel).string());
        write_pgm(live_img, (fs::path(out_dir) / live_rel).string());
        write_pgm(live_coarse_img, (fs::path(out_dir) / live_c_rel).string());

        frames.push_back({{"id", id},
                          {"map", map_rel},
                          {"live", live_rel},
                          {"live_coarse", live_c_rel},
                          {"theta0", theta0},
                          {"cx_px", std::llround(cx / res)},
                          {"cy_px", std::llround(cy / res)},
                          {"split", split}});
        truths.push_back({{"id", id},
                          {"dx", (lx - cx) / res},
                          {"dy", (ly - cy) / res},
                          {"theta", heading}});
    }

    json manifest{{"resolution", res},
                  {"patch", cfg.patch},
                  {"margin", cfg.map_margin_px},
                  {"seed", cfg.seed},
                  {"modality", modality == Modality::overhead ? "overhead" : "range"},
                  {"frames", frames}};
    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    mf << manifest.dump(1) << "\n";

    // evaluation-only section, in a separate file the train-mode loader
    // refuses to expose
    std::ofstream tf(fs::path(out_dir) / "truth.json");
    tf << json{{"frames", truths}}.dump(1) << "\n";
}

Dataset Dataset::open(const std::string& dir, AccessMode mode) {
    Dataset d;
    d.dir_ = dir;
    d.mode_ = mode;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("dataset: missing manifest in " + dir);
    json manifest;
    mf >> manifest;
    d.resolution_ = manifest.at("resolution").get<double>();
    d.patch_ = manifest.at("patch").get<int>();
    d.margin_ = manifest.at("margin").get<int>();
    for (const auto& f : manifest.at("frames")) {
        FrameMeta m;
        m.id = f.at("id").get<int>();
        m.map_path = f.at("map").get<std::string>();
        m.live_path = f.at("live").get<std::string>();
        m.live_coarse_path = f.at("live_coarse").get<std::string>();
        m.theta0 = f.at("theta0").get<double>();
        m.cx_px = f.at("cx_px").get<long long>();
        m.cy_px = f.at("cy_px").get<long long>();
        m.split = f.at("split").get<std::string>();
        d.frames_.push_back(std::move(m));
    }
    if (mode == AccessMode::eval) {
        std::ifstream tf(fs::path(dir) / "truth.json");
        if (!tf) throw std::runtime_error("dataset: missing truth.json in " + dir);
        json truths;
        tf >> truths;
        d.truth_.resize(d.frames_.size());
        for (const auto& t : truths.at("frames")) {
            const int id = t.at("id").get<int>();
            d.truth_.at(id) = Pose2(t.at("dx").get<double>(), t.at("dy").get<double>(),
                                    t.at("theta").get<double>());
        }
    }
    return d;
}

std::vector<int> Dataset::frames(const std::string& split) const {
    std::vector<int> out;
    for (int i = 0; i < count(); ++i)
        if (frames_[i].split == split) out.push_back(i);
    return out;
}

ImagePatch Dataset::map_requery(int i, int sx, int sy) const {
    if (std::abs(sx) > margin_ || std::abs(sy) > margin_)
        throw std::out_of_range("dataset: re-query shift exceeds stored margin");
    ImagePatch tile = read_pgm((fs::path(dir_) / frames_.at(i).map_path).string(), 1, resolution_);
    ImagePatch out(1, patch_, patch_, resolution_);
    const int x0 = margin_ + sx, y0 = margin_ + sy;
    for (int y = 0; y < patch_; ++y)
        for (int x = 0; x < patch_; ++x) out.at(0, y, x) = tile.at(0, y0 + y, x0 + x);
    return out;
}

ImagePatch Dataset::live(int i) const {
    return read_pgm((fs::path(dir_) / frames_.at(i).live_path).string(), 1, resolution_);
}

ImagePatch Dataset::live_coarse(int i) const {
    return read_pgm((fs::path(dir_) / frames_.at(i).live_coarse_path).string(), 1,
                    2.0 * resolution_);
}

ImagePatch Dataset::map_coarse(int i, int sx, int sy) const {
    ImagePatch tile = read_pgm((fs::path(dir_) / frames_.at(i).map_path).string(), 1, resolution_);
    const int hc = tile.height / 2, wc = tile.width / 2;
    ImagePatch down(1, hc, wc, 2.0 * resolution_);
    for (int y = 0; y < hc; ++y)
        for (int x = 0; x < wc; ++x)
            down.at(0, y, x) = 0.25f * (tile.at(0, 2 * y, 2 * x) + tile.at(0, 2 * y, 2 * x + 1) +
                                        tile.at(0, 2 * y + 1, 2 * x) +
                                        tile.at(0, 2 * y + 1, 2 * x + 1));
    // fine-pixel shift, halved and clamped to the coarse margin
    const int mc = (hc - patch_) / 2;
    const int cx = std::clamp(static_cast<int>(std::lround(sx / 2.0)), -mc, mc);
    const int cy = std::clamp(static_cast<int>(std::lround(sy / 2.0)), -mc, mc);
    ImagePatch out(1, patch_, patch_, 2.0 * resolution_);
    const int x0 = mc + cx, y0 = mc + cy;
    for (int y = 0; y < patch_; ++y)
        for (int x = 0; x < patch_; ++x) out.at(0, y, x) = down.at(0, y0 + y, x0 + x);
    return out;
}

Pose2 Dataset::truth(int i) const {
    if (mode_ != AccessMode::eval)
        throw std::logic_error("dataset: hidden ground truth is not readable in train mode");
    return truth_.at(i);
}

std::vector<int> filter_every_kth(const std::vector<int>& ids, int k) {
    if (k <= 0) throw std::invalid_argument("filter_every_kth: k must be positive");
    std::vector<int> out;
    for (std::size_t i = 0; i < ids.size(); i += k) out.push_back(ids[i]);
    return out;
}

std::vector<int> filter_first_fraction(const std::vector<int>& ids, double fraction) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("filter_first_fraction: fraction out of range");
    const std::size_t n = static_cast<std::size_t>(std::lround(ids.size() * fraction));
    return std::vector<int>(ids.begin(), ids.begin() + std::min(n, ids.size()));
}

}  // namespace crossloc

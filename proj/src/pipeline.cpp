#include "crossloc/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "crossloc/trainutil.hpp"

namespace crossloc {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

ImagePatch int_shift(const ImagePatch& img, double dx, double dy) {
    return warp(img, {0.0, dx, dy,
                      (dx == std::floor(dx) && dy == std::floor(dy)) ? Interp::nearest
                                                                     : Interp::bilinear});
}

}  // namespace

PipelineModels make_models(const RunConfig& cfg) {
    std::mt19937 rng = seeded_rng(cfg.seed, 1);
    PipelineModels m;
    m.cfg = cfg;
    m.f_r = nn::RotSelector<float>(cfg.map_channels, 1, cfg.width_scale, rng);
    m.gen = nn::GeneratorBundle<float>(cfg.map_channels, cfg.width_scale, rng);
    const int levels = nn::unet_levels_for(cfg.patch);
    m.h_b = nn::UNet<float>("H_B", levels, cfg.width_scale, rng);
    m.h_bt = nn::UNet<float>("H_Bt", levels, cfg.width_scale, rng);
    return m;
}

double introspect(const PipelineModels& m, const ImagePatch& A,
                  const ImagePatch& b_theta, const ImagePatch& bt_alpha,
                  double dx, double dy) {
    ImagePatch a_delta = int_shift(A, dx, dy);
    ImagePatch bt_delta = generate_image(m.gen, b_theta, a_delta, b_theta, true);
    // shift carrying the alpha image onto the alpha+delta image is delta
    CorrelationSurface s = correlate_images_padded(embed_image(m.h_bt, bt_alpha),
                                                   embed_image(m.h_bt, bt_delta));
    auto [ex, ey] = peak(s, PeakMode::hard);
    return std::hypot(dx - ex, dy - ey);
}

LocalisationResult localise_frame(const PipelineModels& m, const ImagePatch& A,
                                  const ImagePatch& B, double theta0,
                                  const RotationView* rot_view) {
    LocalisationResult r;
    auto t0 = std::chrono::steady_clock::now();
    auto [theta_hat, weights] = infer_rotation(m.f_r, rot_view ? rot_view->map : A,
                                               rot_view ? rot_view->live : B, theta0,
                                               m.cfg.stack_half_range_deg,
                                               m.cfg.stack_step_deg);
    r.theta_hat = normalize_deg(theta_hat);
    ImagePatch b_theta = rotate(B, theta_hat);
    r.t_rotation_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    ImagePatch bt_alpha = generate_image(m.gen, b_theta, A, b_theta, true);
    r.t_generation_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto [ax, ay] = embedding_offset(m.h_b, m.h_bt, b_theta, bt_alpha);
    r.ax_px = ax;
    r.ay_px = ay;
    r.ax_m = px_to_m(ax, A.resolution);
    r.ay_m = px_to_m(ay, A.resolution);
    r.t_embedding_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    r.d_intro = introspect(m, A, b_theta, bt_alpha, m.cfg.delta_x, m.cfg.delta_y);
    r.low_confidence = r.d_intro > m.cfg.d_intro_threshold;
    r.t_introspect_ms = ms_since(t0);
    return r;
}

LocalisationResult localise_large_offset(
    const PipelineModels& m, const ImagePatch& A, const ImagePatch& B,
    double theta0, const std::function<ImagePatch(int, int)>& requery,
    const RotationView* rot_view) {
    auto [theta_hat, weights] = infer_rotation(m.f_r, rot_view ? rot_view->map : A,
                                               rot_view ? rot_view->live : B, theta0,
                                               m.cfg.stack_half_range_deg,
                                               m.cfg.stack_step_deg);
    ImagePatch b_theta = rotate(B, theta_hat);

    // unshifted candidate first: ties prefer the least intervention
    const std::pair<int, int> deltas[5] = {{0, 0}, {-10, 10}, {10, 10}, {-10, -10}, {10, -10}};
    const int gx = 8, gy = 6;  // known re-query probe
    ImagePatch a_probe = requery(gx, gy);  // content = shift(A, (-gx, -gy))

    double best_e = 0.0;
    int best = -1;
    ImagePatch best_shifted;
    for (int i = 0; i < 5; ++i) {
        ImagePatch shifted = int_shift(b_theta, deltas[i].first, deltas[i].second);
        ImagePatch bt1 = generate_image(m.gen, shifted, A, shifted, true);
        ImagePatch bt2 = generate_image(m.gen, shifted, a_probe, shifted, true);
        CorrelationSurface s = correlate_images_padded(embed_image(m.h_bt, bt1),
                                                       embed_image(m.h_bt, bt2));
        auto [ex, ey] = peak(s, PeakMode::hard);  // expected (-gx, -gy)
        const double e = std::hypot(ex + gx, ey + gy);
        if (best < 0 || e < best_e) {
            best_e = e;
            best = i;
            best_shifted = shifted;
        }
    }

    LocalisationResult r;
    r.theta_hat = normalize_deg(theta_hat);
    ImagePatch bt_alpha = generate_image(m.gen, best_shifted, A, best_shifted, true);
    auto [ax, ay] = embedding_offset(m.h_b, m.h_bt, best_shifted, bt_alpha);
    // the live image was pre-shifted by delta, so the content offset the
    // solver saw is alpha - delta
    r.ax_px = ax + deltas[best].first;
    r.ay_px = ay + deltas[best].second;
    r.ax_m = px_to_m(r.ax_px, A.resolution);
    r.ay_m = px_to_m(r.ay_px, A.resolution);
    r.d_intro = introspect(m, A, best_shifted, bt_alpha, m.cfg.delta_x, m.cfg.delta_y);
    r.low_confidence = r.d_intro > m.cfg.d_intro_threshold;
    return r;
}

std::pair<double, double> naive_odometry(const ImagePatch& b_prev,
                                         const ImagePatch& b_cur) {
    return peak(correlate_images_padded(b_prev, b_cur), PeakMode::hard);
}

std::vector<TrackPoint> track(const PipelineModels& m, const Dataset& data,
                              const std::vector<int>& frames,
                              const std::string& csv_path) {
    if (frames.empty()) throw std::invalid_argument("track: no frames");
    CsvLogger log(csv_path, "frame_id,x_px,y_px,theta_deg,x_m,y_m,d_intro,used_fallback");

    const double res = data.resolution();
    const int margin = data.margin();
    std::vector<TrackPoint> out;

    // GPS only for the first frame: its recorded initial estimate
    double px = static_cast<double>(data.meta(frames[0]).cx_px);
    double py = static_cast<double>(data.meta(frames[0]).cy_px);
    double heading = data.meta(frames[0]).theta0;
    ImagePatch prev_live;
    int at_budget_streak = 0;
    bool lost = false;

    for (std::size_t k = 0; k < frames.size(); ++k) {
        const int f = frames[k];
        const FrameMeta& meta = data.meta(f);
        ImagePatch live = data.live(f);

        // query the map around the current estimate via the stored tile
        int sx = static_cast<int>(std::lround(px - meta.cx_px));
        int sy = static_cast<int>(std::lround(py - meta.cy_px));
        sx = std::clamp(sx, -margin, margin);
        sy = std::clamp(sy, -margin, margin);
        ImagePatch A = data.map_requery(f, sx, sy);
        RotationView rv{data.map_coarse(f, sx, sy), data.live_coarse(f)};

        LocalisationResult r = localise_frame(m, A, live, heading, &rv);

        TrackPoint tp;
        tp.frame_id = meta.id;
        tp.d_intro = r.d_intro;
        if (k > 0 && r.low_confidence) {
            // dead-reckon with raw correlation; heading frozen
            auto [tx, ty] = naive_odometry(prev_live, live);
            const double c = std::cos(heading * kDegToRad), s = std::sin(heading * kDegToRad);
            px -= c * tx - s * ty;
            py -= s * tx + c * ty;
            tp.used_fallback = true;
        } else {
            px = (meta.cx_px + sx) + r.ax_px;
            py = (meta.cy_px + sy) + r.ay_px;
            heading = r.theta_hat;
        }

        const double budget = m.cfg.offset_budget_px;
        if (std::abs(r.ax_px) >= budget - 1 || std::abs(r.ay_px) >= budget - 1)
            ++at_budget_streak;
        else
            at_budget_streak = 0;
        if (at_budget_streak >= 5) lost = true;

        tp.x_px = px;
        tp.y_px = py;
        tp.theta_deg = heading;
        tp.x_m = px_to_m(px, res);
        tp.y_m = px_to_m(py, res);
        tp.track_lost = lost;
        out.push_back(tp);

        log.row(std::to_string(tp.frame_id) + "," + std::to_string(tp.x_px) + "," +
                std::to_string(tp.y_px) + "," + std::to_string(tp.theta_deg) + "," +
                std::to_string(tp.x_m) + "," + std::to_string(tp.y_m) + "," +
                std::to_string(tp.d_intro) + "," + (tp.used_fallback ? "1" : "0"));
        prev_live = std::move(live);
    }
    return out;
}

}  // namespace crossloc

// Operator commands for the cross-modality localisation pipeline: dataset
// generation, stage-wise training (the stage order enforces the freezes),
// evaluation, tracking, introspection reports, and the reduced-data
// ablation protocol.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "crossloc/checkpoint.hpp"
#include "crossloc/pipeline.hpp"
#include "crossloc/trainutil.hpp"

namespace fs = std::filesystem;
using namespace crossloc;

namespace {

// distinct exit codes per failure class
constexpr int kExitMissingCheckpoint = 2;
constexpr int kExitBadConfig = 3;
constexpr int kExitBudgetViolation = 4;
constexpr int kExitContract = 5;

struct CommonArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir = ".";
    unsigned seed = 0;  // 0 = keep the config's seed
};

RunConfig load_config(const CommonArgs& a) {
    RunConfig cfg;
    if (!a.config_path.empty()) cfg = RunConfig::from_json_file(a.config_path);
    if (a.seed != 0) cfg.seed = a.seed;
    return cfg;
}

void check_budgets(const RunConfig& cfg) {
    if (cfg.offset_budget_px < 0 || cfg.heading_budget_deg < 0 ||
        cfg.offset_budget_px + 1 > cfg.map_margin_px)
        throw std::domain_error("offset budget incompatible with the stored map margin");
    if (cfg.requery_shift_px > cfg.map_margin_px || cfg.pretrain_shift_px < 0)
        throw std::domain_error("shift ranges exceed the stored map margin");
}

void write_resolved(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    cfg.write_resolved((fs::path(out_dir) / "resolved_config.json").string());
}

Checkpoint load_ck(const std::string& path, const char* what) {
    if (path.empty() || !fs::exists(path))
        throw std::invalid_argument(std::string("missing ") + what + " checkpoint: " + path);
    return Checkpoint::load(path);
}

// the rotation stage runs on the wide-field pair (half resolution, double
// the metric baseline)
std::vector<RotSample> rot_samples(const Dataset& d, const std::vector<int>& ids) {
    std::vector<RotSample> out;
    for (int i : ids) out.push_back({d.map_coarse(i), d.live_coarse(i), d.meta(i).theta0});
    return out;
}

std::vector<ImagePatch> live_images(const Dataset& d, const std::vector<int>& ids) {
    std::vector<ImagePatch> out;
    for (int i : ids) out.push_back(d.live(i));
    return out;
}

// b_theta from the trained rotation stage (self-supervised: no truth)
std::vector<CrossSample> cross_samples(const Dataset& d, const std::vector<int>& ids,
                                       const PipelineModels& m) {
    std::vector<CrossSample> out;
    for (int i : ids) {
        ImagePatch B = d.live(i);
        auto [theta, w] =
            infer_rotation(m.f_r, d.map_coarse(i), d.live_coarse(i), d.meta(i).theta0,
                           m.cfg.stack_half_range_deg, m.cfg.stack_step_deg);
        CrossSample s;
        s.b_theta = rotate(B, theta);
        s.requery = [&d, i](int sx, int sy) { return d.map_requery(i, sx, sy); };
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<nn::NamedParam<float>> embed_params(PipelineModels& m) {
    std::vector<nn::NamedParam<float>> ps;
    for (const auto& p : m.h_b.params()) ps.push_back(p);
    for (const auto& p : m.h_bt.params()) ps.push_back(p);
    return ps;
}

struct ErrorStats {
    double x_px = 0, y_px = 0, theta = 0, x_m = 0, y_m = 0;
    int frames = 0;
};

void print_stats(const std::string& label, const ErrorStats& e) {
    std::printf("%-12s %8s %8s %8s %8s %8s\n", "", "x(m)", "y(m)", "th(deg)", "x(px)", "y(px)");
    std::printf("%-12s %8.3f %8.3f %8.3f %8.3f %8.3f\n", label.c_str(), e.x_m, e.y_m, e.theta,
                e.x_px, e.y_px);
}

// mean absolute errors of localise_frame over the given frames (eval-mode data)
ErrorStats evaluate(const PipelineModels& m, const Dataset& d, const std::vector<int>& ids,
                    const std::string& csv_path) {
    CsvLogger log(csv_path,
                  "frame_id,ex_px,ey_px,etheta_deg,d_intro,ax_px,ay_px,theta_hat");
    ErrorStats e;
    for (int i : ids) {
        RotationView rv{d.map_coarse(i), d.live_coarse(i)};
        LocalisationResult r =
            localise_frame(m, d.map_patch(i), d.live(i), d.meta(i).theta0, &rv);
        Pose2 t = d.truth(i);
        const double ex = std::abs(r.ax_px - t.x);
        const double ey = std::abs(r.ay_px - t.y);
        const double et = std::abs(normalize_deg(r.theta_hat - t.theta));
        e.x_px += ex;
        e.y_px += ey;
        e.theta += et;
        ++e.frames;
        log.row(std::to_string(d.meta(i).id) + "," + std::to_string(ex) + "," +
                std::to_string(ey) + "," + std::to_string(et) + "," +
                std::to_string(r.d_intro) + "," + std::to_string(r.ax_px) + "," +
                std::to_string(r.ay_px) + "," + std::to_string(r.theta_hat));
    }
    if (e.frames > 0) {
        e.x_px /= e.frames;
        e.y_px /= e.frames;
        e.theta /= e.frames;
        e.x_m = px_to_m(e.x_px, d.resolution());
        e.y_m = px_to_m(e.y_px, d.resolution());
    }
    return e;
}

// three-stage training on a chosen subset of the train split; used by the
// stage commands indirectly and by `ablate` end to end
void train_all_stages(PipelineModels& m, const Dataset& data,
                      const std::vector<int>& train_ids, const std::vector<int>& val_ids,
                      const RunConfig& cfg, const std::string& out_dir) {
    RotTrainOptions ro;
    ro.lr = cfg.lr_rotation;
    ro.max_epochs = cfg.epochs_rotation;
    ro.patience = cfg.patience;
    ro.seed = cfg.seed;
    ro.half_range = cfg.stack_half_range_deg;
    ro.step = cfg.stack_step_deg;
    ro.csv_path = (fs::path(out_dir) / "rotation_metrics.csv").string();
    ro.checkpoint_path = (fs::path(out_dir) / "rotation.ck").string();
    train_rotation(m.f_r, rot_samples(data, train_ids), rot_samples(data, val_ids), ro);

    PasedTrainOptions po;
    po.lr = cfg.lr_generation;
    po.max_epochs = cfg.epochs_pretrain;
    po.patience = cfg.patience;
    po.seed = cfg.seed;
    po.shift_px = cfg.pretrain_shift_px;
    po.csv_path = (fs::path(out_dir) / "pretrain_metrics.csv").string();
    po.checkpoint_path = (fs::path(out_dir) / "pased_pretrained.ck").string();
    pretrain_pased(m.gen, live_images(data, train_ids), live_images(data, val_ids), po);

    auto ctrain = cross_samples(data, train_ids, m);
    auto cval = cross_samples(data, val_ids, m);
    po.max_epochs = cfg.epochs_cross;
    po.shift_px = cfg.requery_shift_px;
    po.csv_path = (fs::path(out_dir) / "cross_metrics.csv").string();
    po.checkpoint_path = (fs::path(out_dir) / "pased_cross.ck").string();
    train_cross(m.gen, ctrain, cval, po);

    EmbedTrainOptions eo;
    eo.lr = cfg.lr_embedding;
    eo.max_epochs = cfg.epochs_embed;
    eo.patience = cfg.patience;
    eo.seed = cfg.seed;
    eo.shift_px = cfg.requery_shift_px;
    eo.tau = cfg.soft_peak_tau;
    eo.csv_path = (fs::path(out_dir) / "embed_metrics.csv").string();
    eo.checkpoint_path = (fs::path(out_dir) / "embed.ck").string();
    train_embeddings(m.h_b, m.h_bt, m.gen, ctrain, cval, eo);
}

PipelineModels load_models(const RunConfig& cfg, const std::string& rotation_ck,
                           const std::string& pased_ck, const std::string& embed_ck) {
    PipelineModels m = make_models(cfg);
    load_ck(rotation_ck, "rotation").get_params(m.f_r.params());
    load_ck(pased_ck, "generation").get_params(m.gen.all_params());
    load_ck(embed_ck, "embedding").get_params(embed_params(m));
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-supervised range-sensor / overhead-imagery localisation"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string modality = "range";
    std::string rotation_ck, pased_ck, embed_ck, pretrained_ck;

    auto add_common = [&](CLI::App* sub, bool needs_data) {
        sub->add_option("--config", args.config_path, "JSON run config");
        sub->add_option("--seed", args.seed, "override the config seed");
        sub->add_option("--out", args.out_dir, "output directory");
        if (needs_data) sub->add_option("--data", args.data_dir, "dataset directory")->required();
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic paired dataset");
    add_common(gen, false);
    gen->add_option("--modality", modality, "live modality: range | overhead");

    auto* trot = app.add_subcommand("train-rotation", "train the rotation selector");
    add_common(trot, true);

    auto* tpre = app.add_subcommand("pretrain-pased", "intra-modality generator pre-training");
    add_common(tpre, true);
    tpre->add_option("--rotation", rotation_ck, "rotation checkpoint")->required();

    auto* tcross = app.add_subcommand("train-pased", "cross-modality pose encoder training");
    add_common(tcross, true);
    tcross->add_option("--rotation", rotation_ck, "rotation checkpoint")->required();
    tcross->add_option("--pretrained", pretrained_ck, "pre-trained generator checkpoint")
        ->required();

    auto* temb = app.add_subcommand("train-embed", "embedding U-Net training");
    add_common(temb, true);
    temb->add_option("--rotation", rotation_ck, "rotation checkpoint")->required();
    temb->add_option("--pased", pased_ck, "cross-trained generator checkpoint")->required();

    auto* ev = app.add_subcommand("eval", "evaluate on the held-out test split");
    add_common(ev, true);
    ev->add_option("--rotation", rotation_ck, "rotation checkpoint")->required();
    ev->add_option("--pased", pased_ck, "generator checkpoint")->required();
    ev->add_option("--embed", embed_ck, "embedding checkpoint")->required();

    auto* tr = app.add_subcommand("track", "online tracking over the test split");
    add_common(tr, true);
    tr->add_option("--rotation", rotation_ck, "rotation checkpoint")->required();
    tr->add_option("--pased", pased_ck, "generator checkpoint")->required();
    tr->add_option("--embed", embed_ck, "embedding checkpoint")->required();

    auto* ir = app.add_subcommand("introspect-report", "introspection-gate calibration report");
    add_common(ir, true);
    ir->add_option("--rotation", rotation_ck, "rotation checkpoint")->required();
    ir->add_option("--pased", pased_ck, "generator checkpoint")->required();
    ir->add_option("--embed", embed_ck, "embedding checkpoint")->required();

    auto* ab = app.add_subcommand("ablate", "reduced-training-data protocol (full / first-20% / every-10th)");
    add_common(ab, true);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(args);
        check_budgets(cfg);

        if (gen->parsed()) {
            if (modality != "range" && modality != "overhead")
                throw std::domain_error("unknown modality: " + modality);
            World world = World::build(WorldSpec{cfg.seed});
            write_resolved(cfg, args.out_dir);
            make_dataset(world, cfg, args.out_dir,
                         modality == "range" ? Modality::range : Modality::overhead);
            std::cout << "dataset written to " << args.out_dir << "\n";
            return 0;
        }

        Dataset data = Dataset::open(args.data_dir, ev->parsed() || ir->parsed() || ab->parsed()
                                                        ? AccessMode::eval
                                                        : AccessMode::train);
        write_resolved(cfg, args.out_dir);
        const auto train_ids = data.frames("train");
        const auto val_ids = data.frames("val");
        const auto test_ids = data.frames("test");

        if (trot->parsed()) {
            PipelineModels m = make_models(cfg);
            RotTrainOptions ro;
            ro.lr = cfg.lr_rotation;
            ro.max_epochs = cfg.epochs_rotation;
            ro.patience = cfg.patience;
            ro.seed = cfg.seed;
            ro.half_range = cfg.stack_half_range_deg;
            ro.step = cfg.stack_step_deg;
            ro.csv_path = (fs::path(args.out_dir) / "rotation_metrics.csv").string();
            ro.checkpoint_path = (fs::path(args.out_dir) / "rotation.ck").string();
            TrainResult r =
                train_rotation(m.f_r, rot_samples(data, train_ids), rot_samples(data, val_ids), ro);
            std::cout << "rotation: " << r.epochs << " epochs, best val " << r.best_val << "\n";
            return 0;
        }
        if (tpre->parsed()) {
            PipelineModels m = make_models(cfg);
            load_ck(rotation_ck, "rotation").get_params(m.f_r.params());
            PasedTrainOptions po;
            po.lr = cfg.lr_generation;
            po.max_epochs = cfg.epochs_pretrain;
            po.patience = cfg.patience;
            po.seed = cfg.seed;
            po.shift_px = cfg.pretrain_shift_px;
            po.csv_path = (fs::path(args.out_dir) / "pretrain_metrics.csv").string();
            po.checkpoint_path = (fs::path(args.out_dir) / "pased_pretrained.ck").string();
            TrainResult r =
                pretrain_pased(m.gen, live_images(data, train_ids), live_images(data, val_ids), po);
            std::cout << "pretrain: " << r.epochs << " epochs, best val " << r.best_val << "\n";
            return 0;
        }
        if (tcross->parsed()) {
            PipelineModels m = make_models(cfg);
            load_ck(rotation_ck, "rotation").get_params(m.f_r.params());
            load_ck(pretrained_ck, "pre-trained generator").get_params(m.gen.all_params());
            PasedTrainOptions po;
            po.lr = cfg.lr_generation;
            po.max_epochs = cfg.epochs_cross;
            po.patience = cfg.patience;
            po.seed = cfg.seed;
            po.shift_px = cfg.requery_shift_px;
            po.csv_path = (fs::path(args.out_dir) / "cross_metrics.csv").string();
            po.checkpoint_path = (fs::path(args.out_dir) / "pased_cross.ck").string();
            TrainResult r = train_cross(m.gen, cross_samples(data, train_ids, m),
                                        cross_samples(data, val_ids, m), po);
            std::cout << "cross: " << r.epochs << " epochs, best val " << r.best_val << "\n";
            return 0;
        }
        if (temb->parsed()) {
            PipelineModels m = make_models(cfg);
            load_ck(rotation_ck, "rotation").get_params(m.f_r.params());
            load_ck(pased_ck, "generator").get_params(m.gen.all_params());
            EmbedTrainOptions eo;
            eo.lr = cfg.lr_embedding;
            eo.max_epochs = cfg.epochs_embed;
            eo.patience = cfg.patience;
            eo.seed = cfg.seed;
            eo.shift_px = cfg.requery_shift_px;
            eo.tau = cfg.soft_peak_tau;
            eo.csv_path = (fs::path(args.out_dir) / "embed_metrics.csv").string();
            eo.checkpoint_path = (fs::path(args.out_dir) / "embed.ck").string();
            TrainResult r = train_embeddings(m.h_b, m.h_bt, m.gen,
                                             cross_samples(data, train_ids, m),
                                             cross_samples(data, val_ids, m), eo);
            std::cout << "embed: " << r.epochs << " epochs, best val " << r.best_val << "\n";
            return 0;
        }
        if (ev->parsed()) {
            PipelineModels m = load_models(cfg, rotation_ck, pased_ck, embed_ck);
            ErrorStats e = evaluate(m, data, test_ids,
                                    (fs::path(args.out_dir) / "eval_frames.csv").string());
            print_stats("mean err", e);
            return 0;
        }
        if (tr->parsed()) {
            PipelineModels m = load_models(cfg, rotation_ck, pased_ck, embed_ck);
            auto traj = track(m, data, test_ids,
                              (fs::path(args.out_dir) / "trajectory.csv").string());
            int fallbacks = 0;
            for (const auto& p : traj) fallbacks += p.used_fallback ? 1 : 0;
            std::cout << "tracked " << traj.size() << " frames, " << fallbacks
                      << " fallbacks, track_lost=" << (traj.back().track_lost ? 1 : 0) << "\n";
            return 0;
        }
        if (ir->parsed()) {
            PipelineModels m = load_models(cfg, rotation_ck, pased_ck, embed_ck);
            double err_pass = 0, err_gate = 0;
            int n_pass = 0, n_gate = 0;
            CsvLogger log((fs::path(args.out_dir) / "introspection.csv").string(),
                          "frame_id,d_intro,trans_err_px,gated");
            for (int i : test_ids) {
                RotationView rv{data.map_coarse(i), data.live_coarse(i)};
                LocalisationResult r = localise_frame(m, data.map_patch(i), data.live(i),
                                                      data.meta(i).theta0, &rv);
                Pose2 t = data.truth(i);
                const double te = std::hypot(r.ax_px - t.x, r.ay_px - t.y);
                const bool gated = r.d_intro > cfg.d_intro_threshold;
                (gated ? err_gate : err_pass) += te;
                (gated ? n_gate : n_pass) += 1;
                log.row(std::to_string(data.meta(i).id) + "," + std::to_string(r.d_intro) + "," +
                        std::to_string(te) + "," + (gated ? "1" : "0"));
            }
            if (n_pass) err_pass /= n_pass;
            if (n_gate) err_gate /= n_gate;
            std::cout << "d_intro <= " << cfg.d_intro_threshold << ": " << n_pass
                      << " frames, mean translation error " << err_pass << " px\n";
            std::cout << "d_intro >  " << cfg.d_intro_threshold << ": " << n_gate
                      << " frames, mean translation error " << err_gate << " px\n";
            return 0;
        }
        if (ab->parsed()) {
            struct Variant {
                const char* name;
                std::vector<int> ids;
            };
            std::vector<Variant> variants{
                {"full", train_ids},
                {"first-20%", filter_first_fraction(train_ids, 0.2)},
                {"every-10th", filter_every_kth(train_ids, 10)},
            };
            for (auto& v : variants) {
                const std::string vdir = (fs::path(args.out_dir) / v.name).string();
                fs::create_directories(vdir);
                PipelineModels m = make_models(cfg);
                train_all_stages(m, data, v.ids, val_ids, cfg, vdir);
                ErrorStats e =
                    evaluate(m, data, test_ids, (fs::path(vdir) / "eval_frames.csv").string());
                print_stats(v.name, e);
            }
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingCheckpoint;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudgetViolation;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string w = e.what();
        return w.find("config") != std::string::npos ? kExitBadConfig : kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitContract;
    }
    return 0;
}

#include "crossloc/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace crossloc {

namespace {

using nlohmann::json;

template <typename T>
void pick(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json to_json_obj(const RunConfig& c) {
    return json{
        {"seed", c.seed},
        {"patch", c.patch},
        {"resolution", c.resolution},
        {"offset_budget_px", c.offset_budget_px},
        {"heading_budget_deg", c.heading_budget_deg},
        {"frames_train", c.frames_train},
        {"frames_val", c.frames_val},
        {"frames_test", c.frames_test},
        {"map_margin_px", c.map_margin_px},
        {"map_channels", c.map_channels},
        {"stack_step_deg", c.stack_step_deg},
        {"stack_half_range_deg", c.stack_half_range_deg},
        {"lr_rotation", c.lr_rotation},
        {"lr_generation", c.lr_generation},
        {"lr_embedding", c.lr_embedding},
        {"patience", c.patience},
        {"epochs_rotation", c.epochs_rotation},
        {"epochs_pretrain", c.epochs_pretrain},
        {"epochs_cross", c.epochs_cross},
        {"epochs_embed", c.epochs_embed},
        {"width_scale", c.width_scale},
        {"pretrain_shift_px", c.pretrain_shift_px},
        {"requery_shift_px", c.requery_shift_px},
        {"soft_peak_tau", c.soft_peak_tau},
        {"delta_x", c.delta_x},
        {"delta_y", c.delta_y},
        {"d_intro_threshold", c.d_intro_threshold},
    };
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    RunConfig c;
    pick(j, "seed", c.seed);
    pick(j, "patch", c.patch);
    pick(j, "resolution", c.resolution);
    pick(j, "offset_budget_px", c.offset_budget_px);
    pick(j, "heading_budget_deg", c.heading_budget_deg);
    pick(j, "frames_train", c.frames_train);
    pick(j, "frames_val", c.frames_val);
    pick(j, "frames_test", c.frames_test);
    pick(j, "map_margin_px", c.map_margin_px);
    pick(j, "map_channels", c.map_channels);
    pick(j, "stack_step_deg", c.stack_step_deg);
    pick(j, "stack_half_range_deg", c.stack_half_range_deg);
    pick(j, "lr_rotation", c.lr_rotation);
    pick(j, "lr_generation", c.lr_generation);
    pick(j, "lr_embedding", c.lr_embedding);
    pick(j, "patience", c.patience);
    pick(j, "epochs_rotation", c.epochs_rotation);
    pick(j, "epochs_pretrain", c.epochs_pretrain);
    pick(j, "epochs_cross", c.epochs_cross);
    pick(j, "epochs_embed", c.epochs_embed);
    pick(j, "width_scale", c.width_scale);
    pick(j, "pretrain_shift_px", c.pretrain_shift_px);
    pick(j, "requery_shift_px", c.requery_shift_px);
    pick(j, "soft_peak_tau", c.soft_peak_tau);
    pick(j, "delta_x", c.delta_x);
    pick(j, "delta_y", c.delta_y);
    pick(j, "d_intro_threshold", c.d_intro_threshold);
    if (c.resolution <= 0) throw std::runtime_error("config: resolution must be positive");
    if (c.patch <= 0) throw std::runtime_error("config: patch must be positive");
    if (c.stack_step_deg <= 0) throw std::runtime_error("config: stack_step_deg must be positive");
    return c;
}

std::string RunConfig::to_json() const { return to_json_obj(*this).dump(2); }

void RunConfig::write_resolved(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write resolved config " + path);
    f << to_json() << "\n";
}

}  // namespace crossloc

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "crossloc/layers.hpp"

namespace crossloc {

// Stop when the validation loss has risen for `patience` consecutive epochs.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // returns true when training should stop after this epoch
    bool update(double val_loss);

    double best() const { return best_; }
    int bad_epochs() const { return bad_; }

private:
    int patience_;
    double best_ = 0.0;
    double prev_ = 0.0;
    bool first_ = true;
    int bad_ = 0;
};

// Append-only CSV writer; the header is emitted once on open.
class CsvLogger {
public:
    CsvLogger() = default;
    CsvLogger(const std::string& path, const std::string& header);
    void row(const std::string& line);
    bool open() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

// Order-sensitive checksum of all parameter values; used to assert that
// frozen networks never move during a training step.
double param_checksum(const std::vector<nn::NamedParam<float>>& params);

// Deterministic per-purpose RNG: one master seed, decorrelated streams.
std::mt19937 seeded_rng(unsigned seed, unsigned stream);

}  // namespace crossloc

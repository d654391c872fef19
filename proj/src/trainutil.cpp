#include "crossloc/trainutil.hpp"

#include <cmath>
#include <stdexcept>

namespace crossloc {

bool EarlyStopper::update(double val_loss) {
    if (first_) {
        first_ = false;
        best_ = prev_ = val_loss;
        return false;
    }
    bad_ = val_loss > prev_ ? bad_ + 1 : 0;
    prev_ = val_loss;
    if (val_loss < best_) best_ = val_loss;
    return bad_ >= patience_;
}

CsvLogger::CsvLogger(const std::string& path, const std::string& header) {
    if (path.empty()) return;
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open csv " + path);
    out_ << header << "\n";
}

void CsvLogger::row(const std::string& line) {
    if (!out_.is_open()) return;
    out_ << line << "\n";
    out_.flush();
}

double param_checksum(const std::vector<nn::NamedParam<float>>& params) {
    double s = 0.0;
    std::size_t i = 1;
    for (const auto& p : params)
        for (float v : p.var->value.v) s += static_cast<double>(v) * static_cast<double>(i++ % 9973);
    return s;
}

std::mt19937 seeded_rng(unsigned seed, unsigned stream) {
    std::seed_seq seq{seed, stream};
    return std::mt19937(seq);
}

}  // namespace crossloc

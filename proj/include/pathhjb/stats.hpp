#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "json.hpp"

namespace pathhjb {

struct MeanStat {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Mean and standard error, shifted by the first sample so that a constant
// sample reproduces its value bit-exactly.
inline MeanStat mean_stat(std::span<const double> xs) {
    MeanStat out;
    out.n = xs.size();
    if (xs.empty()) {
        return out;
    }
    const double shift = xs.front();
    double acc = 0.0;
    for (double x : xs) {
        acc += x - shift;
    }
    out.mean = shift + acc / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            const double d = x - out.mean;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(xs.size() - 1);
        out.std_error = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return out;
}

inline void to_json(nlohmann::json& j, const MeanStat& s) {
    j = nlohmann::json{{"mean", s.mean}, {"std_error", s.std_error}, {"n", s.n}};
}

}  // namespace pathhjb

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "crackdet/errors.hpp"

namespace crackdet {

// Pixel buffers are row-major, flattened: index = y * width + x.
// All types are immutable by convention after construction; the free
// functions below are pure.

struct GrayImage {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd data;  // intensities in [0,1]

    int pixel_count() const { return width * height; }
    double at(int y, int x) const { return data[y * width + x]; }
};

struct GroundTruthMask {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd data;  // exactly 0 or 1

    int pixel_count() const { return width * height; }
    double at(int y, int x) const { return data[y * width + x]; }
};

struct ProbabilityMap {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd data;  // finite, in [0,1]

    int pixel_count() const { return width * height; }
    double at(int y, int x) const { return data[y * width + x]; }
};

struct BinaryMap {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd data;  // exactly 0 or 1

    int pixel_count() const { return width * height; }
    double at(int y, int x) const { return data[y * width + x]; }
};

// 256-bin probability histogram over [0,1]. [lo,hi] is the active bin range
// of the current region of interest; `total` counts only pixels inside it.
struct Histogram {
    static constexpr int kBins = 256;

    std::array<std::uint64_t, kBins> bins{};
    std::uint64_t total = 0;
    int lo = 0;
    int hi = kBins - 1;

    // Midpoint probability of bin i; region means are computed against these.
    static double bin_midpoint(int i) { return (i + 0.5) / kBins; }

    // Left edge of bin i (threshold value separating bins i-1 and i).
    static double bin_edge(int i) { return static_cast<double>(i) / kBins; }

    int occupied_bins() const {
        int n = 0;
        for (int i = lo; i <= hi; ++i)
            if (bins[i] > 0) ++n;
        return n;
    }
};

// Bin assignment: p in [i/256,(i+1)/256) -> i, except p == 1.0 -> 255.
inline int histogram_bin(double p) {
    int b = static_cast<int>(p * Histogram::kBins);
    return b > Histogram::kBins - 1 ? Histogram::kBins - 1 : b;
}

Histogram build_histogram(const ProbabilityMap& map);

// Same bins, but [lo,hi] (and total) narrowed to the given range.
Histogram restrict_histogram(const Histogram& h, int lo, int hi);

}  // namespace crackdet

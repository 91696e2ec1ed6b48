#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crackdet/image.hpp"

namespace crackdet {

struct Sample {
    std::string id;  // file stem
    GrayImage image;
    GroundTruthMask mask;
};

struct Dataset {
    std::vector<Sample> samples;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

// Directory of `<stem>.png` + `<stem>.mask.png` pairs, sorted by stem.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace crackdet

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crackdet::ad {

// HCKP container: magic "HCKP", version u32, then per-array records of
// {name length u16, name bytes, rank u8, dims u32 each, float64 payload},
// all little-endian.
struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> dims;
    Eigen::ArrayXd data;
};

void save_hckp(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_hckp(const std::filesystem::path& path);

}  // namespace crackdet::ad

// Regenerates the committed binary fixtures under tests/fixtures/. The golden
// tensors are tied to the build flags (-ffp-contract=off, no fast-math); if
// the toolchain changes, rerun this and re-commit.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "crackdet/network.hpp"
#include "crackdet/synthetic.hpp"

using namespace crackdet;

namespace {

void write_gray16_png(const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, fp);
    png_set_IHDR(png, info, 1, 1, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_byte row[2] = {0xff, 0xff};  // 65535, big-endian sample
    png_write_row(png, row);
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void write_doubles(const std::filesystem::path& path, const Eigen::ArrayXd& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const std::uint64_t n = static_cast<std::uint64_t>(data.size());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(8 * n));
}

}  // namespace

int main() {
    const std::filesystem::path dir = FIXTURE_DIR;
    std::filesystem::create_directories(dir);

    write_gray16_png(dir / "gray16.png");

    SyntheticSpec spec;
    spec.size = 64;
    spec.seed = 2025;
    const Sample fixture = synthesize_sample(spec, 0);

    net::NetworkConfig cfg;
    cfg.seed = 7;
    net::HcnnfpNetwork net(cfg);
    const net::ForwardOutputs out = net.forward(fixture.image);
    write_doubles(dir / "golden_forward.bin", out.fused_logits.data);

    net.save(dir / "golden_net.hckp");
    const ProbabilityMap map = net.infer(fixture.image);
    write_doubles(dir / "golden_infer.bin", map.data);

    std::cout << "fixtures written to " << dir << "\n";
    return 0;
}

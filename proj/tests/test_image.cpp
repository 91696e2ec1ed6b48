#include <doctest.h>

#include <fstream>

#include "crackdet/image.hpp"
#include "crackdet/image_io.hpp"
#include "test_support.hpp"

using namespace crackdet;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("pgm loads with linear normalization") {
    auto dir = testsup::scratch_dir("pgm");
    std::string pgm = "P5\n2 2\n255\n";
    pgm += '\0';
    pgm += static_cast<char>(255);
    pgm += static_cast<char>(128);
    pgm += static_cast<char>(64);
    write_bytes(dir / "a.pgm", pgm);

    GrayImage img = load_gray(dir / "a.pgm");
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.data[0] == 0.0);
    CHECK(img.data[1] == 1.0);
    CHECK(img.data[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
    CHECK(img.data[3] == doctest::Approx(64.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("16-bit pgm max value maps to 1") {
    auto dir = testsup::scratch_dir("pgm16");
    std::string pgm = "P5\n1 1\n65535\n";
    pgm += static_cast<char>(0xff);
    pgm += static_cast<char>(0xff);
    write_bytes(dir / "a.pgm", pgm);
    GrayImage img = load_gray(dir / "a.pgm");
    CHECK(img.data[0] == 1.0);
}

TEST_CASE("16-bit png fixture maps max value to 1") {
    // written by gen_fixtures: 1x1 16-bit grayscale PNG holding 65535
    const auto path = std::filesystem::path(FIXTURE_DIR) / "gray16.png";
    GrayImage img = load_gray(path);
    CHECK(img.width == 1);
    CHECK(img.height == 1);
    CHECK(img.data[0] == 1.0);
}

TEST_CASE("truncated png raises CorruptFile") {
    auto dir = testsup::scratch_dir("trunc");
    GrayImage img{4, 4, Eigen::ArrayXd::Constant(16, 0.5)};
    save_gray8(img, dir / "ok.png");

    std::ifstream in(dir / "ok.png", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    write_bytes(dir / "cut.png", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_gray(dir / "cut.png"), CorruptFile);
}

TEST_CASE("non-grayscale or missing input is rejected") {
    auto dir = testsup::scratch_dir("badfmt");
    CHECK_THROWS_AS(load_gray(dir / "missing.png"), IoFailure);
    write_bytes(dir / "noise.png", "this is not a png at all");
    CHECK_THROWS_AS(load_gray(dir / "noise.png"), UnsupportedFormat);
}

TEST_CASE("qpm round trip is exact") {
    auto dir = testsup::scratch_dir("qpm");
    ProbabilityMap map;
    map.width = 1;
    map.height = 2;
    map.data.resize(2);
    map.data << 0.25, 0.75;
    save_probability_map(map, dir / "m.qpm");

    ProbabilityMap back = load_probability_map(dir / "m.qpm");
    CHECK(back.width == 1);
    CHECK(back.height == 2);
    CHECK(back.data[0] == 0.25);
    CHECK(back.data[1] == 0.75);

    // second round trip of float32-representable data is bit-exact
    save_probability_map(back, dir / "m2.qpm");
    std::ifstream a(dir / "m.qpm", std::ios::binary), b(dir / "m2.qpm", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("qpm NaN payload is rejected") {
    auto dir = testsup::scratch_dir("qpmnan");
    std::string bytes = "QPM1";
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes += static_cast<char>(v >> (8 * i));
    };
    u32(1);
    u32(1);
    u32(0);
    u32(0x7fc00000u);  // quiet NaN
    write_bytes(dir / "nan.qpm", bytes);
    CHECK_THROWS_AS(load_probability_map(dir / "nan.qpm"), NonFiniteValue);
}

TEST_CASE("png probability ingestion divides by format max") {
    auto dir = testsup::scratch_dir("pngprob");
    GrayImage img{1, 1, Eigen::ArrayXd::Constant(1, 51.0 / 255.0)};
    save_gray8(img, dir / "p.png");
    ProbabilityMap map = load_probability_map(dir / "p.png");
    CHECK(map.data[0] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("binary map save/load round trip") {
    auto dir = testsup::scratch_dir("binmap");
    BinaryMap map{2, 1, Eigen::ArrayXd(2)};
    map.data << 1.0, 0.0;
    save_binary_map(map, dir / "b.png");

    GrayImage raw = load_gray(dir / "b.png");
    CHECK(raw.data[0] == 1.0);  // crack = 255
    CHECK(raw.data[1] == 0.0);

    GroundTruthMask mask = load_mask(dir / "b.png");
    CHECK(mask.data[0] == 1.0);
    CHECK(mask.data[1] == 0.0);

    CHECK_THROWS_AS(save_binary_map(map, "/nonexistent-dir/x.png"), IoFailure);
}

TEST_CASE("histogram bin assignment and boundaries") {
    ProbabilityMap m{2, 2, Eigen::ArrayXd::Zero(4)};
    Histogram h = build_histogram(m);
    CHECK(h.bins[0] == 4);
    CHECK(h.total == 4);
    CHECK(h.lo == 0);
    CHECK(h.hi == 255);

    m.data << 1.0, 0.999, 0.5, 0.0;
    h = build_histogram(m);
    CHECK(h.bins[255] == 2);  // 1.0 closed at the top, 0.999 lands in bin 255
    CHECK(h.bins[128] == 1);
    CHECK(h.bins[0] == 1);
}

TEST_CASE("histogram mass conservation against per-pixel recount") {
    Rng rng(42);
    ProbabilityMap m = testsup::random_map(100, 100, rng);
    Histogram h = build_histogram(m);

    std::uint64_t total = 0;
    for (auto b : h.bins) total += b;
    CHECK(total == 10000);
    CHECK(h.total == 10000);

    // independent recount per bin
    for (int bin = 0; bin < 256; ++bin) {
        std::uint64_t count = 0;
        for (Eigen::Index i = 0; i < m.data.size(); ++i) {
            const double p = m.data[i];
            const bool in_bin = bin == 255 ? (p >= 255.0 / 256.0 && p <= 1.0)
                                           : (p >= bin / 256.0 && p < (bin + 1) / 256.0);
            if (in_bin) ++count;
        }
        CHECK(h.bins[bin] == count);
    }
}

TEST_CASE("bin assignment is total on [0,1]") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double p = rng.uniform();
        const int b = histogram_bin(p);
        CHECK(b >= 0);
        CHECK(b <= 255);
    }
    CHECK(histogram_bin(1.0) == 255);
    CHECK(histogram_bin(0.0) == 0);
}

TEST_CASE("non-finite map is rejected") {
    ProbabilityMap m{1, 1, Eigen::ArrayXd(1)};
    m.data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(build_histogram(m), NonFiniteValue);
}

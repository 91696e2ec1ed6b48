#include "crackdet/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace crackdet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_fn(png_structp png, png_const_charp msg) {
    // jump back to the setjmp in the caller
    (void)msg;
    longjmp(png_jmpbuf(png), 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct PngGray {
    int width = 0, height = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> pixels;  // native values, 0..maxval
};

PngGray read_png_gray(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoFailure("cannot open " + path.string());

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw UnsupportedFormat("not a PNG file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw IoFailure("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoFailure("png_create_info_struct failed");
    }

    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> raw;
    PngGray out;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw CorruptFile("corrupt PNG: " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw UnsupportedFormat("PNG is not single-channel grayscale: " + path.string());
    }
    if (out.bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        out.bit_depth = 8;
    }
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.resize(stride * out.height);
    row_ptrs.resize(out.height);
    for (int y = 0; y < out.height; ++y) row_ptrs[y] = raw.data() + y * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
    if (out.bit_depth == 8) {
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.pixels[y * out.width + x] = raw[y * stride + x];
    } else {
        // PNG stores 16-bit samples big-endian
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                const png_byte* p = &raw[y * stride + 2 * x];
                out.pixels[y * out.width + x] = static_cast<std::uint16_t>((p[0] << 8) | p[1]);
            }
    }
    return out;
}

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoFailure("cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw IoFailure("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoFailure("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoFailure("PNG write failed: " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

struct PgmData {
    int width = 0, height = 0, maxval = 255;
    std::vector<std::uint16_t> pixels;
};

int pgm_next_token(std::istream& in) {
    // skips whitespace and '#' comments, returns a non-negative integer
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    if (!in || v < 0) throw CorruptFile("malformed PGM header");
    return v;
}

PgmData read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '2')) throw UnsupportedFormat("not a PGM file: " + path.string());
    const bool binary = (m1 == '5');

    PgmData d;
    d.width = pgm_next_token(in);
    d.height = pgm_next_token(in);
    d.maxval = pgm_next_token(in);
    if (d.width <= 0 || d.height <= 0 || (d.maxval != 255 && d.maxval != 65535))
        throw UnsupportedFormat("PGM maxval must be 255 or 65535");

    const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
    d.pixels.resize(n);
    if (binary) {
        in.get();  // single whitespace after maxval
        if (d.maxval == 255) {
            std::vector<std::uint8_t> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
            if (static_cast<std::size_t>(in.gcount()) != n) throw CorruptFile("truncated PGM: " + path.string());
            for (std::size_t i = 0; i < n; ++i) d.pixels[i] = buf[i];
        } else {
            std::vector<std::uint8_t> buf(2 * n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
            if (static_cast<std::size_t>(in.gcount()) != 2 * n) throw CorruptFile("truncated PGM: " + path.string());
            for (std::size_t i = 0; i < n; ++i)
                d.pixels[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            int v = pgm_next_token(in);
            if (v > d.maxval) throw CorruptFile("PGM sample exceeds maxval");
            d.pixels[i] = static_cast<std::uint16_t>(v);
        }
    }
    return d;
}

bool has_ext(const std::filesystem::path& p, const char* ext) {
    auto e = p.extension().string();
    for (auto& c : e) c = static_cast<char>(std::tolower(c));
    return e == ext;
}

GrayImage gray_from_pixels(int width, int height, const std::vector<std::uint16_t>& px, double maxval) {
    GrayImage img;
    img.width = width;
    img.height = height;
    img.data.resize(static_cast<Eigen::Index>(width) * height);
    for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = px[i] / maxval;
    return img;
}

constexpr char kQpmMagic[4] = {'Q', 'P', 'M', '1'};

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

bool is_qpm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::memcmp(magic, kQpmMagic, 4) == 0;
}

ProbabilityMap load_qpm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    unsigned char header[16];
    in.read(reinterpret_cast<char*>(header), 16);
    if (in.gcount() != 16 || std::memcmp(header, kQpmMagic, 4) != 0)
        throw CorruptFile("bad QPM1 header: " + path.string());
    const std::uint32_t width = read_u32_le(header + 4);
    const std::uint32_t height = read_u32_le(header + 8);
    if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20))
        throw CorruptFile("implausible QPM1 dimensions: " + path.string());

    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> payload(4 * n);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size())
        throw CorruptFile("truncated QPM1 payload: " + path.string());

    ProbabilityMap map;
    map.width = static_cast<int>(width);
    map.height = static_cast<int>(height);
    map.data.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = read_u32_le(payload.data() + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        if (std::isnan(f)) throw NonFiniteValue("QPM1 payload contains NaN: " + path.string());
        double v = static_cast<double>(f);
        map.data[static_cast<Eigen::Index>(i)] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
    return map;
}

}  // namespace

GrayImage load_gray(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoFailure("no such file: " + path.string());
    if (has_ext(path, ".pgm")) {
        PgmData d = read_pgm(path);
        return gray_from_pixels(d.width, d.height, d.pixels, d.maxval);
    }
    PngGray g = read_png_gray(path);
    return gray_from_pixels(g.width, g.height, g.pixels, g.bit_depth == 16 ? 65535.0 : 255.0);
}

ProbabilityMap load_probability_map(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoFailure("no such file: " + path.string());
    if (has_ext(path, ".qpm") || is_qpm_file(path)) return load_qpm(path);
    GrayImage img = load_gray(path);
    ProbabilityMap map;
    map.width = img.width;
    map.height = img.height;
    map.data = std::move(img.data);  // already normalized into [0,1]
    return map;
}

void save_probability_map(const ProbabilityMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open for writing: " + path.string());
    out.write(kQpmMagic, 4);
    write_u32_le(out, static_cast<std::uint32_t>(map.width));
    write_u32_le(out, static_cast<std::uint32_t>(map.height));
    write_u32_le(out, 0);
    for (Eigen::Index i = 0; i < map.data.size(); ++i) {
        double v = map.data[i];
        if (!std::isfinite(v)) throw NonFiniteValue("probability map contains non-finite value");
        float f = static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32_le(out, bits);
    }
    if (!out.flush()) throw IoFailure("write failed: " + path.string());
}

void save_binary_map(const BinaryMap& map, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(map.width) * map.height);
    for (Eigen::Index i = 0; i < map.data.size(); ++i)
        px[static_cast<std::size_t>(i)] = map.data[i] != 0.0 ? 255 : 0;
    write_png_gray8(path, map.width, map.height, px);
}

void save_gray8(const GrayImage& image, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(image.width) * image.height);
    for (Eigen::Index i = 0; i < image.data.size(); ++i) {
        double v = image.data[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        px[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    write_png_gray8(path, image.width, image.height, px);
}

GroundTruthMask load_mask(const std::filesystem::path& path) {
    GrayImage img = load_gray(path);
    GroundTruthMask mask;
    mask.width = img.width;
    mask.height = img.height;
    mask.data.resize(img.data.size());
    for (Eigen::Index i = 0; i < img.data.size(); ++i) {
        double v = img.data[i];
        if (v != 0.0 && v != 1.0)
            throw DataError("mask is not binary (pixel " + std::to_string(i) + "): " + path.string());
        mask.data[i] = v;
    }
    return mask;
}

}  // namespace crackdet

#include "crackdet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "crackdet/errors.hpp"

namespace crackdet::ad {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

bool get_bytes(std::istream& in, void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint16_t u16_le(const unsigned char* b) { return static_cast<std::uint16_t>(b[0] | (b[1] << 8)); }

std::uint32_t u32_le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double f64_le(const unsigned char* b) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_hckp(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    for (const NamedArray& a : arrays) {
        if (a.name.size() > 0xffff) throw IoFailure("checkpoint array name too long");
        if (a.dims.size() > 0xff) throw IoFailure("checkpoint array rank too large");
        std::uint64_t count = 1;
        for (std::uint32_t d : a.dims) count *= d;
        if (count != static_cast<std::uint64_t>(a.data.size()))
            throw IoFailure("checkpoint dims do not match payload for " + a.name);
        put_u16(out, static_cast<std::uint16_t>(a.name.size()));
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        out.put(static_cast<char>(a.dims.size()));
        for (std::uint32_t d : a.dims) put_u32(out, d);
        for (Eigen::Index i = 0; i < a.data.size(); ++i) put_f64(out, a.data[i]);
    }
    if (!out.flush()) throw IoFailure("write failed: " + path.string());
}

std::vector<NamedArray> load_hckp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    unsigned char header[8];
    if (!get_bytes(in, header, 8) || std::memcmp(header, kMagic, 4) != 0)
        throw CorruptFile("bad HCKP header: " + path.string());
    if (u32_le(header + 4) != kVersion)
        throw CorruptFile("unsupported HCKP version in " + path.string());

    std::vector<NamedArray> arrays;
    while (true) {
        unsigned char lenb[2];
        in.read(reinterpret_cast<char*>(lenb), 2);
        if (in.gcount() == 0) break;  // clean EOF
        if (in.gcount() != 2) throw CorruptFile("truncated HCKP record: " + path.string());
        const std::uint16_t name_len = u16_le(lenb);

        NamedArray a;
        a.name.resize(name_len);
        if (!get_bytes(in, a.name.data(), name_len)) throw CorruptFile("truncated HCKP name");
        unsigned char rank;
        if (!get_bytes(in, &rank, 1)) throw CorruptFile("truncated HCKP rank");
        a.dims.resize(rank);
        std::uint64_t count = 1;
        for (int i = 0; i < rank; ++i) {
            unsigned char db[4];
            if (!get_bytes(in, db, 4)) throw CorruptFile("truncated HCKP dims");
            a.dims[i] = u32_le(db);
            count *= a.dims[i];
        }
        if (count > (1ull << 32)) throw CorruptFile("implausible HCKP array size");
        a.data.resize(static_cast<Eigen::Index>(count));
        std::vector<unsigned char> payload(8 * count);
        if (!get_bytes(in, payload.data(), payload.size())) throw CorruptFile("truncated HCKP payload");
        for (std::uint64_t i = 0; i < count; ++i)
            a.data[static_cast<Eigen::Index>(i)] = f64_le(payload.data() + 8 * i);
        arrays.push_back(std::move(a));
    }
    return arrays;
}

}  // namespace crackdet::ad

#include "fan/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fan {

namespace {

// Host is assumed little-endian (x86/aarch64); format is little-endian.
template <typename T>
void write_le(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("unexpected end of tensor stream");
    return v;
}

} // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write("FANT", 4);
    write_le<uint8_t>(os, static_cast<uint8_t>(t.precision()));
    write_le<uint8_t>(os, static_cast<uint8_t>(t.rank()));
    for (size_t d : t.shape()) write_le<uint64_t>(os, d);
    if (t.precision() == Precision::F32) {
        for (size_t i = 0; i < t.size(); ++i)
            write_le<float>(os, static_cast<float>(t[i]));
    } else {
        for (size_t i = 0; i < t.size(); ++i) write_le<double>(os, t[i]);
    }
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FANT", 4) != 0)
        throw std::runtime_error("bad tensor magic");
    auto prec = static_cast<Precision>(read_le<uint8_t>(is));
    if (prec != Precision::F32 && prec != Precision::F64)
        throw std::runtime_error("bad tensor precision code");
    size_t rank = read_le<uint8_t>(is);
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = static_cast<size_t>(read_le<uint64_t>(is));
    Tensor t(shape, prec);
    if (prec == Precision::F32) {
        for (size_t i = 0; i < t.size(); ++i) t[i] = read_le<float>(is);
    } else {
        for (size_t i = 0; i < t.size(); ++i) t[i] = read_le<double>(is);
    }
    return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return read_tensor(is);
}

void save_image(const std::string& path, const Tensor& img) {
    if (img.rank() != 3)
        throw std::invalid_argument("image must be C x H x W, got " + img.shape_str());
    const size_t C = img.shape()[0], H = img.shape()[1], W = img.shape()[2];
    if (C != 1 && C != 3)
        throw std::invalid_argument("image must have 1 or 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << (C == 1 ? "P5" : "P6") << "\n" << W << " " << H << "\n255\n";
    for (size_t i = 0; i < H; ++i)
        for (size_t j = 0; j < W; ++j)
            for (size_t c = 0; c < C; ++c) {
                double v = std::clamp(img.at3(c, i, j), 0.0, 1.0);
                auto b = static_cast<uint8_t>(std::lround(v * 255.0));
                os.put(static_cast<char>(b));
            }
}

Tensor load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    is >> magic;
    size_t C;
    if (magic == "P5") C = 1;
    else if (magic == "P6") C = 3;
    else throw std::runtime_error("unsupported image magic: " + magic);
    size_t W, H, maxval;
    is >> W >> H >> maxval;
    if (maxval != 255) throw std::runtime_error("only 8-bit images supported");
    is.get(); // single whitespace after header
    Tensor img({C, H, W});
    for (size_t i = 0; i < H; ++i)
        for (size_t j = 0; j < W; ++j)
            for (size_t c = 0; c < C; ++c) {
                int b = is.get();
                if (b < 0) throw std::runtime_error("truncated image: " + path);
                img.at3(c, i, j) = static_cast<double>(b) / 255.0;
            }
    return img;
}

} // namespace fan

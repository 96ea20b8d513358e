#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ctf/errors.hpp"

namespace ctf {

// Grayscale image, row-major doubles in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

    double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

    std::size_t size() const { return pixels.size(); }

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width;
    }

    void clamp01() {
        for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
    }
};

inline double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b))
        throw ShapeError("mse: image shapes differ (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width) + ")");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = a.pixels[i] - b.pixels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.pixels.size());
}

// ---- PGM (P5, 8-bit) ----

inline void write_pgm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        double v = std::clamp(img.pixels[i], 0.0, 1.0);
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_pgm: write failed for " + path.string());
}

inline Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw FormatError("read_pgm: not a P5 file: " + path.string());
    auto next_token = [&in, &path]() {
        // skip whitespace and '#' comment lines
        int ch;
        while ((ch = in.peek()) != EOF) {
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in) throw FormatError("read_pgm: bad header in " + path.string());
        return v;
    };
    long w = next_token();
    long h = next_token();
    long maxval = next_token();
    if (w <= 0 || h <= 0 || maxval != 255)
        throw FormatError("read_pgm: unsupported header in " + path.string());
    in.get(); // single whitespace after maxval
    Image img(static_cast<int>(h), static_cast<int>(w));
    std::vector<std::uint8_t> bytes(img.pixels.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError("read_pgm: truncated pixel data in " + path.string());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
    return img;
}

} // namespace ctf

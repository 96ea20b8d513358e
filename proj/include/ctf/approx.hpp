#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "ctf/errors.hpp"
#include "ctf/image.hpp"
#include "ctf/sequence.hpp"

namespace ctf {

inline double psnr(const Image& a, const Image& b) {
    double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

// ---- block-DCT quality codec ----

struct QuantTable {
    std::array<int, 64> values{};

    int at(int u, int v) const { return values[static_cast<std::size_t>(u * 8 + v)]; }

    void validate() const {
        for (int v : values)
            if (v < 1 || v > 255)
                throw ParamError("quant table: entry " + std::to_string(v) +
                                 " outside [1,255]");
    }
};

// JPEG Annex K luminance table.
inline const QuantTable& base_luminance_table() {
    static const QuantTable table = {{16, 11, 10, 16, 24,  40,  51,  61,  //
                                      12, 12, 14, 19, 26,  58,  60,  55,  //
                                      14, 13, 16, 24, 40,  57,  69,  56,  //
                                      14, 17, 22, 29, 51,  87,  80,  62,  //
                                      18, 22, 37, 56, 68,  109, 103, 77,  //
                                      24, 35, 55, 64, 81,  104, 113, 92,  //
                                      49, 64, 78, 87, 103, 121, 120, 101, //
                                      72, 92, 95, 98, 112, 100, 103, 99}};
    return table;
}

// IJG quality scaling: S = 5000/q below 50, else 200-2q, applied as
// entry' = clamp(floor((entry*S + 50)/100), 1, 255).
inline QuantTable scale_quant_table(int quality, const QuantTable& base = base_luminance_table()) {
    if (quality < 1 || quality > 100)
        throw ParamError("quality must be in [1,100], got " + std::to_string(quality));
    int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    QuantTable out;
    for (std::size_t i = 0; i < 64; ++i) {
        int v = (base.values[i] * s + 50) / 100;
        out.values[i] = std::clamp(v, 1, 255);
    }
    return out;
}

namespace detail {

// Orthonormal type-II DCT basis: C(k,n) = alpha(k) cos((2n+1) k pi / 16).
inline const std::array<double, 64>& dct_basis() {
    static const std::array<double, 64> basis = [] {
        std::array<double, 64> c{};
        const double pi = 3.14159265358979323846;
        for (int k = 0; k < 8; ++k) {
            double alpha = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n)
                c[static_cast<std::size_t>(k * 8 + n)] =
                    alpha * std::cos((2 * n + 1) * k * pi / 16.0);
        }
        return c;
    }();
    return basis;
}

} // namespace detail

// F = C * B * C^T over one 8x8 block (row-major arrays).
inline void dct8_forward(const double block[64], double coeffs[64]) {
    const auto& c = detail::dct_basis();
    double tmp[64];
    for (int k = 0; k < 8; ++k)
        for (int n = 0; n < 8; ++n) {
            double acc = 0.0;
            for (int j = 0; j < 8; ++j) acc += c[static_cast<std::size_t>(k * 8 + j)] * block[j * 8 + n];
            tmp[k * 8 + n] = acc;
        }
    for (int k = 0; k < 8; ++k)
        for (int l = 0; l < 8; ++l) {
            double acc = 0.0;
            for (int j = 0; j < 8; ++j) acc += tmp[k * 8 + j] * c[static_cast<std::size_t>(l * 8 + j)];
            coeffs[k * 8 + l] = acc;
        }
}

// B = C^T * F * C
inline void dct8_inverse(const double coeffs[64], double block[64]) {
    const auto& c = detail::dct_basis();
    double tmp[64];
    for (int n = 0; n < 8; ++n)
        for (int l = 0; l < 8; ++l) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += c[static_cast<std::size_t>(k * 8 + n)] * coeffs[k * 8 + l];
            tmp[n * 8 + l] = acc;
        }
    for (int n = 0; n < 8; ++n)
        for (int m = 0; m < 8; ++m) {
            double acc = 0.0;
            for (int l = 0; l < 8; ++l) acc += tmp[n * 8 + l] * c[static_cast<std::size_t>(l * 8 + m)];
            block[n * 8 + m] = acc;
        }
}

namespace detail {

inline Image pad_to_multiple_of_8(const Image& img) {
    int ph = (img.height + 7) / 8 * 8;
    int pw = (img.width + 7) / 8 * 8;
    Image out(ph, pw);
    for (int r = 0; r < ph; ++r)
        for (int c = 0; c < pw; ++c)
            out.at(r, c) = img.at(std::min(r, img.height - 1), std::min(c, img.width - 1));
    return out;
}

} // namespace detail

// One quantization round-trip: blockwise DCT on 128-centered 0..255 values,
// quantize/dequantize with the scaled table, inverse DCT, clamp.
inline Image jpeg_roundtrip(const Image& img, int quality) {
    QuantTable table = scale_quant_table(quality);
    Image padded = detail::pad_to_multiple_of_8(img);
    Image out(img.height, img.width);
    double block[64], coeffs[64];
    for (int br = 0; br < padded.height; br += 8) {
        for (int bc = 0; bc < padded.width; bc += 8) {
            for (int r = 0; r < 8; ++r)
                for (int c = 0; c < 8; ++c)
                    block[r * 8 + c] = padded.at(br + r, bc + c) * 255.0 - 128.0;
            dct8_forward(block, coeffs);
            for (int i = 0; i < 64; ++i) {
                double step = static_cast<double>(table.values[static_cast<std::size_t>(i)]);
                coeffs[i] = std::round(coeffs[i] / step) * step;
            }
            dct8_inverse(coeffs, block);
            for (int r = 0; r < 8; ++r) {
                if (br + r >= img.height) break;
                for (int c = 0; c < 8 && bc + c < img.width; ++c)
                    out.at(br + r, bc + c) =
                        std::clamp((block[r * 8 + c] + 128.0) / 255.0, 0.0, 1.0);
            }
        }
    }
    return out;
}

inline std::vector<int> default_jpeg_qualities() {
    return {1, 2, 4, 6, 8, 12, 16, 32, 64, 95};
}

inline CtfSequence jpeg_ladder(const Image& img, const std::vector<int>& qualities =
                                                     default_jpeg_qualities(),
                               long source_index = -1) {
    if (qualities.empty()) throw ParamError("jpeg_ladder: empty quality list");
    CtfSequence seq;
    seq.method = DecompositionMethod::jpeg;
    seq.source_index = source_index;
    for (int q : qualities) {
        seq.levels.push_back(jpeg_roundtrip(img, q));
        seq.level_params.push_back(static_cast<double>(q));
    }
    return seq;
}

// ---- Gaussian smoothing ladder ----

inline std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) throw ParamError("gaussian kernel: sigma must be positive");
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

inline Image gaussian_blur(const Image& img, double sigma) {
    std::vector<double> kernel = gaussian_kernel(sigma);
    int radius = (static_cast<int>(kernel.size()) - 1) / 2;
    Image tmp(img.height, img.width), out(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       img.at(r, std::clamp(c + i, 0, img.width - 1));
            tmp.at(r, c) = acc;
        }
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       tmp.at(std::clamp(r + i, 0, img.height - 1), c);
            out.at(r, c) = std::clamp(acc, 0.0, 1.0);
        }
    return out;
}

inline std::vector<double> default_gaussian_sigmas() {
    return {10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
}

inline CtfSequence gaussian_ladder(const Image& img, const std::vector<double>& sigmas =
                                                         default_gaussian_sigmas(),
                                   long source_index = -1) {
    if (sigmas.empty()) throw ParamError("gaussian_ladder: empty sigma list");
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (sigmas[i] <= 0.0) throw ParamError("gaussian_ladder: sigma must be positive");
        if (i > 0 && sigmas[i] >= sigmas[i - 1])
            throw ParamError("gaussian_ladder: sigmas must be strictly descending");
    }
    CtfSequence seq;
    seq.method = DecompositionMethod::gaussian;
    seq.source_index = source_index;
    for (double s : sigmas) {
        seq.levels.push_back(gaussian_blur(img, s));
        seq.level_params.push_back(s);
    }
    return seq;
}

} // namespace ctf

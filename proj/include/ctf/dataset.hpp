#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ctf/csv.hpp"
#include "ctf/errors.hpp"
#include "ctf/image.hpp"
#include "ctf/random.hpp"

namespace ctf {

struct LabeledDataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::uint64_t seed = 0;

    std::size_t size() const { return images.size(); }
    int n_classes() const { return static_cast<int>(class_names.size()); }

    void validate() const {
        if (images.size() != labels.size())
            throw ConsistencyError("dataset: image/label counts differ");
        for (int l : labels)
            if (l < 0 || l >= n_classes())
                throw ConsistencyError("dataset: label " + std::to_string(l) +
                                       " outside [0," + std::to_string(n_classes()) + ")");
    }
};

// ---- synthetic shape generator ----

namespace detail {

// Each class is one parametric shape family drawn with pose, scale and
// contrast jitter plus pixel noise. Classes 16..31 reuse the families with
// inverted polarity (dark shape on bright ground).
constexpr int kShapeKinds = 16;

inline const char* shape_kind_name(int kind) {
    static const std::array<const char*, kShapeKinds> names = {
        "disk",    "ring",    "hbar",   "vbar", "plus",    "xcross",
        "boxline", "diamond", "hstripe", "vstripe", "checker", "dots",
        "slash",   "corner",  "tee",    "triangle"};
    return names[static_cast<std::size_t>(kind)];
}

// mask in [0,1]: 1 inside the shape. (r, c) are offsets from the shape
// center in units of the half-extent R; (row, col) are absolute pixels for
// the texture families whose pitch is fixed in pixel units.
inline double shape_mask(int kind, double r, double c, int row, int col, double pitch) {
    const double box = std::max(std::abs(r), std::abs(c));
    switch (kind) {
        case 0: return (r * r + c * c <= 1.0) ? 1.0 : 0.0;
        case 1: {
            double d = std::sqrt(r * r + c * c);
            return (d >= 0.55 && d <= 1.0) ? 1.0 : 0.0;
        }
        case 2: return (std::abs(r) <= 0.30 && std::abs(c) <= 1.0) ? 1.0 : 0.0;
        case 3: return (std::abs(c) <= 0.30 && std::abs(r) <= 1.0) ? 1.0 : 0.0;
        case 4:
            return ((std::abs(r) <= 0.26 && std::abs(c) <= 1.0) ||
                    (std::abs(c) <= 0.26 && std::abs(r) <= 1.0))
                       ? 1.0
                       : 0.0;
        case 5:
            return (box <= 1.0 &&
                    (std::abs(r - c) <= 0.38 || std::abs(r + c) <= 0.38))
                       ? 1.0
                       : 0.0;
        case 6: return (box >= 0.62 && box <= 1.0) ? 1.0 : 0.0;
        case 7: return (std::abs(r) + std::abs(c) <= 1.0) ? 1.0 : 0.0;
        case 8:
            return (box <= 1.0 && (static_cast<int>(std::floor(row / pitch)) % 2 == 0))
                       ? 1.0
                       : 0.0;
        case 9:
            return (box <= 1.0 && (static_cast<int>(std::floor(col / pitch)) % 2 == 0))
                       ? 1.0
                       : 0.0;
        case 10:
            return (box <= 1.0 && ((static_cast<int>(std::floor(row / pitch)) +
                                    static_cast<int>(std::floor(col / pitch))) %
                                       2 ==
                                   0))
                       ? 1.0
                       : 0.0;
        case 11: {
            if (box > 1.0) return 0.0;
            double period = 2.0 * pitch;
            double rr = row - period * std::round(row / period);
            double cc = col - period * std::round(col / period);
            return (rr * rr + cc * cc <= pitch * pitch * 0.64) ? 1.0 : 0.0;
        }
        case 12: return (box <= 1.0 && std::abs(r + c) <= 0.40) ? 1.0 : 0.0;
        case 13:
            return ((std::abs(c + 0.65) <= 0.26 && std::abs(r) <= 1.0) ||
                    (std::abs(r - 0.65) <= 0.26 && std::abs(c) <= 1.0))
                       ? 1.0
                       : 0.0;
        case 14:
            return ((std::abs(r + 0.65) <= 0.26 && std::abs(c) <= 1.0) ||
                    (std::abs(c) <= 0.26 && std::abs(r) <= 1.0))
                       ? 1.0
                       : 0.0;
        case 15:
            return (r >= -1.0 && r <= 1.0 && std::abs(c) <= 0.5 * (r + 1.0)) ? 1.0 : 0.0;
        default: return 0.0;
    }
}

inline Image render_shape(int class_index, int size, Rng& rng) {
    const int kind = class_index % kShapeKinds;
    const bool inverted = class_index >= kShapeKinds;

    const double background = rng.uniform(0.12, 0.28);
    const double amplitude = rng.uniform(0.40, 0.68);
    const double half = 0.5 * (size - 1);
    const double cx = half + rng.uniform(-0.09, 0.09) * size;
    const double cy = half + rng.uniform(-0.09, 0.09) * size;
    const double radius = 0.34 * size * rng.uniform(0.75, 1.12);
    const double pitch = std::max(1.0, std::round(size / 14.0)); // texture pitch, px
    const double noise_sigma = 0.06;

    Image img(size, size);
    for (int row = 0; row < size; ++row) {
        for (int col = 0; col < size; ++col) {
            double r = (row - cy) / radius;
            double c = (col - cx) / radius;
            double m = shape_mask(kind, r, c, row, col, pitch);
            double v = inverted ? background + amplitude * (1.0 - m)
                                : background + amplitude * m;
            v += noise_sigma * rng.normal();
            img.at(row, col) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

} // namespace detail

inline LabeledDataset generate_synthetic(int n_classes, int per_class, int size,
                                         std::uint64_t seed) {
    if (n_classes < 2 || n_classes > 32)
        throw ParamError("generate_synthetic: n_classes must be in [2,32], got " +
                         std::to_string(n_classes));
    if (size < 16 || size > 64)
        throw ParamError("generate_synthetic: size must be in [16,64], got " +
                         std::to_string(size));
    if (per_class < 10)
        throw ParamError("generate_synthetic: per_class must be >= 10, got " +
                         std::to_string(per_class));

    LabeledDataset ds;
    ds.seed = seed;
    ds.class_names.reserve(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        std::string name = detail::shape_kind_name(c % detail::kShapeKinds);
        if (c >= detail::kShapeKinds) name += "_inv";
        ds.class_names.push_back(name);
    }
    ds.images.reserve(static_cast<std::size_t>(n_classes) * per_class);
    ds.labels.reserve(static_cast<std::size_t>(n_classes) * per_class);
    for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            // independent stream per image: order of generation is immaterial
            Rng rng(derive_seed(seed, "img/" + std::to_string(c) + "/" + std::to_string(i)));
            ds.images.push_back(detail::render_shape(c, size, rng));
            ds.labels.push_back(c);
        }
    }
    return ds;
}

// ---- IDX container ----

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw IoError("idx: truncated " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace detail

inline LabeledDataset load_idx(const std::filesystem::path& images_path,
                               const std::filesystem::path& labels_path) {
    std::ifstream img_in(images_path, std::ios::binary);
    if (!img_in) throw IoError("load_idx: cannot open " + images_path.string());
    std::uint32_t magic = detail::read_be_u32(img_in, "image magic");
    if (magic != 0x00000803u)
        throw FormatError("load_idx: bad image magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", magic);
            return std::string(buf);
        }() + " in " + images_path.string());
    std::uint32_t count = detail::read_be_u32(img_in, "image count");
    std::uint32_t rows = detail::read_be_u32(img_in, "row count");
    std::uint32_t cols = detail::read_be_u32(img_in, "column count");
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
        throw FormatError("load_idx: implausible image dimensions " + std::to_string(rows) +
                          "x" + std::to_string(cols));

    std::ifstream lbl_in(labels_path, std::ios::binary);
    if (!lbl_in) throw IoError("load_idx: cannot open " + labels_path.string());
    std::uint32_t lbl_magic = detail::read_be_u32(lbl_in, "label magic");
    if (lbl_magic != 0x00000801u)
        throw FormatError("load_idx: bad label magic in " + labels_path.string());
    std::uint32_t lbl_count = detail::read_be_u32(lbl_in, "label count");
    if (lbl_count != count)
        throw ConsistencyError("load_idx: " + std::to_string(count) + " images but " +
                               std::to_string(lbl_count) + " labels");

    LabeledDataset ds;
    const std::size_t pixels_per_image = std::size_t(rows) * cols;
    std::vector<std::uint8_t> buf(pixels_per_image);
    ds.images.reserve(count);
    for (std::uint32_t n = 0; n < count; ++n) {
        img_in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size()));
        if (img_in.gcount() != static_cast<std::streamsize>(buf.size()))
            throw IoError("load_idx: truncated image data at image " + std::to_string(n));
        Image img(static_cast<int>(rows), static_cast<int>(cols));
        for (std::size_t i = 0; i < pixels_per_image; ++i)
            img.pixels[i] = static_cast<double>(buf[i]) / 255.0;
        ds.images.push_back(std::move(img));
    }
    std::vector<std::uint8_t> lbl_buf(count);
    lbl_in.read(reinterpret_cast<char*>(lbl_buf.data()),
                static_cast<std::streamsize>(lbl_buf.size()));
    if (lbl_in.gcount() != static_cast<std::streamsize>(lbl_buf.size()))
        throw IoError("load_idx: truncated label data");
    int max_label = 0;
    for (std::uint8_t b : lbl_buf) max_label = std::max(max_label, static_cast<int>(b));
    for (int c = 0; c <= max_label; ++c) ds.class_names.push_back("class" + std::to_string(c));
    ds.labels.assign(lbl_buf.begin(), lbl_buf.end());
    ds.validate();
    return ds;
}

inline void save_idx(const LabeledDataset& ds, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
    if (ds.images.empty()) throw DataError("save_idx: empty dataset");
    const int rows = ds.images.front().height;
    const int cols = ds.images.front().width;
    std::ofstream img_out(images_path, std::ios::binary);
    if (!img_out) throw IoError("save_idx: cannot open " + images_path.string());
    detail::write_be_u32(img_out, 0x00000803u);
    detail::write_be_u32(img_out, static_cast<std::uint32_t>(ds.images.size()));
    detail::write_be_u32(img_out, static_cast<std::uint32_t>(rows));
    detail::write_be_u32(img_out, static_cast<std::uint32_t>(cols));
    for (const Image& img : ds.images) {
        if (img.height != rows || img.width != cols)
            throw ShapeError("save_idx: images have mixed dimensions");
        for (double p : img.pixels) {
            auto b = static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
            img_out.put(static_cast<char>(b));
        }
    }
    if (!img_out) throw IoError("save_idx: write failed for " + images_path.string());

    std::ofstream lbl_out(labels_path, std::ios::binary);
    if (!lbl_out) throw IoError("save_idx: cannot open " + labels_path.string());
    detail::write_be_u32(lbl_out, 0x00000801u);
    detail::write_be_u32(lbl_out, static_cast<std::uint32_t>(ds.labels.size()));
    for (int l : ds.labels) lbl_out.put(static_cast<char>(static_cast<std::uint8_t>(l)));
    if (!lbl_out) throw IoError("save_idx: write failed for " + labels_path.string());
}

// ---- stratified split ----

inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                       double train_fraction,
                                                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ParamError("split: train_fraction must be in (0,1)");
    ds.validate();

    const int n_classes = ds.n_classes();
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    for (int c = 0; c < n_classes; ++c)
        if (by_class[static_cast<std::size_t>(c)].size() < 2)
            throw DataError("split: class " + std::to_string(c) + " has fewer than 2 elements");

    // Largest-remainder apportionment: per-class counts stay within +-1 of
    // the exact proportion while the global train count equals
    // round(N * fraction).
    const auto total = static_cast<double>(ds.size());
    auto global_target =
        static_cast<std::size_t>(std::llround(total * train_fraction));
    std::vector<std::size_t> take(static_cast<std::size_t>(n_classes));
    std::vector<std::pair<double, int>> remainders;
    std::size_t assigned = 0;
    for (int c = 0; c < n_classes; ++c) {
        double exact = train_fraction * static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
        take[static_cast<std::size_t>(c)] = static_cast<std::size_t>(std::floor(exact));
        assigned += take[static_cast<std::size_t>(c)];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < global_target && k < remainders.size(); ++k) {
        auto c = static_cast<std::size_t>(remainders[k].second);
        if (take[c] < by_class[c].size()) {
            ++take[c];
            ++assigned;
        }
    }

    // keep at least one element on each side per class
    for (int c = 0; c < n_classes; ++c) {
        auto& t = take[static_cast<std::size_t>(c)];
        auto n = by_class[static_cast<std::size_t>(c)].size();
        t = std::clamp<std::size_t>(t, 1, n - 1);
    }

    Rng rng(derive_seed(seed, "split"));
    LabeledDataset train, test;
    train.class_names = test.class_names = ds.class_names;
    train.seed = test.seed = seed;
    for (int c = 0; c < n_classes; ++c) {
        auto indices = by_class[static_cast<std::size_t>(c)];
        for (std::size_t i = indices.size(); i > 1; --i) {
            std::size_t j = rng.below(i);
            std::swap(indices[i - 1], indices[j]);
        }
        for (std::size_t k = 0; k < indices.size(); ++k) {
            LabeledDataset& dst = (k < take[static_cast<std::size_t>(c)]) ? train : test;
            dst.images.push_back(ds.images[indices[k]]);
            dst.labels.push_back(ds.labels[indices[k]]);
        }
    }
    return {std::move(train), std::move(test)};
}

// ---- manifest + directory persistence ----

inline void write_manifest(const LabeledDataset& ds, const std::filesystem::path& path) {
    CsvTable table;
    table.header = {"index", "label", "className"};
    for (std::size_t i = 0; i < ds.size(); ++i)
        table.rows.push_back({std::to_string(i), std::to_string(ds.labels[i]),
                              ds.class_names[static_cast<std::size_t>(ds.labels[i])]});
    write_csv(table, path);
}

// One PGM per image plus the manifest, for eyeballing datasets. Attacked
// sets reuse this layout under a "_adv" suffixed directory.
inline void save_dataset_pgm_dir(const LabeledDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::snprintf(name, sizeof(name), "img_%05zu.pgm", i);
        write_pgm(ds.images[i], dir / name);
    }
    write_manifest(ds, dir / "manifest.csv");
}

// Full-precision binary for stage chaining (PGM/IDX quantize to 8 bits,
// which would break exact adversarial budgets).
inline void save_dataset_binary(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_dataset_binary: cannot open " + path.string());
    auto put_u32 = [&out](std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), 4);
    };
    out.write("CTFB", 4);
    put_u32(1u);
    put_u32(static_cast<std::uint32_t>(ds.size()));
    if (ds.images.empty()) throw DataError("save_dataset_binary: empty dataset");
    put_u32(static_cast<std::uint32_t>(ds.images.front().height));
    put_u32(static_cast<std::uint32_t>(ds.images.front().width));
    put_u32(static_cast<std::uint32_t>(ds.n_classes()));
    for (const auto& name : ds.class_names) {
        put_u32(static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    std::uint64_t seed = ds.seed;
    out.write(reinterpret_cast<const char*>(&seed), 8);
    for (int l : ds.labels) {
        auto v = static_cast<std::uint16_t>(l);
        out.write(reinterpret_cast<const char*>(&v), 2);
    }
    for (const Image& img : ds.images)
        out.write(reinterpret_cast<const char*>(img.pixels.data()),
                  static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
    if (!out) throw IoError("save_dataset_binary: write failed for " + path.string());
}

inline LabeledDataset load_dataset_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_dataset_binary: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "CTFB")
        throw FormatError("load_dataset_binary: bad magic in " + path.string());
    auto get_u32 = [&in, &path]() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (in.gcount() != 4) throw IoError("load_dataset_binary: truncated " + path.string());
        return v;
    };
    std::uint32_t version = get_u32();
    if (version != 1u) throw FormatError("load_dataset_binary: unsupported version");
    std::uint32_t count = get_u32();
    std::uint32_t height = get_u32();
    std::uint32_t width = get_u32();
    std::uint32_t n_classes = get_u32();
    LabeledDataset ds;
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        std::uint32_t len = get_u32();
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (in.gcount() != static_cast<std::streamsize>(len))
            throw IoError("load_dataset_binary: truncated class name");
        ds.class_names.push_back(std::move(name));
    }
    in.read(reinterpret_cast<char*>(&ds.seed), 8);
    ds.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 2);
        ds.labels[i] = v;
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        Image img(static_cast<int>(height), static_cast<int>(width));
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(img.pixels.size() * sizeof(double)))
            throw IoError("load_dataset_binary: truncated pixels in " + path.string());
        ds.images.push_back(std::move(img));
    }
    ds.validate();
    return ds;
}

} // namespace ctf

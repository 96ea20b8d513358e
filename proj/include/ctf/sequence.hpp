#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ctf/csv.hpp"
#include "ctf/errors.hpp"
#include "ctf/image.hpp"

namespace ctf {

enum class DecompositionMethod { rscd, jpeg, gaussian };

inline std::string method_name(DecompositionMethod m) {
    switch (m) {
        case DecompositionMethod::rscd: return "rscd";
        case DecompositionMethod::jpeg: return "jpeg";
        case DecompositionMethod::gaussian: return "gaussian";
    }
    return "?";
}

inline DecompositionMethod method_from_name(const std::string& name) {
    if (name == "rscd") return DecompositionMethod::rscd;
    if (name == "jpeg") return DecompositionMethod::jpeg;
    if (name == "gaussian") return DecompositionMethod::gaussian;
    throw ParamError("unknown decomposition method '" + name + "'");
}

// Ordered coarse-to-fine ladder built from one source image.
struct CtfSequence {
    std::vector<Image> levels;       // coarse first
    DecompositionMethod method = DecompositionMethod::rscd;
    long source_index = -1;
    std::vector<double> level_params; // snapshot step t, quality q, or sigma

    std::size_t level_count() const { return levels.size(); }

    void validate(bool require_ten = true) const {
        if (require_ten && levels.size() != 10)
            throw ConfigError("ctf sequence: expected 10 levels, got " +
                              std::to_string(levels.size()));
        if (levels.size() != level_params.size())
            throw ConsistencyError("ctf sequence: level/param counts differ");
        for (std::size_t i = 1; i < levels.size(); ++i) {
            if (!levels[i].same_shape(levels[0]))
                throw ShapeError("ctf sequence: level " + std::to_string(i + 1) +
                                 " shape differs from level 1");
            bool ascending = method != DecompositionMethod::gaussian;
            bool ok = ascending ? level_params[i] > level_params[i - 1]
                                : level_params[i] < level_params[i - 1];
            if (!ok)
                throw ConsistencyError("ctf sequence: level params not coarse-to-fine at level " +
                                       std::to_string(i + 1));
        }
        for (const Image& img : levels)
            for (double p : img.pixels)
                if (p < 0.0 || p > 1.0)
                    throw ConsistencyError("ctf sequence: pixel outside [0,1]");
    }
};

// Directory layout: level_01.pgm ... level_NN.pgm + metadata.csv with
// columns level,param,method,mse (mse against the source image).
inline void save_ctf_sequence(const CtfSequence& seq, const Image& original,
                              const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    CsvTable meta;
    meta.header = {"level", "param", "method", "mse"};
    char name[32];
    for (std::size_t i = 0; i < seq.levels.size(); ++i) {
        std::snprintf(name, sizeof(name), "level_%02zu.pgm", i + 1);
        write_pgm(seq.levels[i], dir / name);
        meta.rows.push_back({std::to_string(i + 1), format_real(seq.level_params[i], 4),
                             method_name(seq.method),
                             format_real(mse(seq.levels[i], original), 8)});
    }
    write_csv(meta, dir / "metadata.csv");
}

inline CtfSequence load_ctf_sequence(const std::filesystem::path& dir) {
    CsvTable meta = read_csv(dir / "metadata.csv");
    CtfSequence seq;
    int c_level = meta.column("level");
    int c_param = meta.column("param");
    int c_method = meta.column("method");
    char name[32];
    for (std::size_t i = 0; i < meta.rows.size(); ++i) {
        long level = parse_int(meta.rows[i][static_cast<std::size_t>(c_level)]);
        if (level != static_cast<long>(i + 1))
            throw ConsistencyError("ctf sequence dir: rows out of order in " + dir.string());
        std::snprintf(name, sizeof(name), "level_%02zu.pgm", i + 1);
        seq.levels.push_back(read_pgm(dir / name));
        seq.level_params.push_back(parse_real(meta.rows[i][static_cast<std::size_t>(c_param)]));
        seq.method = method_from_name(meta.rows[i][static_cast<std::size_t>(c_method)]);
    }
    return seq;
}

} // namespace ctf

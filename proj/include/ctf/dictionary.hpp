#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "ctf/csv.hpp"
#include "ctf/errors.hpp"

namespace ctf {

// Column dictionary: D x M matrix of unit-norm atoms, overcomplete when M > D.
struct Dictionary {
    Eigen::MatrixXd atoms;

    Dictionary() = default;
    explicit Dictionary(Eigen::MatrixXd a) : atoms(std::move(a)) { validate(); }

    int dim() const { return static_cast<int>(atoms.rows()); }
    int count() const { return static_cast<int>(atoms.cols()); }

    void validate(double tol = 1e-6) const {
        if (atoms.size() == 0) throw ShapeError("dictionary: empty atom matrix");
        for (int m = 0; m < atoms.cols(); ++m) {
            double norm = atoms.col(m).norm();
            if (norm == 0.0)
                throw ShapeError("dictionary: column " + std::to_string(m) + " is all-zero");
            if (std::abs(norm - 1.0) > tol)
                throw ShapeError("dictionary: column " + std::to_string(m) +
                                 " has norm " + std::to_string(norm));
        }
    }

    void normalize_columns() {
        for (int m = 0; m < atoms.cols(); ++m) {
            double norm = atoms.col(m).norm();
            if (norm > 0.0) atoms.col(m) /= norm;
        }
    }
};

// Binary layout: "CTFD", version u32, D u32, M u32 (little-endian), then
// D*M float64 column-major.
inline void save_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_dictionary: cannot open " + path.string());
    out.write("CTFD", 4);
    std::uint32_t version = 1, d = static_cast<std::uint32_t>(dict.dim()),
                  m = static_cast<std::uint32_t>(dict.count());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(&m), 4);
    out.write(reinterpret_cast<const char*>(dict.atoms.data()),
              static_cast<std::streamsize>(sizeof(double) * dict.atoms.size()));
    if (!out) throw IoError("save_dictionary: write failed for " + path.string());
}

inline Dictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_dictionary: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "CTFD")
        throw FormatError("load_dictionary: bad magic in " + path.string());
    std::uint32_t version = 0, d = 0, m = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&d), 4);
    in.read(reinterpret_cast<char*>(&m), 4);
    if (!in || version != 1)
        throw FormatError("load_dictionary: unsupported header in " + path.string());
    Dictionary dict;
    dict.atoms.resize(d, m);
    in.read(reinterpret_cast<char*>(dict.atoms.data()),
            static_cast<std::streamsize>(sizeof(double) * dict.atoms.size()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * dict.atoms.size()))
        throw IoError("load_dictionary: truncated payload in " + path.string());
    dict.validate();
    return dict;
}

inline void export_dictionary_csv(const Dictionary& dict, const std::filesystem::path& path) {
    CsvTable table;
    table.header.push_back("row");
    for (int m = 0; m < dict.count(); ++m) table.header.push_back("atom" + std::to_string(m));
    for (int r = 0; r < dict.dim(); ++r) {
        std::vector<std::string> row;
        row.push_back(std::to_string(r));
        for (int m = 0; m < dict.count(); ++m)
            row.push_back(format_real(dict.atoms(r, m), 9));
        table.rows.push_back(std::move(row));
    }
    write_csv(table, path);
}

} // namespace ctf

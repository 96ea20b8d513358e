#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ctf/dataset.hpp"
#include "ctf/dictionary.hpp"
#include "ctf/errors.hpp"
#include "ctf/image.hpp"
#include "ctf/parallel.hpp"
#include "ctf/sequence.hpp"
#include "ctf/sparse.hpp"

namespace ctf {

inline std::vector<int> default_snapshot_times() {
    return {10, 25, 50, 75, 100, 150, 200, 250, 300, 400};
}

// Stacked sparse model. The trained configuration has K=3 layers playing
// the V1 / V2 / IT roles; K=1 and K=2 are accepted for degenerate setups.
struct RscdModel {
    std::vector<Dictionary> layers;
    double lambda = 0.1;
    std::vector<int> snapshot_times = default_snapshot_times();
    int total_steps = 400;
    double dt_over_tau = 0.05;

    int input_dim() const { return layers.empty() ? 0 : layers.front().dim(); }

    void validate() const {
        if (layers.empty() || layers.size() > 3)
            throw ShapeError("rscd: layer count must be in [1,3], got " +
                             std::to_string(layers.size()));
        for (std::size_t l = 1; l < layers.size(); ++l)
            if (layers[l].dim() != layers[l - 1].count())
                throw ShapeError("rscd: layer " + std::to_string(l + 1) + " expects input dim " +
                                 std::to_string(layers[l].dim()) + " but layer " +
                                 std::to_string(l) + " emits " +
                                 std::to_string(layers[l - 1].count()));
        if (snapshot_times.empty())
            throw ConfigError("rscd: snapshot list is empty");
        for (std::size_t i = 1; i < snapshot_times.size(); ++i)
            if (snapshot_times[i] <= snapshot_times[i - 1])
                throw ConfigError("rscd: snapshot times must be strictly increasing");
        if (snapshot_times.front() < 1 || snapshot_times.back() != total_steps)
            throw ConfigError("rscd: snapshots must lie in [1,totalSteps] and end at totalSteps");
    }
};

// Concatenation Psi = [Phi1 | Phi1*Phi2 | Phi1*Phi2*Phi3] with unit-norm
// columns. column_scales holds the norms removed during normalization, so
// a joint activation vector maps back to the per-layer activations of the
// stacked reconstruction (a_layer = a_joint / scale).
struct EffectiveDictionary {
    Dictionary psi;
    Eigen::VectorXd column_scales;
    std::vector<int> layer_offsets; // size K+1; block k is [offsets[k], offsets[k+1])

    std::vector<Eigen::VectorXd> split_per_layer(const Eigen::VectorXd& joint) const {
        if (joint.size() != psi.count())
            throw ShapeError("effective dictionary: activation size mismatch");
        std::vector<Eigen::VectorXd> out;
        for (std::size_t k = 0; k + 1 < layer_offsets.size(); ++k) {
            int lo = layer_offsets[k], hi = layer_offsets[k + 1];
            Eigen::VectorXd block(hi - lo);
            for (int m = lo; m < hi; ++m) block[m - lo] = joint[m] / column_scales[m];
            out.push_back(std::move(block));
        }
        return out;
    }
};

inline EffectiveDictionary effective_dictionary(const RscdModel& model) {
    model.validate();
    const int dim = model.input_dim();
    int total = 0;
    for (const auto& layer : model.layers) total += layer.count();

    EffectiveDictionary eff;
    eff.psi.atoms.resize(dim, total);
    eff.column_scales.resize(total);
    eff.layer_offsets.push_back(0);

    Eigen::MatrixXd product = Eigen::MatrixXd::Identity(dim, dim);
    int offset = 0;
    for (const auto& layer : model.layers) {
        Eigen::MatrixXd block = product * layer.atoms; // columns of (prod Phi_l)
        for (int m = 0; m < block.cols(); ++m) {
            double norm = block.col(m).norm();
            if (norm < 1e-12)
                throw ShapeError("effective dictionary: projected atom " +
                                 std::to_string(offset + m) + " collapsed to zero");
            eff.psi.atoms.col(offset + m) = block.col(m) / norm;
            eff.column_scales[offset + m] = norm;
        }
        offset += static_cast<int>(block.cols());
        eff.layer_offsets.push_back(offset);
        product = std::move(block);
    }
    eff.psi.validate();
    return eff;
}

// Holds the effective dictionary and its Gram matrix; decompose() calls on
// one decomposer are independent and may run concurrently.
class RscdDecomposer {
public:
    explicit RscdDecomposer(const RscdModel& model)
        : model_(model), effective_(effective_dictionary(model)), solver_(effective_.psi) {}

    const RscdModel& model() const { return model_; }
    const EffectiveDictionary& effective() const { return effective_; }

    CtfSequence decompose(const Image& image, long source_index = -1,
                          bool require_ten_levels = true) const {
        if (require_ten_levels && model_.snapshot_times.size() != 10)
            throw ConfigError("rscd decompose: snapshot list has " +
                              std::to_string(model_.snapshot_times.size()) +
                              " entries, expected 10 (pass require_ten_levels=false to override)");
        if (static_cast<int>(image.size()) != model_.input_dim())
            throw ShapeError("rscd decompose: image with " + std::to_string(image.size()) +
                             " pixels does not match dictionary dim " +
                             std::to_string(model_.input_dim()));
        Eigen::VectorXd x =
            Eigen::Map<const Eigen::VectorXd>(image.pixels.data(),
                                              static_cast<Eigen::Index>(image.size()));
        SparseSolution sol =
            solver_.solve(x, model_.lambda, model_.total_steps, model_.snapshot_times,
                          Threshold::hard, model_.dt_over_tau);

        CtfSequence seq;
        seq.method = DecompositionMethod::rscd;
        seq.source_index = source_index;
        for (std::size_t i = 0; i < sol.recorded_activations.size(); ++i) {
            Eigen::VectorXd recon = effective_.psi.atoms * sol.recorded_activations[i];
            Image level(image.height, image.width);
            for (std::size_t p = 0; p < level.pixels.size(); ++p)
                level.pixels[p] = std::clamp(recon[static_cast<Eigen::Index>(p)], 0.0, 1.0);
            seq.levels.push_back(std::move(level));
            seq.level_params.push_back(static_cast<double>(model_.snapshot_times[i]));
        }
        return seq;
    }

    // Objective trace of the joint solve at the snapshot times; used by the
    // energy-descent checks.
    std::vector<double> energy_trace(const Image& image) const {
        Eigen::VectorXd x =
            Eigen::Map<const Eigen::VectorXd>(image.pixels.data(),
                                              static_cast<Eigen::Index>(image.size()));
        return solver_
            .solve(x, model_.lambda, model_.total_steps, model_.snapshot_times, Threshold::hard,
                   model_.dt_over_tau)
            .energy_trace;
    }

private:
    RscdModel model_;
    EffectiveDictionary effective_;
    LcaSolver solver_;
};

inline CtfSequence decompose(const RscdModel& model, const Image& image,
                             long source_index = -1, bool require_ten_levels = true) {
    return RscdDecomposer(model).decompose(image, source_index, require_ten_levels);
}

inline std::vector<CtfSequence> decompose_all(const RscdModel& model,
                                              const std::vector<Image>& images,
                                              int threads = 0) {
    RscdDecomposer decomposer(model);
    std::vector<CtfSequence> out(images.size());
    parallel_for(
        images.size(),
        [&](std::size_t i) {
            out[i] = decomposer.decompose(images[i], static_cast<long>(i));
        },
        threads);
    return out;
}

// ---- training ----

struct RscdTrainOptions {
    double learning_rate = 0.5;
    DictLearnOptions dict;
};

inline std::array<int, 3> default_layer_sizes(int input_dim) {
    return {2 * input_dim, input_dim, std::max(1, input_dim / 2)};
}

// Layerwise greedy training: Phi1 on pixels, Phi2 on the layer-1 codes,
// Phi3 on the layer-2 codes.
inline RscdModel train_rscd(const LabeledDataset& data, const std::array<int, 3>& sizes,
                            double lambda, int epochs, std::uint64_t seed,
                            const RscdTrainOptions& opt = RscdTrainOptions{}) {
    for (int s : sizes)
        if (s < 1) throw ParamError("train_rscd: layer sizes must be positive");
    if (data.images.empty()) throw DataError("train_rscd: empty dataset");

    std::vector<Eigen::VectorXd> signals;
    signals.reserve(data.images.size());
    for (const Image& img : data.images)
        signals.push_back(Eigen::Map<const Eigen::VectorXd>(
            img.pixels.data(), static_cast<Eigen::Index>(img.size())));

    RscdModel model;
    model.lambda = lambda;
    std::vector<Eigen::VectorXd> inputs = std::move(signals);
    for (int layer = 0; layer < 3; ++layer) {
        Dictionary dict = learn_dictionary(inputs, sizes[static_cast<std::size_t>(layer)],
                                           lambda, epochs, opt.learning_rate,
                                           derive_seed(seed, "rscd-layer-" + std::to_string(layer)),
                                           opt.dict);
        if (layer < 2) {
            // codes of this layer feed the next one
            LcaSolver solver(dict);
            std::vector<Eigen::VectorXd> codes(inputs.size());
            parallel_for(inputs.size(), [&](std::size_t n) {
                codes[n] = solver
                               .solve(inputs[n], lambda, opt.dict.lca_steps, {},
                                      opt.dict.variant, opt.dict.dt_over_tau)
                               .a;
            });
            inputs = std::move(codes);
        }
        model.layers.push_back(std::move(dict));
    }
    model.validate();
    return model;
}

// ---- persistence: one CTFD file per layer plus a small key=value header ----

inline void save_rscd_model(const RscdModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t l = 0; l < model.layers.size(); ++l)
        save_dictionary(model.layers[l], dir / ("layer_" + std::to_string(l + 1) + ".ctfd"));
    std::ofstream meta(dir / "model.txt");
    if (!meta) throw IoError("save_rscd_model: cannot open meta file");
    meta << "layers=" << model.layers.size() << "\n";
    meta << "lambda=" << format_real(model.lambda, 9) << "\n";
    meta << "total_steps=" << model.total_steps << "\n";
    meta << "dt_over_tau=" << format_real(model.dt_over_tau, 9) << "\n";
    meta << "snapshots=";
    for (std::size_t i = 0; i < model.snapshot_times.size(); ++i)
        meta << (i ? "," : "") << model.snapshot_times[i];
    meta << "\n";
}

inline RscdModel load_rscd_model(const std::filesystem::path& dir) {
    std::ifstream meta(dir / "model.txt");
    if (!meta) throw IoError("load_rscd_model: cannot open " + (dir / "model.txt").string());
    RscdModel model;
    model.snapshot_times.clear();
    std::size_t layer_count = 0;
    std::string line;
    while (std::getline(meta, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "layers") layer_count = static_cast<std::size_t>(std::stoul(value));
        else if (key == "lambda") model.lambda = std::stod(value);
        else if (key == "total_steps") model.total_steps = std::stoi(value);
        else if (key == "dt_over_tau") model.dt_over_tau = std::stod(value);
        else if (key == "snapshots") {
            std::size_t pos = 0;
            while (pos < value.size()) {
                auto comma = value.find(',', pos);
                if (comma == std::string::npos) comma = value.size();
                model.snapshot_times.push_back(std::stoi(value.substr(pos, comma - pos)));
                pos = comma + 1;
            }
        }
    }
    if (layer_count == 0) throw FormatError("load_rscd_model: missing layer count");
    for (std::size_t l = 0; l < layer_count; ++l)
        model.layers.push_back(
            load_dictionary(dir / ("layer_" + std::to_string(l + 1) + ".ctfd")));
    model.validate();
    return model;
}

} // namespace ctf

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ctf/dictionary.hpp"
#include "ctf/errors.hpp"
#include "ctf/random.hpp"

namespace ctf {

enum class Threshold { hard, soft };

// 0.5 * ||x - Phi a||_2^2 + lambda * ||a||_1
inline double objective(const Dictionary& dict, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& a, double lambda) {
    if (x.size() != dict.dim() || a.size() != dict.count())
        throw ShapeError("objective: got x of size " + std::to_string(x.size()) + ", a of size " +
                         std::to_string(a.size()) + " for a " + std::to_string(dict.dim()) + "x" +
                         std::to_string(dict.count()) + " dictionary");
    return 0.5 * (x - dict.atoms * a).squaredNorm() + lambda * a.lpNorm<1>();
}

inline double threshold_scalar(double u, double lambda, Threshold variant) {
    if (variant == Threshold::hard) return u > lambda ? u : 0.0;
    double mag = std::abs(u) - lambda;
    return mag > 0.0 ? (u > 0.0 ? mag : -mag) : 0.0;
}

inline Eigen::VectorXd threshold(const Eigen::VectorXd& u, double lambda, Threshold variant) {
    if (lambda < 0.0) throw ParamError("threshold: lambda must be >= 0");
    Eigen::VectorXd a(u.size());
    for (Eigen::Index m = 0; m < u.size(); ++m)
        a[m] = threshold_scalar(u[m], lambda, variant);
    return a;
}

struct SparseState {
    Eigen::VectorXd u;       // membrane potentials
    Eigen::VectorXd a;       // activations, always threshold(u)
    double lambda = 0.1;
    double tau = 1.0;
    double dt = 0.05;
    Threshold variant = Threshold::hard;
};

struct SparseSolution {
    Eigen::VectorXd a;
    std::vector<double> energy_trace;                 // objective at each recorded step
    std::vector<Eigen::VectorXd> recorded_activations; // activations at the same steps
    int iterations = 0;
};

namespace detail {

// Lateral inhibition (Phi^T Phi - self) * a, exploiting sparse activations.
// The matrix passed in already has a zero diagonal.
inline Eigen::VectorXd inhibition(const Eigen::MatrixXd& gram_zero_diag,
                                  const Eigen::VectorXd& a) {
    const Eigen::Index m_count = a.size();
    Eigen::Index active = 0;
    for (Eigen::Index m = 0; m < m_count; ++m)
        if (a[m] != 0.0) ++active;
    if (active == 0) return Eigen::VectorXd::Zero(m_count);
    if (active * 4 >= m_count) return gram_zero_diag * a;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_count);
    for (Eigen::Index m = 0; m < m_count; ++m)
        if (a[m] != 0.0) out.noalias() += gram_zero_diag.col(m) * a[m];
    return out;
}

} // namespace detail

// Precomputes the Gram matrix once so that many signals can be solved
// against the same dictionary. Safe to share across threads read-only.
class LcaSolver {
public:
    explicit LcaSolver(Dictionary dict) : dict_(std::move(dict)) {
        gram_ = dict_.atoms.transpose() * dict_.atoms;
        gram_.diagonal().setZero();
    }

    const Dictionary& dictionary() const { return dict_; }
    const Eigen::MatrixXd& gram_zero_diag() const { return gram_; }

    SparseSolution solve(const Eigen::VectorXd& x, double lambda, int steps,
                         const std::vector<int>& record_at, Threshold variant,
                         double dt_over_tau = 0.05) const {
        if (steps < 1) throw ParamError("solve_lca: steps must be >= 1");
        if (x.size() != dict_.dim())
            throw ShapeError("solve_lca: signal size " + std::to_string(x.size()) +
                             " != dictionary dim " + std::to_string(dict_.dim()));
        for (int s : record_at)
            if (s < 1 || s > steps)
                throw ParamError("solve_lca: record step " + std::to_string(s) +
                                 " outside [1," + std::to_string(steps) + "]");

        const Eigen::VectorXd driver = dict_.atoms.transpose() * x;
        Eigen::VectorXd u = Eigen::VectorXd::Zero(dict_.count());
        Eigen::VectorXd a = Eigen::VectorXd::Zero(dict_.count());

        SparseSolution sol;
        sol.energy_trace.reserve(record_at.size());
        std::vector<int> sorted_records = record_at;
        std::sort(sorted_records.begin(), sorted_records.end());
        std::size_t next_record = 0;

        for (int step = 1; step <= steps; ++step) {
            Eigen::VectorXd inhib = detail::inhibition(gram_, a);
            u += dt_over_tau * (-u + driver - inhib);
            for (Eigen::Index m = 0; m < u.size(); ++m)
                a[m] = threshold_scalar(u[m], lambda, variant);
            if (u.cwiseAbs().maxCoeff() > 1e6)
                throw InstabilityError("solve_lca: |u| exceeded 1e6 at step " +
                                           std::to_string(step),
                                       step);
            while (next_record < sorted_records.size() && sorted_records[next_record] == step) {
                sol.energy_trace.push_back(objective(dict_, x, a, lambda));
                sol.recorded_activations.push_back(a);
                ++next_record;
            }
        }
        sol.a = std::move(a);
        sol.iterations = steps;
        return sol;
    }

private:
    Dictionary dict_;
    Eigen::MatrixXd gram_;
};

// One explicit-Euler update of the LCA dynamics
//   u <- u + (dt/tau) * (-u + Phi^T x - (Phi^T Phi a - a))
// with the self-inhibition term excluded (zero diagonal), then a = T_lambda(u).
inline SparseState lca_step(const SparseState& state, const Dictionary& dict,
                            const Eigen::VectorXd& x) {
    if (state.u.size() != dict.count() || x.size() != dict.dim())
        throw ShapeError("lca_step: state/dictionary/signal dimensions disagree");
    Eigen::MatrixXd gram = dict.atoms.transpose() * dict.atoms;
    gram.diagonal().setZero();
    SparseState next = state;
    Eigen::VectorXd driver = dict.atoms.transpose() * x;
    Eigen::VectorXd inhib = detail::inhibition(gram, state.a);
    next.u = state.u + (state.dt / state.tau) * (-state.u + driver - inhib);
    next.a = threshold(next.u, state.lambda, state.variant);
    return next;
}

inline SparseSolution solve_lca(const Dictionary& dict, const Eigen::VectorXd& x, double lambda,
                                int steps, const std::vector<int>& record_at,
                                Threshold variant, double dt_over_tau = 0.05) {
    return LcaSolver(dict).solve(x, lambda, steps, record_at, variant, dt_over_tau);
}

// Largest eigenvalue of Phi^T Phi by plain power iteration.
inline double lipschitz_constant(const Dictionary& dict, int rounds = 100) {
    Eigen::MatrixXd gram = dict.atoms.transpose() * dict.atoms;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(gram.rows());
    v.normalize();
    for (int i = 0; i < rounds; ++i) {
        v = gram * v;
        double n = v.norm();
        if (n == 0.0) return 1.0;
        v /= n;
    }
    return v.dot(gram * v);
}

// Proximal-gradient reference solver for the same objective.
inline SparseSolution solve_ista(const Dictionary& dict, const Eigen::VectorXd& x, double lambda,
                                 int max_iter, double tol) {
    if (x.size() != dict.dim())
        throw ShapeError("solve_ista: signal size != dictionary dim");
    const double lip = lipschitz_constant(dict);
    const double step = 1.0 / lip;

    Eigen::VectorXd a = Eigen::VectorXd::Zero(dict.count());
    SparseSolution sol;
    double prev = objective(dict, x, a, lambda);
    sol.energy_trace.push_back(prev);
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd residual = x - dict.atoms * a;
        Eigen::VectorXd grad_step = a + step * (dict.atoms.transpose() * residual);
        a = threshold(grad_step, lambda * step, Threshold::soft);
        double cur = objective(dict, x, a, lambda);
        sol.energy_trace.push_back(cur);
        sol.iterations = it;
        if (prev - cur < tol) break;
        prev = cur;
    }
    sol.a = std::move(a);
    return sol;
}

// ---- dictionary learning ----

struct DictLearnOptions {
    int lca_steps = 200;
    Threshold variant = Threshold::hard;
    double dt_over_tau = 0.05;
    int batch_size = 32;
    std::ostream* log = nullptr;
};

inline Dictionary random_dictionary(int dim, int count, Rng& rng) {
    Eigen::MatrixXd atoms(dim, count);
    for (int m = 0; m < count; ++m) {
        for (int r = 0; r < dim; ++r) atoms(r, m) = rng.normal();
        double n = atoms.col(m).norm();
        while (n < 1e-12) { // astronomically unlikely, but keep the invariant
            for (int r = 0; r < dim; ++r) atoms(r, m) = rng.normal();
            n = atoms.col(m).norm();
        }
        atoms.col(m) /= n;
    }
    return Dictionary(std::move(atoms));
}

namespace detail {

inline double mean_objective(const Dictionary& dict,
                             const std::vector<Eigen::VectorXd>& data, double lambda,
                             const DictLearnOptions& opt) {
    LcaSolver solver(dict);
    double total = 0.0;
    for (const auto& x : data) {
        SparseSolution sol =
            solver.solve(x, lambda, opt.lca_steps, {}, opt.variant, opt.dt_over_tau);
        total += objective(dict, x, sol.a, lambda);
    }
    return total / static_cast<double>(data.size());
}

} // namespace detail

// Alternating optimization of Eq-style sparse coding: LCA inference per
// sample, then a gradient step on the reconstruction term w.r.t. the atoms,
// followed by column re-normalization. Atoms that stay silent for a whole
// epoch are re-seeded from random data samples.
inline Dictionary learn_dictionary(const std::vector<Eigen::VectorXd>& data, int atom_count,
                                   double lambda, int epochs, double learning_rate,
                                   std::uint64_t seed,
                                   const DictLearnOptions& opt = DictLearnOptions{}) {
    if (atom_count < 1) throw ParamError("learn_dictionary: atom count must be >= 1");
    if (data.empty()) throw DataError("learn_dictionary: no training data");
    const int dim = static_cast<int>(data.front().size());
    for (const auto& x : data)
        if (x.size() != dim) throw ShapeError("learn_dictionary: signals have mixed sizes");

    Rng rng(derive_seed(seed, "dict"));
    Dictionary dict = random_dictionary(dim, atom_count, rng);
    if (epochs == 0) return dict;

    const Dictionary initial = dict;
    const double initial_obj = detail::mean_objective(initial, data, lambda, opt);

    std::vector<Eigen::VectorXd> codes(data.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<char> active(static_cast<std::size_t>(atom_count), 0);
        std::size_t pos = 0;
        while (pos < data.size()) {
            std::size_t end = std::min(pos + static_cast<std::size_t>(opt.batch_size),
                                       data.size());
            // codes for the batch against the current atoms
            LcaSolver solver(dict);
            for (std::size_t n = pos; n < end; ++n)
                codes[n] = solver
                               .solve(data[n], lambda, opt.lca_steps, {}, opt.variant,
                                      opt.dt_over_tau)
                               .a;
            // batched gradient step on the reconstruction term
            Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(dim, atom_count);
            for (std::size_t n = pos; n < end; ++n) {
                const Eigen::VectorXd& a = codes[n];
                Eigen::VectorXd residual = dict.atoms * a - data[n];
                for (int m = 0; m < atom_count; ++m) {
                    if (a[m] != 0.0) {
                        grad.col(m).noalias() += residual * a[m];
                        active[static_cast<std::size_t>(m)] = 1;
                    }
                }
            }
            dict.atoms -= (learning_rate / static_cast<double>(end - pos)) * grad;
            dict.normalize_columns();
            pos = end;
        }
        for (int m = 0; m < atom_count; ++m) {
            if (!active[static_cast<std::size_t>(m)]) {
                std::size_t pick = rng.below(data.size());
                Eigen::VectorXd sample = data[pick];
                double n = sample.norm();
                if (n < 1e-12) {
                    for (int r = 0; r < dim; ++r) sample[r] = rng.normal();
                    n = sample.norm();
                }
                dict.atoms.col(m) = sample / n;
                if (opt.log)
                    (*opt.log) << "learn_dictionary: epoch " << epoch << " re-seeded dead atom "
                               << m << " from sample " << pick << "\n";
            }
        }
    }

    const double final_obj = detail::mean_objective(dict, data, lambda, opt);
    if (final_obj > initial_obj) {
        if (opt.log)
            (*opt.log) << "learn_dictionary: training raised the mean objective ("
                       << initial_obj << " -> " << final_obj << "), keeping the initial atoms\n";
        return initial;
    }
    return dict;
}

} // namespace ctf

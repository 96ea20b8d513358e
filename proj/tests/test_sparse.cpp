#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <sstream>

#include "ctf/random.hpp"
#include "ctf/sparse.hpp"

using namespace ctf;

namespace {

Eigen::VectorXd random_unit_signal(int dim, Rng& rng) {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x[i] = rng.normal();
    return x / x.norm();
}

// signals that actually are sparse combinations of some ground atoms, so
// dictionary learning has structure to find
std::vector<Eigen::VectorXd> sparse_combo_data(int dim, int n, Rng& rng) {
    Dictionary ground = random_dictionary(dim, dim * 2, rng);
    std::vector<Eigen::VectorXd> data;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        for (int k = 0; k < 3; ++k)
            x += rng.uniform(0.4, 1.2) * ground.atoms.col(static_cast<Eigen::Index>(
                     rng.below(static_cast<std::uint64_t>(ground.count()))));
        data.push_back(x);
    }
    return data;
}

} // namespace

TEST_CASE("objective matches the definition") {
    Dictionary eye(Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd x(2), a(2);
    x << 1.0, 0.0;

    a.setZero();
    REQUIRE(objective(eye, x, a, 0.3) == Catch::Approx(0.5 * x.squaredNorm()));

    a << 1.0, 0.0; // exact reconstruction
    REQUIRE(objective(eye, x, a, 0.0) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(objective(eye, x, a, 0.5) == Catch::Approx(0.5));

    Eigen::VectorXd bad(3);
    REQUIRE_THROWS_AS(objective(eye, x, bad, 0.1), ShapeError);
}

TEST_CASE("threshold variants") {
    Eigen::VectorXd u(4);
    u << 0.4, 1.0, -1.0, 0.5;

    Eigen::VectorXd hard = threshold(u, 0.5, Threshold::hard);
    REQUIRE(hard[0] == 0.0);
    REQUIRE(hard[1] == 1.0); // no shrinkage above the threshold
    REQUIRE(hard[2] == 0.0); // negatives never cross the Heaviside gate
    REQUIRE(hard[3] == 0.0); // boundary: u == lambda stays silent

    Eigen::VectorXd soft = threshold(u, 0.5, Threshold::soft);
    REQUIRE(soft[0] == 0.0);
    REQUIRE(soft[1] == Catch::Approx(0.5));
    REQUIRE(soft[2] == Catch::Approx(-0.5));

    REQUIRE_THROWS_AS(threshold(u, -0.1, Threshold::hard), ParamError);
}

TEST_CASE("hard threshold is idempotent") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd u(32);
        for (int i = 0; i < 32; ++i) u[i] = rng.normal(0.0, 2.0);
        double lambda = rng.uniform(0.0, 1.5);
        Eigen::VectorXd once = threshold(u, lambda, Threshold::hard);
        Eigen::VectorXd twice = threshold(once, lambda, Threshold::hard);
        REQUIRE(once == twice);
    }
}

TEST_CASE("soft threshold magnitude bound") {
    Rng rng(321);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd u(16);
        for (int i = 0; i < 16; ++i) u[i] = rng.normal(0.0, 2.0);
        double lambda = rng.uniform(0.0, 1.0);
        Eigen::VectorXd a = threshold(u, lambda, Threshold::soft);
        for (int i = 0; i < 16; ++i)
            REQUIRE(std::abs(a[i]) <= std::max(std::abs(u[i]) - lambda, 0.0) + 1e-15);
    }
}

TEST_CASE("lca_step single-atom fixed point") {
    Dictionary dict(Eigen::MatrixXd::Ones(1, 1));
    Eigen::VectorXd x(1);
    x << 2.0;

    SparseState state;
    state.u = Eigen::VectorXd::Zero(1);
    state.a = Eigen::VectorXd::Zero(1);
    state.lambda = 1.0;
    state.variant = Threshold::hard;

    // at u = Phi^T x = 2 the update vanishes (self-inhibition excluded)
    state.u[0] = 2.0;
    state.a = threshold(state.u, state.lambda, Threshold::hard);
    SparseState next = lca_step(state, dict, x);
    REQUIRE(next.u[0] == Catch::Approx(2.0));
    REQUIRE(next.a[0] == Catch::Approx(2.0));

    // and iterating from rest converges there
    state.u.setZero();
    state.a.setZero();
    for (int i = 0; i < 2000; ++i) state = lca_step(state, dict, x);
    REQUIRE(state.u[0] == Catch::Approx(2.0).epsilon(1e-6));
    REQUIRE(state.a[0] == Catch::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("lca_step with empty active set reduces to charge-up") {
    Rng rng(5);
    Dictionary dict = random_dictionary(6, 12, rng);
    Eigen::VectorXd x = random_unit_signal(6, rng);

    SparseState state;
    state.u = Eigen::VectorXd::Zero(12);
    state.a = Eigen::VectorXd::Zero(12);
    state.lambda = 10.0; // nothing will cross
    state.dt = 0.05;

    SparseState next = lca_step(state, dict, x);
    Eigen::VectorXd expected = 0.05 * (dict.atoms.transpose() * x);
    REQUIRE((next.u - expected).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(next.a.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lca_step inhibition equals atom similarity times activation") {
    // two-atom system evaluated by hand
    Eigen::MatrixXd atoms(3, 2);
    atoms.col(0) << 1.0, 0.0, 0.0;
    atoms.col(1) << 0.8, 0.6, 0.0; // <phi_0, phi_1> = 0.8
    Dictionary dict(atoms);
    Eigen::VectorXd x(3);
    x << 0.3, 0.1, 0.0;

    SparseState state;
    state.u = Eigen::VectorXd::Zero(2);
    state.a = Eigen::VectorXd::Zero(2);
    state.lambda = 0.2;
    state.dt = 0.05;
    state.variant = Threshold::hard;
    state.u[1] = 0.9; // atom 1 active with a_1 = 0.9
    state.a = threshold(state.u, state.lambda, Threshold::hard);
    REQUIRE(state.a[1] == 0.9);

    SparseState next = lca_step(state, dict, x);
    double drive0 = dict.atoms.col(0).dot(x);
    double expected_u0 = 0.0 + 0.05 * (-0.0 + drive0 - 0.8 * 0.9);
    REQUIRE(next.u[0] == Catch::Approx(expected_u0).margin(1e-14));

    // atom 1 must not inhibit itself: only the leak acts on it
    double drive1 = dict.atoms.col(1).dot(x);
    double expected_u1 = 0.9 + 0.05 * (-0.9 + drive1 - 0.0);
    REQUIRE(next.u[1] == Catch::Approx(expected_u1).margin(1e-14));
}

TEST_CASE("solver gram matrix has exactly zero diagonal") {
    Rng rng(9);
    Dictionary dict = random_dictionary(8, 16, rng);
    LcaSolver solver(dict);
    for (int m = 0; m < 16; ++m) REQUIRE(solver.gram_zero_diag()(m, m) == 0.0);
}

TEST_CASE("solve_lca contracts") {
    Rng rng(17);
    Dictionary dict = random_dictionary(8, 16, rng);
    Eigen::VectorXd x = random_unit_signal(8, rng);

    SECTION("record list length") {
        SparseSolution sol = solve_lca(dict, x, 0.1, 400, {10, 400}, Threshold::soft);
        REQUIRE(sol.energy_trace.size() == 2);
        REQUIRE(sol.recorded_activations.size() == 2);
        REQUIRE(sol.iterations == 400);
    }
    SECTION("large lambda silences everything") {
        double lambda = (dict.atoms.transpose() * x).cwiseAbs().maxCoeff() * 3.0 + 1.0;
        SparseSolution sol = solve_lca(dict, x, lambda, 300, {300}, Threshold::hard);
        REQUIRE(sol.a.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("record step validation") {
        REQUIRE_THROWS_AS(solve_lca(dict, x, 0.1, 100, {0}, Threshold::soft), ParamError);
        REQUIRE_THROWS_AS(solve_lca(dict, x, 0.1, 100, {101}, Threshold::soft), ParamError);
        REQUIRE_THROWS_AS(solve_lca(dict, x, 0.1, 0, {}, Threshold::soft), ParamError);
    }
}

TEST_CASE("solve_lca descends the objective on a learned dictionary") {
    Rng rng(31);
    auto data = sparse_combo_data(16, 60, rng);
    Dictionary dict = learn_dictionary(data, 32, 0.1, 3, 0.3, 77);

    std::vector<int> record;
    for (int s = 1; s <= 400; ++s) record.push_back(s);
    int checked = 0;
    for (int i = 0; i < 10; ++i) {
        SparseSolution sol = solve_lca(dict, data[static_cast<std::size_t>(i)], 0.1, 400,
                                       record, Threshold::soft, 0.05);
        REQUIRE(sol.energy_trace.back() <= sol.energy_trace.front() + 1e-12);
        int increases = 0;
        for (std::size_t k = 1; k < sol.energy_trace.size(); ++k)
            if (sol.energy_trace[k] > sol.energy_trace[k - 1] + 1e-6) ++increases;
        REQUIRE(increases < static_cast<int>(0.05 * static_cast<double>(record.size())));
        ++checked;
    }
    REQUIRE(checked == 10);
}

TEST_CASE("solve_lca reports instability with the offending step") {
    // four identical atoms with a unit Euler step: the inhibition loop has
    // spectral radius 3, so the potentials grow geometrically
    Eigen::MatrixXd atoms(2, 4);
    for (int m = 0; m < 4; ++m) atoms.col(m) << 1.0, 0.0;
    Dictionary dict(atoms);
    Eigen::VectorXd x(2);
    x << 1.0, 0.0;
    try {
        solve_lca(dict, x, 0.0, 500, {}, Threshold::soft, 1.0);
        FAIL("expected InstabilityError");
    } catch (const InstabilityError& e) {
        REQUIRE(e.step > 0);
        REQUIRE(std::string(e.what()).find(std::to_string(e.step)) != std::string::npos);
    }
}

TEST_CASE("solve_ista closed-form case on the identity dictionary") {
    Dictionary eye(Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd x(2);
    x << 1.0, 0.0;
    SparseSolution sol = solve_ista(eye, x, 0.4, 200, 1e-14);
    REQUIRE(sol.a[0] == Catch::Approx(0.6).margin(1e-8));
    REQUIRE(sol.a[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("solve_ista with zero lambda solves least squares") {
    Rng rng(41);
    Dictionary dict = random_dictionary(8, 8, rng); // square, almost surely invertible
    Eigen::VectorXd x = random_unit_signal(8, rng);
    SparseSolution sol = solve_ista(dict, x, 0.0, 20000, 1e-16);
    double rec_mse = (x - dict.atoms * sol.a).squaredNorm() / 8.0;
    REQUIRE(rec_mse < 1e-8);
}

TEST_CASE("lca(soft) and ista agree on the objective") {
    Rng rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        Dictionary dict = random_dictionary(16, 32, rng);
        Eigen::VectorXd x = random_unit_signal(16, rng);
        SparseSolution ista = solve_ista(dict, x, 0.1, 4000, 1e-13);
        SparseSolution lca = solve_lca(dict, x, 0.1, 3000, {3000}, Threshold::soft, 0.05);
        double e_ista = objective(dict, x, ista.a, 0.1);
        double e_lca = objective(dict, x, lca.a, 0.1);
        double rel = std::abs(e_ista - e_lca) / std::max(1e-12, std::abs(e_ista));
        INFO("trial " << trial << " ista " << e_ista << " lca " << e_lca);
        REQUIRE(rel < 0.02);
    }
}

TEST_CASE("learn_dictionary basics") {
    Rng rng(61);
    auto data = sparse_combo_data(12, 40, rng);

    SECTION("epochs=0 returns the seeded random dictionary") {
        Dictionary d0 = learn_dictionary(data, 24, 0.1, 0, 0.3, 5);
        Dictionary d1 = learn_dictionary(data, 24, 0.1, 0, 0.3, 5);
        REQUIRE(d0.atoms == d1.atoms);
        d0.validate(1e-9);
    }
    SECTION("columns stay unit norm after training") {
        Dictionary d = learn_dictionary(data, 24, 0.1, 2, 0.3, 5);
        for (int m = 0; m < d.count(); ++m)
            REQUIRE(d.atoms.col(m).norm() == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("training lowers the mean objective") {
        DictLearnOptions opt;
        Dictionary initial = learn_dictionary(data, 24, 0.1, 0, 0.3, 5);
        Dictionary trained = learn_dictionary(data, 24, 0.1, 10, 0.3, 5);
        auto mean_obj = [&](const Dictionary& dict) {
            LcaSolver solver(dict);
            double total = 0.0;
            for (const auto& x : data) {
                auto sol = solver.solve(x, 0.1, opt.lca_steps, {}, opt.variant, opt.dt_over_tau);
                total += objective(dict, x, sol.a, 0.1);
            }
            return total / static_cast<double>(data.size());
        };
        double before = mean_obj(initial);
        double after = mean_obj(trained);
        INFO("mean objective " << before << " -> " << after);
        REQUIRE(after < before);
    }
    SECTION("dead atoms are re-seeded and logged") {
        std::ostringstream log;
        DictLearnOptions opt;
        opt.log = &log;
        // lambda far above any attainable drive: every atom stays silent
        Dictionary d = learn_dictionary(data, 8, 1e4, 1, 0.3, 5, opt);
        REQUIRE(log.str().find("re-seeded dead atom") != std::string::npos);
        d.validate(1e-9);
    }
    SECTION("parameter validation") {
        REQUIRE_THROWS_AS(learn_dictionary(data, 0, 0.1, 1, 0.3, 5), ParamError);
        REQUIRE_THROWS_AS(learn_dictionary({}, 8, 0.1, 1, 0.3, 5), DataError);
    }
}

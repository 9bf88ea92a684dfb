#include <doctest.h>

#include <cmath>
#include <random>

#include "symlab/cyclic_solver.hpp"
#include "symlab/diagnostics.hpp"
#include "symlab/error.hpp"
#include "symlab/groups.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/numerics.hpp"

using namespace symlab;

namespace {

Vector random_distribution(std::size_t m, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(0.7, 1.0);
    Vector y(m);
    double s = 0.0;
    for (double& v : y) s += (v = g(rng));
    for (double& v : y) v /= s;
    return y;
}

// Nuclear norm of [C(z_1) ... C(z_b)]: every block is diagonalized by the
// same Fourier basis, so the singular values are the l2 norms across blocks
// of the per-frequency eigenvalues.
double block_circulant_nuclear(const std::vector<Vector>& gens) {
    const std::size_t m = gens.front().size();
    std::vector<ComplexVector> spectra;
    for (const auto& g : gens) spectra.push_back(dft(g));
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0.0;
        for (const auto& sp : spectra) s += std::norm(sp[k]);
        total += std::sqrt(s);
    }
    return total;
}

}  // namespace

TEST_CASE("circulant construction examples") {
    CHECK(build_circulant(std::vector<double>{1, 0, 0, 0}) == Matrix::identity(4));
    CHECK(build_circulant(std::vector<double>{1, -1}) == Matrix{{1, -1}, {-1, 1}});
    CHECK(build_circulant(std::vector<double>{1, 1, 1}) == Matrix::ones(3, 3));
    const Matrix c = build_circulant(std::vector<double>{0.3, -1.2, 2.0, 0.5});
    const Matrix p = Permutation::cyclic_shift(4).as_matrix();
    CHECK(max_abs_diff(p * c, c * p) == 0.0);
    CHECK(build_block_circulant({{1, 0}, {0, 1}}) == Matrix{{1, 0, 0, 1}, {0, 1, 1, 0}});
    CHECK_THROWS_AS(build_circulant(std::vector<double>{}), InvalidInput);
}

TEST_CASE("block circulant average is the orthogonal projection onto the subspace") {
    std::mt19937_64 rng(1);
    const Matrix z = random_gaussian(4, 8, rng);
    const Matrix a = block_circulant_average(z);
    CHECK(max_abs_diff(block_circulant_average(a), a) < 1e-14);
    const Matrix other = build_block_circulant({random_gaussian(4, 1, rng).col(0), random_gaussian(4, 1, rng).col(0)});
    CHECK(std::abs(frobenius_dot(z - a, other)) < 1e-12);
    // Single block: agrees with the explicit shift-conjugation sum.
    const Matrix sq = random_gaussian(5, 5, rng);
    CHECK(max_abs_diff(block_circulant_average(sq), circulant_project(sq)) < 1e-14);
}

TEST_CASE("Fourier l1 constraint equals the circulant nuclear norm") {
    std::mt19937_64 rng(2);
    for (std::size_t m = 2; m <= 9; ++m) {
        const Vector z = random_gaussian(m, 1, rng).col(0);
        double l1 = 0.0;
        for (const auto& c : dft(z)) l1 += std::abs(c);
        CHECK(std::abs(l1 - nuclear_norm(build_circulant(z))) < 1e-8);

        const std::vector<Vector> gens{z, random_gaussian(m, 1, rng).col(0), random_gaussian(m, 1, rng).col(0)};
        CHECK(std::abs(block_circulant_nuclear(gens) - nuclear_norm(build_block_circulant(gens))) < 1e-8);
    }
}

TEST_CASE("uniform target gives zero logits with a warning") {
    const CyclicSolution s = solve_generating_vectors({Vector(5, 0.2)}, 1, 1);
    CHECK(!s.hypotheses_met);
    CHECK(!s.warning.empty());
    CHECK(frobenius_norm(s.z_matrix) < 1e-9);
    CHECK(s.objective == doctest::Approx(5 * std::log(5.0)));
}

TEST_CASE("two-class instance matches a grid over the feasible set") {
    // Fourier coordinates of z = (z1, z2) are s = z1 + z2 and t = z1 - z2;
    // the constraint is |s| + |t| <= 2 and only t enters the loss.
    auto loss = [](double t) { return 2.0 * (std::log(2.0 * std::cosh(t / 2.0)) - 0.8 * t / 2.0); };
    double best = 1e9, best_t = 0.0;
    const int steps = 2000;
    for (int i = -steps; i <= steps; ++i) {
        const double s = 2.0 * i / steps;
        for (int j = -steps; j <= steps; ++j) {
            const double t = 2.0 * j / steps;
            if (std::abs(s) + std::abs(t) > 2.0 + 1e-12) continue;
            if (loss(t) < best) best = loss(t), best_t = t;
        }
    }
    const CyclicSolution sol = solve_generating_vectors({{0.9, 0.1}}, 2, 2);
    const Vector& z = sol.generators.front();
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(z[0] - z[1] == doctest::Approx(best_t).epsilon(1e-6));
    CHECK(std::abs(z[0] + z[1]) < 1e-8);
    CHECK(sol.nuclear_norm_used == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("seven-class cyclic instance agrees with the factored oracle") {
    const Vector y{0, 0.5, 0.3, 0.2, 0, 0, 0};
    const CyclicSolution sol = solve_generating_vectors({y}, 10, 10);
    CHECK(sol.hypotheses_met);
    CHECK(sol.kkt_residual <= 1e-10);
    CHECK(sol.nuclear_norm_used <= sol.budget + 1e-8);
    CHECK(circ_distance(sol.gram_w) <= 1e-8);
    CHECK(circ_distance(sol.gram_h) <= 1e-8);
    CHECK(!sol.nonunique_flag);

    LayerPeeledProblem p{orbit_matrix(TargetSpec{{{GroupSpec::cyclic(7), y}}}).y, 10, 10, 8};
    PgdOptions opt;
    opt.restarts = 6;
    const SolveReport r = solve_pgd(p, opt);
    CHECK(std::abs(sol.objective - r.objective) <= 1e-3 * r.objective);
    for (double v : r.restart_objectives) CHECK(sol.objective <= v + 1e-6);
}

TEST_CASE("gram identities") {
    const auto [w0, h0] = grams_from_logits(Matrix(3, 3), 1, 1);
    CHECK(frobenius_norm(w0) == 0.0);
    CHECK(frobenius_norm(h0) == 0.0);
    const auto [wi, hi] = grams_from_logits(Matrix::identity(4), 2, 2);
    CHECK(max_abs_diff(wi, Matrix::identity(4)) < 1e-14);
    CHECK(max_abs_diff(hi, Matrix::identity(4)) < 1e-14);
    const Matrix z{{1, -1}, {-1, 1}};
    const auto [w2, h2] = grams_from_logits(z, 2, 2);
    CHECK(max_abs_diff(w2, z) < 1e-14);
    CHECK(max_abs_diff(h2, z) < 1e-14);

    std::mt19937_64 rng(3);
    const Matrix c = build_circulant(random_gaussian(6, 1, rng).col(0));
    const auto [gw, gh] = grams_from_logits(c, 3, 12);
    CHECK(relative_error(gw, 0.5 * principal_sqrt_psd(c * c.transpose())) < 1e-8);
    CHECK(relative_error(gh, 2.0 * principal_sqrt_psd(c.transpose() * c)) < 1e-8);
}

TEST_CASE("factorization of logits") {
    const FactorPair zero = factor_solution(Matrix(3, 3), 1, 1, 3);
    CHECK(frobenius_norm(zero.w) == 0.0);
    CHECK(frobenius_norm(zero.h) == 0.0);

    std::mt19937_64 rng(4);
    Matrix c = build_circulant(random_gaussian(5, 1, rng).col(0));
    const double ew = 4, eh = 9;
    c *= std::sqrt(ew * eh) / nuclear_norm(c);
    const FactorPair f = factor_solution(c, ew, eh, 7);
    CHECK(relative_error(f.logits(), c) < 1e-10);
    CHECK(frobenius_norm_sq(f.w) == doctest::Approx(ew).epsilon(1e-10));
    CHECK(frobenius_norm_sq(f.h) == doctest::Approx(eh).epsilon(1e-10));
    CHECK(max_abs_diff(softmax_columns(f.logits()), softmax_columns(c)) < 1e-10);

    // The Grams do not depend on which partial isometry is used.
    const FactorPair g = factor_solution(c, ew, eh, 7, QMode::random_with_seed(5));
    CHECK(relative_error(g.w * g.w.transpose(), f.w * f.w.transpose()) < 1e-10);
    CHECK(relative_error(g.h.transpose() * g.h, f.h.transpose() * f.h) < 1e-10);
    const auto [gw, gh] = grams_from_logits(c, ew, eh);
    CHECK(relative_error(f.w * f.w.transpose(), gw) < 1e-8);

    CHECK_THROWS_AS(factor_solution(c, ew, eh, 3), InvalidInput);
}

TEST_CASE("symmetrizing logits never increases loss or nuclear norm") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 3 + trial % 4, blocks = 1 + trial % 3;
        std::vector<Vector> ys;
        for (std::size_t b = 0; b < blocks; ++b) ys.push_back(random_distribution(m, rng));
        const Matrix target = build_block_circulant(ys);
        const Matrix z = random_gaussian(m, m * blocks, rng, 2.0);
        const Matrix avg = block_circulant_average(z);
        CHECK(cross_entropy(avg, target) <= cross_entropy(z, target) + 1e-12);
        CHECK(nuclear_norm(avg) <= nuclear_norm(z) + 1e-9);
    }
}

TEST_CASE("multi-block solve stays block circulant and matches the oracle") {
    const std::vector<Vector> ys{{0.6, 0.3, 0.1, 0.0}, {0.1, 0.1, 0.2, 0.6}};
    const CyclicSolution sol = solve_generating_vectors(ys, 3, 3);
    CHECK(sol.kkt_residual <= 1e-10);
    CHECK(sol.nuclear_norm_used <= sol.budget + 1e-8);
    CHECK(sol.z_matrix == build_block_circulant(sol.generators));
    CHECK(circ_distance(sol.gram_w) <= 1e-8);
    CHECK(std::abs(block_circulant_nuclear(sol.generators) - sol.nuclear_norm_used) < 1e-8);

    LayerPeeledProblem p{build_block_circulant(ys), 3, 3, 4};
    PgdOptions opt;
    opt.restarts = 6;
    const SolveReport r = solve_pgd(p, opt);
    CHECK(std::abs(sol.objective - r.objective) <= 1e-3 * r.objective);
    CHECK(sol.objective <= r.objective + 1e-6);
}

TEST_CASE("input validation and cancellation") {
    CHECK_THROWS_AS(solve_generating_vectors({}, 1, 1), InvalidInput);
    CHECK_THROWS_AS(solve_generating_vectors({{0.5, 0.6}}, 1, 1), InvalidInput);
    CHECK_THROWS_AS(solve_generating_vectors({{0.5, 0.5}, {1, 0, 0}}, 1, 1), InvalidInput);
    CHECK_THROWS_AS(solve_generating_vectors({{0.9, 0.1}}, -1, 1), InvalidInput);

    std::stop_source src;
    src.request_stop();
    CyclicOptions opt;
    opt.stop = src.get_token();
    CHECK_THROWS_AS(solve_generating_vectors({{0.7, 0.2, 0.1}}, 2, 2, opt), SolverFailure);

    CyclicOptions tiny;
    tiny.max_iter = 1;
    tiny.tol = 1e-300;
    try {
        solve_generating_vectors({{0.7, 0.2, 0.1}}, 2, 2, tiny);
        FAIL("expected a solver failure");
    } catch (const SolverFailure& e) {
        CHECK(e.last_residual() > 0.0);
    }
}

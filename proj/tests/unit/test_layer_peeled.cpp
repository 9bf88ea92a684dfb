#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "symlab/cyclic_solver.hpp"
#include "symlab/diagnostics.hpp"
#include "symlab/error.hpp"
#include "symlab/groups.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/numerics.hpp"

using namespace symlab;

namespace {

Matrix random_distributions(std::size_t m, std::size_t n, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Matrix y(m, n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += (y(i, j) = g(rng));
        for (std::size_t i = 0; i < m; ++i) y(i, j) /= s;
    }
    return y;
}

// Direct evaluation without max-subtraction, used as an independent oracle
// on moderate logits.
double naive_ce(const Matrix& z, const Matrix& y) {
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) s += std::exp(z(i, j));
        for (std::size_t i = 0; i < z.rows(); ++i) total -= y(i, j) * std::log(std::exp(z(i, j)) / s);
    }
    return total;
}

}  // namespace

TEST_CASE("softmax examples") {
    const Matrix u = softmax_columns(Matrix(4, 1));
    for (std::size_t i = 0; i < 4; ++i) CHECK(u(i, 0) == doctest::Approx(0.25));
    const Matrix p = softmax_columns(Matrix::from_columns({{0.0, std::log(2.0), std::log(3.0)}}));
    CHECK(p(0, 0) == doctest::Approx(1.0 / 6));
    CHECK(p(1, 0) == doctest::Approx(2.0 / 6));
    CHECK(p(2, 0) == doctest::Approx(3.0 / 6));
    const Matrix z = Matrix::from_columns({{0.3, -1.0, 2.0}});
    const Matrix shifted = z + 17.0 * Matrix::ones(3, 1);
    CHECK(max_abs_diff(softmax_columns(z), softmax_columns(shifted)) < 1e-15);
    const Matrix big = softmax_columns(Matrix::from_columns({{1000.0, 0.0}}));
    CHECK(big(0, 0) == doctest::Approx(1.0));
    CHECK(std::isfinite(big(1, 0)));
}

TEST_CASE("objective examples") {
    std::mt19937_64 rng(1);
    const Matrix y = random_distributions(4, 3, rng);
    LayerPeeledProblem p{y, 1, 1, 2};
    FactorPair zero{Matrix(4, 2), Matrix(2, 3)};
    CHECK(objective(p, zero) == doctest::Approx(3 * std::log(4.0)));

    const Matrix y1 = Matrix::from_columns({{1.0, 0.0}});
    CHECK(cross_entropy(Matrix::from_columns({{0.0, 0.0}}), y1) == doctest::Approx(std::log(2.0)));
    for (double a : {0.5, 1.0, 3.0})
        CHECK(cross_entropy(Matrix::from_columns({{a, 0.0}}), y1) == doctest::Approx(std::log1p(std::exp(-a))));
    double prev = 1e9;
    for (double a = 0.0; a < 20.0; a += 1.0) {
        const double v = cross_entropy(Matrix::from_columns({{a, 0.0}}), y1);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("objective agrees with a naive evaluation and the entropy floor") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix y = random_distributions(5, 4, rng);
        const Matrix z = random_gaussian(5, 4, rng, 2.0);
        CHECK(cross_entropy(z, y) == doctest::Approx(naive_ce(z, y)).epsilon(1e-12));
        CHECK(cross_entropy(z, y) >= entropy_floor(y) - 1e-12);
        Matrix logy(5, 4);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 4; ++j) logy(i, j) = std::log(y(i, j));
        CHECK(cross_entropy(logy, y) == doctest::Approx(entropy_floor(y)).epsilon(1e-12));
    }
}

TEST_CASE("invariances of the objective") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix y = random_distributions(4, 5, rng);
        const Matrix z = random_gaussian(4, 5, rng);
        const Matrix beta = random_gaussian(1, 5, rng);
        CHECK(std::abs(cross_entropy(z + Matrix::ones(4, 1) * beta, y) - cross_entropy(z, y)) < 1e-12);

        LayerPeeledProblem p{y, 1, 1, 3};
        FactorPair f{random_gaussian(4, 3, rng), random_gaussian(3, 5, rng)};
        const Matrix r = random_orthogonal(3, rng);
        FactorPair rotated{f.w * r, r.transpose() * f.h};
        CHECK(std::abs(objective(p, rotated) - objective(p, f)) < 1e-12);

        const Matrix z2 = random_gaussian(4, 5, rng);
        for (double t : {0.25, 0.5, 0.9}) {
            const double mix = cross_entropy(t * z + (1 - t) * z2, y);
            CHECK(mix <= t * cross_entropy(z, y) + (1 - t) * cross_entropy(z2, y) + 1e-12);
        }
    }
}

TEST_CASE("gradients vanish where softmax matches the target") {
    const Matrix y = Matrix::from_columns({{0.2, 0.3, 0.5}, {0.5, 0.25, 0.25}});
    Matrix logy(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) logy(i, j) = std::log(y(i, j));
    // W = log Y, H = I reproduces the logits exactly.
    LayerPeeledProblem p{y, 10, 10, 2};
    const Gradients g = gradients(p, {logy, Matrix::identity(2)});
    CHECK(frobenius_norm(g.grad_w) < 1e-15);
    CHECK(frobenius_norm(g.grad_h) < 1e-15);

    const Gradients g0 = gradients(p, {Matrix(3, 2), Matrix(2, 2)});
    CHECK(frobenius_norm(g0.grad_w) == 0.0);
    CHECK(frobenius_norm(g0.grad_h) == 0.0);
}

TEST_CASE("gradients agree with central finite differences") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> dim(2, 6);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = dim(rng), d = dim(rng), n = dim(rng);
        LayerPeeledProblem p{random_distributions(m, n, rng), 1, 1, d};
        FactorPair f{random_gaussian(m, d, rng), random_gaussian(d, n, rng)};
        const Matrix dw = random_gaussian(m, d, rng), dh = random_gaussian(d, n, rng);
        const Gradients g = gradients(p, f);
        const double analytic = frobenius_dot(g.grad_w, dw) + frobenius_dot(g.grad_h, dh);
        const double fd = (objective(p, {f.w + h * dw, f.h + h * dh}) - objective(p, {f.w - h * dw, f.h - h * dh})) /
                          (2 * h);
        CHECK(std::abs(fd - analytic) <= 1e-5 * std::max(1.0, std::abs(analytic)));
    }
}

TEST_CASE("frobenius ball projection") {
    const Matrix a{{1, 0}, {0, 1}};
    CHECK(project_frobenius_ball(a, 4) == a);
    const Matrix b{{4, 0}, {0, 0}};
    CHECK(frobenius_norm(project_frobenius_ball(b, 4)) == doctest::Approx(2.0));
    CHECK(project_frobenius_ball(Matrix(2, 2), 1) == Matrix(2, 2));
    CHECK_THROWS_AS(project_frobenius_ball(a, 0), InvalidInput);
}

TEST_CASE("pgd on the two-class single-sample instance matches an angle grid") {
    // Z is a 2x1 vector with ||Z|| <= 1; search the boundary by angle.
    double best = 1e9;
    for (int k = 0; k <= 200000; ++k) {
        const double t = 2 * std::numbers::pi * k / 200000.0;
        best = std::min(best, std::log1p(std::exp(std::sin(t) - std::cos(t))));
    }
    CHECK(best == doctest::Approx(std::log1p(std::exp(-std::sqrt(2.0)))).epsilon(1e-9));

    LayerPeeledProblem p{Matrix::from_columns({{1.0, 0.0}}), 1, 1, 2};
    PgdOptions opt;
    opt.restarts = 5;
    const SolveReport r = solve_pgd(p, opt);
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-6));
    CHECK(r.objective == doctest::Approx(objective(p, r.best)).epsilon(1e-12));
    CHECK(r.constraint_activity.first > 1 - 1e-3);
    CHECK(r.constraint_activity.second > 1 - 1e-3);
    CHECK(r.constraint_activity.first <= 1 + 1e-9);
}

TEST_CASE("pgd is deterministic and reports per-restart data") {
    std::mt19937_64 rng(5);
    LayerPeeledProblem p{random_distributions(3, 4, rng), 2, 3, 3};
    PgdOptions opt;
    opt.restarts = 4;
    opt.seed = 99;
    const SolveReport a = solve_pgd(p, opt);
    opt.threads = 1;
    const SolveReport b = solve_pgd(p, opt);
    CHECK(a.best.w == b.best.w);
    CHECK(a.best.h == b.best.h);
    CHECK(a.restart_objectives.size() == 4);
    CHECK(a.restart_objectives[a.best_restart] == a.objective);
    CHECK(a.consensus_gap >= 0.0);
    CHECK(frobenius_norm_sq(a.best.w) <= 2 * (1 + 1e-9));
    CHECK(frobenius_norm_sq(a.best.h) <= 3 * (1 + 1e-9));
}

TEST_CASE("pgd recovers circulant logits on the seven-class cyclic target") {
    const Vector y{0, 0.5, 0.3, 0.2, 0, 0, 0};
    LayerPeeledProblem p{orbit_matrix(TargetSpec{{{GroupSpec::cyclic(7), y}}}).y, 10, 10, 8};
    PgdOptions opt;
    opt.restarts = 4;
    const SolveReport r = solve_pgd(p, opt);
    CHECK(circ_distance(r.best.logits()) <= 1e-3);
}

TEST_CASE("problem validation") {
    LayerPeeledProblem bad{Matrix::from_columns({{0.5, 0.6}}), 1, 1, 2};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    LayerPeeledProblem zero_budget{Matrix::from_columns({{0.5, 0.5}}), 0, 1, 2};
    CHECK_THROWS_AS(zero_budget.validate(), InvalidInput);
    PgdOptions opt;
    opt.restarts = 0;
    CHECK_THROWS_AS(solve_pgd({Matrix::from_columns({{0.5, 0.5}}), 1, 1, 1}, opt), InvalidInput);
}

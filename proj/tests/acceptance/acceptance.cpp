#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "symlab/cyclic_solver.hpp"
#include "symlab/diagnostics.hpp"
#include "symlab/error.hpp"
#include "symlab/groups.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/lifted_solver.hpp"
#include "symlab/numerics.hpp"
#include "symlab/perm_solver.hpp"

using namespace symlab;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "!") + what;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector random_simplex(std::size_t m, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Vector y(m);
    double s = 0.0;
    for (double& v : y) s += (v = g(rng));
    for (double& v : y) v /= s;
    return y;
}

Outcome cyclic_transfer() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const Vector y{0, 0.5, 0.3, 0.2, 0, 0, 0};
    const OrbitMatrix orbit = orbit_matrix(TargetSpec{{{GroupSpec::cyclic(7), y}}});
    PgdOptions opt;
    opt.restarts = 20;
    opt.seed = 0;
    const SolveReport pgd = solve_pgd({orbit.y, 10, 10, 8}, opt);
    const CyclicSolution sol = solve_generating_vectors({y}, 10, 10);
    const double dc = circ_distance(pgd.best.logits());
    const double rel = std::abs(sol.objective - pgd.objective) / std::abs(pgd.objective);
    const double gw = circ_distance(sol.gram_w);
    const double secs = seconds_since(t0);
    o.require(dc <= 1e-3, "pgd delta_circ " + fmt("%.3e", dc));
    o.require(rel <= 1e-3, "objective gap " + fmt("%.3e", rel));
    o.require(gw <= 1e-8, "gram_w delta_circ " + fmt("%.3e", gw));
    o.require(secs <= 60, "time " + fmt("%.2fs", secs));
    return o;
}

Outcome etf_transfer() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const double e = 9;
    const TargetSpec target{{{GroupSpec::symmetric(3), {0.5, 0.3, 0.2}}}};
    const OrbitMatrix orbit = orbit_matrix(target);
    const auto blocks = alpha_blocks(target, orbit);
    PgdOptions opt;
    opt.restarts = 20;
    const SolveReport pgd = solve_pgd({orbit.y, e, e, 3}, opt);
    o.require(true, "pgd objective " + fmt("%.9f", pgd.objective));
    try {
        const AlphaCertificate cert = solve_alpha(blocks, e, e);
        const EtfSolution s = construct_solution(cert, orbit, 3);
        const Matrix ref = (e / 2) * centering_projector(3);
        const double gw = relative_error(s.gram_w, ref);
        const double kc = frobenius_norm(s.logits + cert.k * s.c) / (cert.k * frobenius_norm(s.c));
        const double gap = std::abs(s.objective - pgd.objective) / std::abs(pgd.objective);
        o.require(gw <= 1e-8, "gram_w error " + fmt("%.3e", gw));
        o.require(kc <= 1e-8, "WH+kC " + fmt("%.3e", kc));
        o.require(cert.residual <= 1e-10, "alpha residual " + fmt("%.3e", cert.residual));
        o.require(gap <= 1e-3, "objective gap " + fmt("%.3e", gap));
    } catch (const std::exception& ex) {
        o.require(false, std::string("closed form unavailable: ") + ex.what());
        o.require(true, "pgd gram_w etf distance " + fmt("%.3e", etf_distance(pgd.best.w * pgd.best.w.transpose()).delta));
    }
    const double secs = seconds_since(t0);
    o.require(secs <= 120, "time " + fmt("%.2fs", secs));
    return o;
}

Outcome alpha_oracle() {
    Outcome o;
    const double p = 0.9, e = 4;
    // Two classes with the swap orbit (two columns): on a < p the objective
    // phi(a) = -2 e |a - p| + 2 H(a) has derivative 2 e - 2 log(a / (1 - a)).
    auto dphi = [&](double a) { return 2 * e - 2 * std::log(a / (1 - a)); };
    auto phi2 = [&](double a) {
        const double h = -(a * std::log(a) + (1 - a) * std::log(1 - a));
        return -2 * e * std::abs(a - p) + 2 * h;
    };
    double lo = 0.5, hi = p;
    const bool bracket = dphi(lo) * dphi(hi) < 0;
    double root = NAN;
    if (bracket) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (dphi(mid) > 0 ? lo : hi) = mid;
        }
        root = 0.5 * (lo + hi);
    }
    o.require(bracket, bracket ? "bisection root " + fmt("%.12f", root)
                               : "bisection: no sign change of the stationarity equation on (1/2, p)");

    const TargetSpec target{{{GroupSpec::symmetric(2), {p, 1 - p}}}};
    const OrbitMatrix orbit = orbit_matrix(target);
    const auto blocks = alpha_blocks(target, orbit);
    try {
        const AlphaCertificate cert = solve_alpha(blocks, e, e);
        const double a = cert.alphas[0][0];
        o.require(bracket && std::abs(a - root) <= 1e-9, "solve_alpha " + fmt("%.12f", a));
        const double best = phi(blocks, cert.alphas, e, e);
        std::mt19937_64 rng(0);
        int beaten = 0;
        for (int s = 0; s < 100000; ++s)
            if (phi(blocks, {random_simplex(2, rng)}, e, e) > best + 1e-12) ++beaten;
        o.require(beaten == 0, "random points above phi(alpha): " + std::to_string(beaten));
    } catch (const std::exception& ex) {
        o.require(false, std::string("solve_alpha: ") + ex.what());
        // Grid maximum of phi sits at the kink a = p, where gamma = 0.
        double best_a = 0, best = -1e300;
        for (int k = 1; k < 100000; ++k) {
            const double a = k / 100000.0;
            if (phi2(a) > best) best = phi2(a), best_a = a;
        }
        o.require(true, "grid maximizer of phi " + fmt("%.5f", best_a));
    }
    return o;
}

Outcome flat_spectrum() {
    Outcome o;
    std::mt19937_64 rng(0);
    double worst = 0.0;
    int solved = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 3 + trial % 3;
        Vector y = random_simplex(m, rng);
        const TargetSpec t{{{GroupSpec::symmetric(m), y}}};
        const OrbitMatrix orbit = orbit_matrix(t);
        const auto blocks = alpha_blocks(t, orbit);
        // Budget at a fixed fraction of the solvability threshold.
        const double e = 0.5 * std::sqrt(alpha_system_capacity(blocks) * (m - 1));
        const EtfSolution s = construct_solution(solve_alpha(blocks, e, e), orbit, m);
        worst = std::max(worst, s.c_singular_values.front() / s.c_singular_values.back() - 1.0);
        ++solved;
    }
    o.require(solved == 20, std::to_string(solved) + " instances");
    o.require(worst <= 1e-7, "max relative spread " + fmt("%.3e", worst));
    return o;
}

Outcome diagnostics_exactness() {
    Outcome o;
    std::mt19937_64 rng(0);
    double etf = 0.0, circ = 0.0, scale = 0.0, idem = 0.0, adj = 0.0;
    for (std::size_t q = 2; q <= 10; ++q) {
        etf = std::max(etf, etf_distance(etf_reference(q)).delta);
        const Matrix c = build_circulant(random_gaussian(q, 1, rng).col(0));
        circ = std::max(circ, circ_distance(c));
        const Matrix f = random_gaussian(q, q, rng);
        const Matrix g = f * f.transpose();
        for (double a : {1e-3, 2.5, 1e3}) {
            scale = std::max(scale, std::abs(etf_distance(a * g).delta - etf_distance(g).delta));
            scale = std::max(scale, std::abs(circ_distance(a * g) - circ_distance(g)));
        }
        const Matrix pa = circulant_project(f), b = random_gaussian(q, q, rng);
        idem = std::max(idem, max_abs_diff(circulant_project(pa), pa));
        adj = std::max(adj, std::abs(frobenius_dot(pa, b) - frobenius_dot(f, circulant_project(b))));
    }
    const double hand = circ_distance(Matrix{{1, 0}, {0, 0}});
    o.require(etf <= 1e-12, "delta_etf(M*) " + fmt("%.1e", etf));
    o.require(circ <= 1e-12, "delta_circ(circulant) " + fmt("%.1e", circ));
    o.require(scale <= 1e-12, "scale drift " + fmt("%.1e", scale));
    o.require(idem <= 1e-10, "idempotence " + fmt("%.1e", idem));
    o.require(adj <= 1e-10, "self-adjointness " + fmt("%.1e", adj));
    o.require(std::abs(hand - 0.707107) <= 1e-6, "hand value " + fmt("%.6f", hand));
    return o;
}

Outcome gradient_check() {
    Outcome o;
    std::mt19937_64 rng(0);
    std::uniform_int_distribution<int> dim(2, 6);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = dim(rng), d = dim(rng), n = dim(rng);
        Matrix y(m, n);
        for (std::size_t j = 0; j < n; ++j) {
            const Vector c = random_simplex(m, rng);
            for (std::size_t i = 0; i < m; ++i) y(i, j) = c[i];
        }
        const LayerPeeledProblem p{y, 1, 1, d};
        const FactorPair f{random_gaussian(m, d, rng), random_gaussian(d, n, rng)};
        const Matrix dw = random_gaussian(m, d, rng), dh = random_gaussian(d, n, rng);
        const Gradients g = gradients(p, f);
        const double analytic = frobenius_dot(g.grad_w, dw) + frobenius_dot(g.grad_h, dh);
        const double h = 1e-6;
        const double fd =
            (objective(p, {f.w + h * dw, f.h + h * dh}) - objective(p, {f.w - h * dw, f.h - h * dh})) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
    }
    o.require(worst <= 1e-5, "max relative error " + fmt("%.3e", worst));
    return o;
}

Outcome inequality_suite() {
    Outcome o;
    std::mt19937_64 rng(0);
    std::uniform_int_distribution<int> dim(1, 8);
    double slack = 1e300;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = dim(rng), d = dim(rng), n = dim(rng);
        const Matrix w = random_gaussian(m, d, rng), h = random_gaussian(d, n, rng);
        slack = std::min(slack, frobenius_norm(w) * frobenius_norm(h) - nuclear_norm(w * h));
        slack = std::min(slack, 0.5 * (frobenius_norm_sq(w) + frobenius_norm_sq(h)) - nuclear_norm(w * h));
        const Matrix a = random_gaussian(m, n, rng), b = random_gaussian(m, n, rng);
        const Vector sa = singular_values(a), sb = singular_values(b);
        double bound = 0.0;
        for (std::size_t k = 0; k < std::min(sa.size(), sb.size()); ++k) bound += sa[k] * sb[k];
        slack = std::min(slack, bound - std::abs(frobenius_dot(a, b)));
    }
    o.require(slack >= -1e-9, "min slack " + fmt("%.3e", slack));
    return o;
}

Outcome multi_block() {
    Outcome o;
    const double e = 3;
    const TargetSpec animals = animals_target();
    const OrbitMatrix orbit = orbit_matrix(animals);
    o.require(orbit.y.rows() == 3 && orbit.y.cols() == 4, "animals target 3x4");
    const EtfSolution factored = construct_solution(solve_alpha(alpha_blocks(animals, orbit), e, e), orbit, 4);
    const LiftedSolution lifted = solve_lifted({orbit.y, e, e});
    const double gap = std::abs(lifted.objective - factored.objective);
    o.require(gap <= 1e-3, "lifted vs factored " + fmt("%.3e", gap));

    const TargetSpec two{{{GroupSpec::symmetric(3), {0.6, 0.3, 0.1}}, {GroupSpec::symmetric(3), {0.4, 0.4, 0.2}}}};
    const OrbitMatrix o2 = orbit_matrix(two);
    const double e2 = 1.5;
    const AlphaCertificate cert = solve_alpha(alpha_blocks(two, o2), e2, e2);
    const EtfSolution s = construct_solution(cert, o2, 4);
    const double gw = relative_error(s.gram_w, (e2 / 2) * centering_projector(3));
    const double kc = frobenius_norm(s.logits + cert.k * s.c) / (cert.k * frobenius_norm(s.c));
    const double gh = relative_error(s.gram_h, (e2 / (2 * cert.gamma * cert.gamma)) * multiply_atb(s.c, s.c));
    const double spread = s.c_singular_values.front() / s.c_singular_values.back() - 1.0;
    o.require(std::max({gw, kc, gh, spread}) <= 1e-6,
              "two-block products " + fmt("%.1e", std::max({gw, kc, gh, spread})));
    return o;
}

Outcome lifted_patterns() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const TargetSpec t{{{GroupSpec::direct_sum({2, 3}), {0, 0.25, 0.5, 1.0 / 6, 1.0 / 12}}}};
    const LiftedSolution s = solve_lifted({orbit_matrix(t).y, 5, 5});
    const BlockPatternFit fit = fit_block_pattern(s.gram_w, pattern::DirectSum{{2, 3}});
    const double secs = seconds_since(t0);
    o.require(fit.relative_residual <= 5e-2, "pattern residual " + fmt("%.3e", fit.relative_residual));
    o.require(secs <= 600, "time " + fmt("%.2fs", secs));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"cyclic_symmetry_transfer", cyclic_transfer},
        {"etf_symmetry_transfer", etf_transfer},
        {"alpha_system_oracle", alpha_oracle},
        {"flat_spectrum", flat_spectrum},
        {"diagnostics_exactness", diagnostics_exactness},
        {"gradient_correctness", gradient_check},
        {"inequality_suite", inequality_suite},
        {"multi_block", multi_block},
        {"lifted_patterns", lifted_patterns},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

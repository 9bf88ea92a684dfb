#include "symlab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "symlab/config.hpp"
#include "symlab/cyclic_solver.hpp"
#include "symlab/diagnostics.hpp"
#include "symlab/error.hpp"
#include "symlab/groups.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/lifted_solver.hpp"
#include "symlab/matrix_io.hpp"
#include "symlab/numerics.hpp"
#include "symlab/perm_solver.hpp"

#ifndef SYMLAB_VERSION
#define SYMLAB_VERSION "0.0.0"
#endif

namespace symlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kOutputEnv = "SYMLAB_OUTPUT_DIR";
constexpr const char* kDefaultOutput = "symlab_out";

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ParseError:
        case ErrorKind::InvalidInput:
        case ErrorKind::DegenerateInput:
            return kExitParse;
        default:
            return kExitSolver;
    }
}

double rel_diff(const Matrix& a, const Matrix& b) {
    const double denom = frobenius_norm(b);
    return frobenius_norm(a - b) / (denom > 0.0 ? denom : 1.0);
}

/// Collects output matrices, residuals and invariant checks for one command
/// and renders them into manifest.json.
class Run {
public:
    Run(std::string command, fs::path dir, const ExperimentConfig* config, PayloadFormat format)
        : command_(std::move(command)), dir_(std::move(dir)), config_(config), format_(format) {
        fs::create_directories(dir_);
    }

    void write(const std::string& name, const Matrix& m, std::vector<std::string> labels = {}) {
        MatrixFile f;
        f.name = name;
        f.data = m;
        f.labels = std::move(labels);
        f.provenance = std::string("symlab ") + SYMLAB_VERSION + " " + command_;
        f.format = format_;
        const std::string bytes = serialize_matrix(f);
        const std::string file = name + ".mat";
        write_matrix(f, dir_ / file);
        outputs_.push_back({{"file", file},
                            {"name", name},
                            {"rows", m.rows()},
                            {"cols", m.cols()},
                            {"fnv1a64", hex64(fnv1a64(bytes))}});
        written_.emplace_back(file, f);
    }

    void value(const std::string& key, json v) { values_[key] = std::move(v); }

    void check(const std::string& name, double value, double tol) {
        const bool ok = std::isfinite(value) && value <= tol;
        checks_.push_back({{"name", name}, {"value", value}, {"tolerance", tol}, {"passed", ok}});
        if (!ok) failed_.push_back(name);
    }

    void warn(const std::string& w) { warnings_.push_back(w); }

    /// Re-reads every written file and compares it with what was written.
    void check_round_trip() {
        double worst = 0.0;
        for (const auto& [file, f] : written_) {
            const MatrixFile back = read_matrix(dir_ / file);
            if (back.data.rows() != f.data.rows() || back.data.cols() != f.data.cols() ||
                back.labels != f.labels) {
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            worst = std::max(worst, max_abs_diff(back.data, f.data));
        }
        check("artifact_round_trip", worst, f_tolerance());
    }

    int finish(std::ostream& out) {
        json m;
        m["command"] = command_;
        m["version"] = SYMLAB_VERSION;
        if (config_) {
            m["config_hash"] = config_hash(*config_);
            m["seed"] = config_->seed;
            m["config"] = config_to_json(*config_);
        }
        m["values"] = values_;
        m["checks"] = checks_;
        m["outputs"] = outputs_;
        m["warnings"] = warnings_;
        const int code = failed_.empty() ? kExitOk : kExitInvariant;
        m["exit_code"] = code;
        std::ofstream f(dir_ / "manifest.json", std::ios::trunc);
        f << m.dump(2) << "\n";
        if (!f) throw InvalidInput("cannot write manifest in " + dir_.string());
        for (const auto& c : checks_) {
            char line[256];
            std::snprintf(line, sizeof line, "%-34s %-4s %.3e (tol %.1e)\n",
                          c["name"].get<std::string>().c_str(), c["passed"].get<bool>() ? "ok" : "FAIL",
                          c["value"].get<double>(), c["tolerance"].get<double>());
            out << line;
        }
        for (const auto& w : warnings_) out << "warning: " << w << "\n";
        out << "manifest " << (dir_ / "manifest.json").string() << "\n";
        return code;
    }

private:
    double f_tolerance() const { return format_ == PayloadFormat::Binary ? 0.0 : 1e-15; }

    std::string command_;
    fs::path dir_;
    const ExperimentConfig* config_;
    PayloadFormat format_;
    json values_ = json::object();
    json checks_ = json::array();
    json outputs_ = json::array();
    json warnings_ = json::array();
    std::vector<std::string> failed_;
    std::vector<std::pair<std::string, MatrixFile>> written_;
};

QMode q_mode_for(const ExperimentConfig& c) {
    return c.solver.random_q ? QMode::random_with_seed(c.seed) : QMode::canonical();
}

bool all_cyclic(const TargetSpec& t) {
    return std::all_of(t.blocks.begin(), t.blocks.end(), [](const TargetBlock& b) {
        return std::holds_alternative<group::Cyclic>(b.group.variant());
    });
}

void run_cyclic(const ExperimentConfig& c, Run& run, bool verify) {
    if (!all_cyclic(c.target))
        throw InvalidInput("solve-cyclic needs every target block to use a cyclic group");
    std::vector<Vector> bases;
    for (const auto& b : c.target.blocks) bases.push_back(b.base);
    CyclicOptions opts;
    opts.tol = c.solver.tol;
    opts.seed = c.seed;
    const CyclicSolution sol = solve_generating_vectors(bases, c.e_w, c.e_h, opts);
    const FactorPair f = factor_solution(sol.z_matrix, c.e_w, c.e_h, c.d, q_mode_for(c));

    run.write("logits", sol.z_matrix);
    run.write("gram_w", sol.gram_w);
    run.write("gram_h", sol.gram_h);
    run.write("w", f.w);
    run.write("h", f.h);
    json gens = json::array();
    for (const auto& g : sol.generators) gens.push_back(g);
    run.value("generators", gens);
    run.value("objective", sol.objective);
    run.value("nuclear_norm", sol.nuclear_norm_used);
    run.value("budget", sol.budget);
    run.value("iterations", sol.iterations);
    run.value("restart_iterate_gap", sol.restart_iterate_gap);
    run.value("restart_objective_gap", sol.restart_objective_gap);
    run.value("nonunique", sol.nonunique_flag);
    if (!sol.hypotheses_met) run.warn(sol.warning);

    const double scale = std::max(1.0, sol.budget);
    run.check("kkt_residual", sol.kkt_residual, c.solver.tol);
    run.check("nuclear_norm_excess", std::max(0.0, sol.nuclear_norm_used - sol.budget) / scale, 1e-8);
    const Matrix& z = sol.z_matrix;
    const double z_norm = frobenius_norm(z);
    const double z_circ = z_norm > 0.0 ? frobenius_norm(z - block_circulant_average(z)) / z_norm : 0.0;
    run.check("delta_circ_logits", z_circ, 1e-8);
    run.check("delta_circ_gram_w", circ_distance(sol.gram_w), 1e-8);
    if (bases.size() == 1) run.check("delta_circ_gram_h", circ_distance(sol.gram_h), 1e-8);
    run.check("factor_product_error", rel_diff(f.logits(), z), 1e-8);
    run.check("factor_gram_w_error", rel_diff(f.w * f.w.transpose(), sol.gram_w), 1e-8);
    run.check("factor_gram_h_error", rel_diff(f.h.transpose() * f.h, sol.gram_h), 1e-8);
    run.check("budget_w_excess", std::max(0.0, frobenius_norm_sq(f.w) - c.e_w) / c.e_w, 1e-8);
    run.check("budget_h_excess", std::max(0.0, frobenius_norm_sq(f.h) - c.e_h) / c.e_h, 1e-8);
    if (verify) {
        // Equivariance: shifting the target by the generator shifts the logits.
        const std::size_t m = c.target.degree();
        const Matrix p = Permutation::cyclic_shift(m).as_matrix();
        double worst = 0.0;
        for (std::size_t b = 0; b < bases.size(); ++b) {
            const Matrix blk = z.col_block(b * m, m);
            if (frobenius_norm(blk) > 0.0) worst = std::max(worst, rel_diff(p * blk, blk * p));
        }
        run.check("shift_commutation", worst, 1e-8);
    }
}

void run_perm(const ExperimentConfig& c, Run& run, bool verify) {
    const OrbitMatrix orbit = orbit_matrix(c.target);
    const auto blocks = alpha_blocks(c.target, orbit);
    AlphaOptions opts;
    opts.tol = c.solver.tol;
    const AlphaCertificate cert = solve_alpha(blocks, c.e_w, c.e_h, opts);
    const EtfSolution sol = construct_solution(cert, orbit, c.d, q_mode_for(c));
    const std::size_t m = orbit.y.rows();

    run.write("target", orbit.y);
    run.write("logits", sol.logits);
    run.write("gram_w", sol.gram_w);
    run.write("gram_h", sol.gram_h);
    run.write("w", sol.w);
    run.write("h", sol.h);
    run.write("residual_c", sol.c);
    json alphas = json::array();
    for (const auto& a : cert.alphas) alphas.push_back(a);
    run.value("alphas", alphas);
    run.value("k", cert.k);
    run.value("gamma", cert.gamma);
    run.value("objective", sol.objective);
    run.value("lower_bound", sol.lower_bound);
    run.value("c_singular_values", sol.c_singular_values);

    run.check("alpha_residual", cert.residual, c.solver.tol);
    const Matrix kc = cert.k * sol.c;
    run.check("logits_vs_kc", frobenius_norm(sol.logits + kc) / frobenius_norm(kc), 1e-8);
    const Matrix etf = (c.e_w / static_cast<double>(m - 1)) * centering_projector(m);
    run.check("gram_w_vs_simplex", rel_diff(sol.gram_w, etf), 1e-8);
    const auto& s = sol.c_singular_values;
    const double spread = s.empty() ? 0.0 : (s.front() - s.back()) / s.front();
    run.check("c_spectrum_spread", spread, 1e-7);
    run.check("prediction_alpha_error", prediction_alpha_error(sol, orbit), 1e-8);
    run.check("budget_w_excess", std::max(0.0, frobenius_norm_sq(sol.w) - c.e_w) / c.e_w, 1e-8);
    run.check("budget_h_excess", std::max(0.0, frobenius_norm_sq(sol.h) - c.e_h) / c.e_h, 1e-8);
    if (verify) {
        run.check("logits_equivariance", orbit_equivariance_error(sol.logits, orbit), 1e-8);
        run.check("delta_etf_gram_w", etf_distance(sol.gram_w).delta, 1e-8);
    }
}

bool perm_applicable(const ExperimentConfig& c) {
    if (all_cyclic(c.target)) return false;
    try {
        const OrbitMatrix orbit = orbit_matrix(c.target);
        (void)alpha_blocks(c.target, orbit);
        return true;
    } catch (const HypothesisViolated&) {
        return false;
    }
}

void run_lifted(const ExperimentConfig& c, Run& run) {
    const OrbitMatrix orbit = orbit_matrix(c.target);
    LiftedOptions opts;
    opts.max_iter = c.solver.lifted_max_iter;
    opts.tol = c.solver.lifted_tol;
    opts.seed = c.seed;
    const LiftedSolution sol = solve_lifted({orbit.y, c.e_w, c.e_h}, opts);
    run.write("target", orbit.y);
    run.write("lifted_x", sol.x);
    run.write("gram_w", sol.gram_w);
    run.write("gram_h", sol.gram_h);
    run.write("logits", sol.logits);
    run.value("objective", sol.objective);
    run.value("iterations", sol.iterations);
    run.value("activity", {sol.activity.first, sol.activity.second});
    run.value("min_eigenvalue", sol.min_eigenvalue);
    run.check("kkt_residual", sol.kkt_residual, c.solver.lifted_tol);
    const double scale = std::max(1.0, frobenius_norm(sol.x));
    run.check("psd_violation", std::max(0.0, -sol.min_eigenvalue) / scale, 1e-8);
    run.check("trace_h_excess", std::max(0.0, trace(sol.gram_h) - c.e_h) / c.e_h, 1e-8);
    run.check("trace_w_excess", std::max(0.0, trace(sol.gram_w) - c.e_w) / c.e_w, 1e-8);
    if (c.solver.pattern) {
        const BlockPatternFit fit = fit_block_pattern(sol.gram_w, *c.solver.pattern);
        run.write("gram_w_pattern", fit.fitted);
        json kappa = json::array();
        for (const auto& [ij, v] : fit.kappa) kappa.push_back({ij.first, ij.second, v});
        run.value("pattern",
                  {{"relative_residual", fit.relative_residual},
                   {"parameter_count", fit.parameter_count},
                   {"alpha_diag", fit.alpha_diag},
                   {"beta_diag", fit.beta_diag},
                   {"kappa", kappa},
                   {"alpha_off", fit.alpha_off},
                   {"beta_off", fit.beta_off},
                   {"coincides_with_grid", fit.coincides_with_grid}});
    }
}

void run_pgd(const ExperimentConfig& c, Run& run) {
    const OrbitMatrix orbit = orbit_matrix(c.target);
    PgdOptions opts;
    opts.restarts = c.solver.restarts;
    opts.max_iter = c.solver.max_iter;
    opts.step = c.solver.step;
    opts.seed = c.seed;
    opts.rel_tol = c.solver.rel_tol;
    opts.threads = c.solver.threads;
    const SolveReport rep = solve_pgd({orbit.y, c.e_w, c.e_h, c.d}, opts);
    run.write("target", orbit.y);
    run.write("w", rep.best.w);
    run.write("h", rep.best.h);
    run.write("logits", rep.best.logits());
    run.value("objective", rep.objective);
    run.value("best_restart", rep.best_restart);
    run.value("restart_objectives", rep.restart_objectives);
    run.value("iterations", rep.iterations);
    run.value("converged", rep.converged);
    run.value("constraint_activity", {rep.constraint_activity.first, rep.constraint_activity.second});
    run.value("consensus_gap", rep.consensus_gap);
    run.check("budget_w_excess", std::max(0.0, frobenius_norm_sq(rep.best.w) - c.e_w) / c.e_w, 1e-9);
    run.check("budget_h_excess", std::max(0.0, frobenius_norm_sq(rep.best.h) - c.e_h) / c.e_h, 1e-9);
    if (std::none_of(rep.converged.begin(), rep.converged.end(), [](bool b) { return b; }))
        run.warn("no restart met the stopping rule within max_iter");
}

fs::path resolve_output(const std::string& flag, const ExperimentConfig* c) {
    if (!flag.empty()) return flag;
    if (c && !c->output_dir.empty()) return c->output_dir;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return kDefaultOutput;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& paths) {
    std::vector<fs::path> out;
    for (const auto& p : paths) {
        const fs::path path(p);
        if (fs::is_directory(path)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(path)) {
                const auto ext = entry.path().extension();
                if (entry.is_regular_file() && (ext == ".mat" || ext == ".txt")) found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(path);
        }
    }
    return out;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    // Avoid printing "-0.000000" for tiny negative values.
    if (std::string_view(buf) == "-0.000000") return "0.000000";
    return buf;
}

struct DiagnoseResult {
    std::string text;
    json summary;
    std::optional<Matrix> heatmap;
    std::vector<std::string> labels;
    int code = kExitOk;
};

DiagnoseResult diagnose_one(const fs::path& path, const DiagnosticChecks& checks) {
    DiagnoseResult r;
    try {
        const MatrixFile f = read_matrix(path);
        const DiagnosticsReport rep = build_report(GramMatrix::from_matrix(f.data, f.labels), checks);
        std::string t = "file " + path.string() + "\n";
        r.summary["file"] = path.string();
        r.summary["name"] = f.name;
        if (rep.delta_etf) {
            t += "delta_etf " + fixed6(*rep.delta_etf) + "\n";
            t += "delta_etf_raw " + fixed6(*rep.delta_etf_raw) + "\n";
            t += "c_star " + fixed6(*rep.c_star) + "\n";
            if (rep.anti_aligned) t += "anti_aligned true\n";
            r.summary["delta_etf"] = *rep.delta_etf;
            r.summary["delta_etf_raw"] = *rep.delta_etf_raw;
            r.summary["c_star"] = *rep.c_star;
            r.summary["anti_aligned"] = rep.anti_aligned;
        }
        if (rep.delta_circ) {
            t += "delta_circ " + fixed6(*rep.delta_circ) + "\n";
            t += "delta_circ_raw " + fixed6(*rep.delta_circ_raw) + "\n";
            r.summary["delta_circ"] = *rep.delta_circ;
            r.summary["delta_circ_raw"] = *rep.delta_circ_raw;
        }
        r.text = std::move(t);
        r.heatmap = rep.heatmap;
        r.labels = rep.heatmap_labels;
    } catch (const Error& e) {
        r.text = "file " + path.string() + "\nerror " + e.what() + "\n";
        r.summary = {{"file", path.string()}, {"error", e.what()}};
        r.code = exit_code_for(e);
    }
    return r;
}

int cmd_diagnose(const std::vector<std::string>& paths, bool etf, bool circ, const std::string& out_flag,
                 bool json_out, std::ostream& out, std::ostream& err) {
    DiagnosticChecks checks;
    if (etf || circ) checks = {etf, circ};
    const std::vector<fs::path> files = expand_inputs(paths);
    if (files.empty()) {
        err << "diagnose: no input files\n";
        return kExitParse;
    }
    std::vector<DiagnoseResult> results(files.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers =
        std::min<std::size_t>(files.size(), std::max(1u, std::thread::hardware_concurrency()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < files.size(); i = next++) results[i] = diagnose_one(files[i], checks);
            });
    }

    int code = kExitOk;
    json summary = json::array();
    for (const auto& r : results) {
        if (!json_out) out << r.text;
        if (r.code != kExitOk) err << r.text;
        summary.push_back(r.summary);
        code = std::max(code, r.code);
    }
    if (json_out) out << summary.dump(2) << "\n";

    if (!out_flag.empty()) {
        Run run("diagnose", out_flag, nullptr, PayloadFormat::Text);
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (!results[i].heatmap) continue;
            run.write("heatmap_" + std::to_string(i) + "_" + files[i].stem().string(), *results[i].heatmap,
                      results[i].labels);
        }
        run.value("reports", summary);
        std::ostringstream sink;
        run.finish(sink);
    }
    return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"symlab: symmetry transfer in constrained layer-peeled models", "symlab"};
    app.set_version_flag("--version", SYMLAB_VERSION);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string format = "binary";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("-o,--output-dir", out_dir, "output directory (overrides config and $SYMLAB_OUTPUT_DIR)");
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--format", format, "payload format for written matrices")
            ->check(CLI::IsMember({"binary", "text"}));
    };

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"solve-cyclic", "solve the generating-vector program for cyclic targets"},
        {"solve-perm", "closed-form construction for 2-transitive targets"},
        {"solve-multiblock", "dispatch a multi-block target to the cyclic or 2-transitive solver"},
        {"oracle-pgd", "projected gradient descent on the factored problem"},
        {"lift-solve", "convex lifted relaxation with optional block-pattern fit"},
        {"verify", "run the invariant suite for the target's symmetry class"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : commands) {
        subs[c.name] = app.add_subcommand(c.name, c.help);
        add_common(subs[c.name]);
    }

    std::vector<std::string> diag_paths;
    bool diag_etf = false;
    bool diag_circ = false;
    bool diag_json = false;
    std::string diag_out;
    CLI::App* diag = app.add_subcommand("diagnose", "ETF and circulant distances of Gram matrix files");
    diag->add_flag("--etf", diag_etf, "report the simplex-ETF distance");
    diag->add_flag("--circ", diag_circ, "report the circulant distance");
    diag->add_flag("--json", diag_json, "print a JSON summary instead of text");
    diag->add_option("-o,--output-dir", diag_out, "write normalized Grams and a manifest here");
    diag->add_option("paths", diag_paths, "matrix files or directories")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitParse;
    }

    try {
        if (diag->parsed()) return cmd_diagnose(diag_paths, diag_etf, diag_circ, diag_out, diag_json, out, err);

        ExperimentConfig cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        const PayloadFormat fmt = format == "text" ? PayloadFormat::Text : PayloadFormat::Binary;
        const fs::path dir = resolve_output(out_dir, &cfg);

        std::string name;
        for (const auto& [n, sub] : subs)
            if (sub->parsed()) name = n;
        Run run(name, dir, &cfg, fmt);

        if (name == "solve-cyclic") {
            run_cyclic(cfg, run, false);
        } else if (name == "solve-perm") {
            run_perm(cfg, run, false);
        } else if (name == "solve-multiblock") {
            if (all_cyclic(cfg.target)) {
                run.value("dispatch", "cyclic");
                run_cyclic(cfg, run, false);
            } else {
                run.value("dispatch", "two_transitive");
                run_perm(cfg, run, false);
            }
        } else if (name == "oracle-pgd") {
            run_pgd(cfg, run);
        } else if (name == "lift-solve") {
            run_lifted(cfg, run);
        } else {
            // verify: also confirm the configuration survives a serialization round trip.
            const ExperimentConfig again = config_from_json(config_to_json(cfg));
            run.check("config_round_trip", config_hash(again) == config_hash(cfg) ? 0.0 : 1.0, 0.0);
            if (all_cyclic(cfg.target)) {
                run.value("suite", "cyclic");
                run_cyclic(cfg, run, true);
            } else if (perm_applicable(cfg)) {
                run.value("suite", "two_transitive");
                run_perm(cfg, run, true);
            } else {
                run.value("suite", "lifted");
                run_lifted(cfg, run);
            }
            run.check_round_trip();
        }
        return run.finish(out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitParse;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace symlab

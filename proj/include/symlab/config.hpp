#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "symlab/groups.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/lifted_solver.hpp"
#include "symlab/numerics.hpp"

namespace symlab {

struct SolverConfig {
    // Projected gradient oracle.
    std::size_t restarts = 20;
    std::size_t max_iter = 200000;
    double rel_tol = 1e-12;
    StepSchedule step{};
    unsigned threads = 0;
    // Convex / closed-form solvers.
    double tol = 1e-10;
    // Lifted relaxation.
    std::size_t lifted_max_iter = 500000;
    double lifted_tol = 1e-9;
    std::optional<PatternSpec> pattern;
    // Orthogonal factor used when splitting logits into (W, H).
    bool random_q = false;
};

struct ExperimentConfig {
    std::string name;
    TargetSpec target;
    double e_w = 1.0;
    double e_h = 1.0;
    std::size_t d = 0;
    SolverConfig solver{};
    std::uint64_t seed = 0;
    std::string output_dir;  // empty: use the CLI flag or the environment default

    /// Throws InvalidInput when the target or budgets are unusable.
    void validate() const;
};

/// Strict parser: unknown keys are ParseErrors. Base entries may be JSON
/// numbers or exact fraction strings such as "1/12".
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON serialization.
std::string config_hash(const ExperimentConfig& c);

}  // namespace symlab

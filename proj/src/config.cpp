#include "symlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "symlab/error.hpp"
#include "symlab/matrix_io.hpp"

namespace symlab {
namespace {

using nlohmann::json;

void require_object(const json& j, std::string_view ctx) {
    if (!j.is_object()) throw ParseError(std::string(ctx) + " must be a JSON object", 0);
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view ctx) {
    require_object(j, ctx);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError("unknown key '" + key + "' in " + std::string(ctx), 0);
    }
}

const json& need(const json& j, const char* key, std::string_view ctx) {
    if (!j.contains(key)) throw ParseError(std::string(ctx) + " is missing '" + key + "'", 0);
    return j.at(key);
}

std::size_t as_count(const json& j, std::string_view what) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw ParseError(std::string(what) + " must be a nonnegative integer", 0);
    return j.get<std::size_t>();
}

double as_real(const json& j, std::string_view what) {
    if (!j.is_number()) throw ParseError(std::string(what) + " must be a number", 0);
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(std::string(what) + " must be finite", 0);
    return v;
}

bool as_bool(const json& j, std::string_view what) {
    if (!j.is_boolean()) throw ParseError(std::string(what) + " must be true or false", 0);
    return j.get<bool>();
}

std::vector<std::size_t> as_counts(const json& j, std::string_view what) {
    if (!j.is_array()) throw ParseError(std::string(what) + " must be an array", 0);
    std::vector<std::size_t> out;
    for (const auto& e : j) out.push_back(as_count(e, what));
    return out;
}

// Accepts 0.25, "0.25" or "1/4".
double base_entry(const json& j) {
    if (j.is_number()) return as_real(j, "base entry");
    if (!j.is_string()) throw ParseError("base entries must be numbers or fraction strings", 0);
    const std::string s = j.get<std::string>();
    const auto slash = s.find('/');
    auto parse = [&](std::string_view t) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
            throw ParseError("cannot parse base entry '" + s + "'", 0);
        return v;
    };
    if (slash == std::string::npos) return parse(s);
    const double num = parse(std::string_view(s).substr(0, slash));
    const double den = parse(std::string_view(s).substr(slash + 1));
    if (den == 0.0) throw ParseError("zero denominator in base entry '" + s + "'", 0);
    return num / den;
}

GroupSpec group_from_json(const json& j) {
    require_object(j, "group");
    const json& type = need(j, "type", "group");
    if (!type.is_string()) throw ParseError("group type must be a string", 0);
    const std::string t = type.get<std::string>();
    if (t == "cyclic" || t == "symmetric" || t == "trivial") {
        check_keys(j, {"type", "m"}, "group");
        const std::size_t m = as_count(need(j, "m", "group"), "group m");
        if (t == "cyclic") return GroupSpec::cyclic(m);
        if (t == "symmetric") return GroupSpec::symmetric(m);
        return GroupSpec::trivial(m);
    }
    if (t == "explicit") {
        check_keys(j, {"type", "elements"}, "group");
        const json& el = need(j, "elements", "group");
        if (!el.is_array()) throw ParseError("group elements must be an array", 0);
        std::vector<Permutation> perms;
        for (const auto& p : el) perms.push_back(Permutation{as_counts(p, "permutation image")});
        return GroupSpec::explicit_group(std::move(perms));
    }
    if (t == "direct_sum") {
        check_keys(j, {"type", "sizes"}, "group");
        return GroupSpec::direct_sum(as_counts(need(j, "sizes", "group"), "group sizes"));
    }
    if (t == "direct_product") {
        check_keys(j, {"type", "a", "l"}, "group");
        return GroupSpec::direct_product(as_count(need(j, "a", "group"), "group a"),
                                         as_count(need(j, "l", "group"), "group l"));
    }
    if (t == "wreath") {
        check_keys(j, {"type", "s", "b"}, "group");
        return GroupSpec::wreath(as_count(need(j, "s", "group"), "group s"),
                                 as_count(need(j, "b", "group"), "group b"));
    }
    throw ParseError("unknown group type '" + t + "'", 0);
}

json group_to_json(const GroupSpec& g) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, group::Cyclic>) {
                return {{"type", "cyclic"}, {"m", v.m}};
            } else if constexpr (std::is_same_v<T, group::Symmetric>) {
                return {{"type", "symmetric"}, {"m", v.m}};
            } else if constexpr (std::is_same_v<T, group::Explicit>) {
                json el = json::array();
                for (const auto& p : v.elements) el.push_back(p.image);
                return {{"type", "explicit"}, {"elements", el}};
            } else if constexpr (std::is_same_v<T, group::DirectSum>) {
                return {{"type", "direct_sum"}, {"sizes", v.sizes}};
            } else if constexpr (std::is_same_v<T, group::DirectProduct>) {
                return {{"type", "direct_product"}, {"a", v.a}, {"l", v.l}};
            } else {
                return {{"type", "wreath"}, {"s", v.s}, {"b", v.b}};
            }
        },
        g.variant());
}

PatternSpec pattern_from_json(const json& j) {
    require_object(j, "pattern");
    const json& type = need(j, "type", "pattern");
    if (!type.is_string()) throw ParseError("pattern type must be a string", 0);
    const std::string t = type.get<std::string>();
    if (t == "direct_sum") {
        check_keys(j, {"type", "sizes"}, "pattern");
        return pattern::DirectSum{as_counts(need(j, "sizes", "pattern"), "pattern sizes")};
    }
    if (t == "grid") {
        check_keys(j, {"type", "a", "l"}, "pattern");
        return pattern::Grid{as_count(need(j, "a", "pattern"), "pattern a"),
                             as_count(need(j, "l", "pattern"), "pattern l")};
    }
    if (t == "wreath") {
        check_keys(j, {"type", "s", "b"}, "pattern");
        return pattern::Wreath{as_count(need(j, "s", "pattern"), "pattern s"),
                               as_count(need(j, "b", "pattern"), "pattern b")};
    }
    throw ParseError("unknown pattern type '" + t + "'", 0);
}

json pattern_to_json(const PatternSpec& p) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, pattern::DirectSum>) {
                return {{"type", "direct_sum"}, {"sizes", v.sizes}};
            } else if constexpr (std::is_same_v<T, pattern::Grid>) {
                return {{"type", "grid"}, {"a", v.a}, {"l", v.l}};
            } else {
                return {{"type", "wreath"}, {"s", v.s}, {"b", v.b}};
            }
        },
        p);
}

SolverConfig solver_from_json(const json& j) {
    check_keys(j,
               {"restarts", "max_iter", "rel_tol", "step", "threads", "tol", "lifted_max_iter",
                "lifted_tol", "pattern", "q_mode"},
               "solver");
    SolverConfig s;
    if (j.contains("restarts")) s.restarts = as_count(j["restarts"], "solver.restarts");
    if (j.contains("max_iter")) s.max_iter = as_count(j["max_iter"], "solver.max_iter");
    if (j.contains("rel_tol")) s.rel_tol = as_real(j["rel_tol"], "solver.rel_tol");
    if (j.contains("threads")) s.threads = static_cast<unsigned>(as_count(j["threads"], "solver.threads"));
    if (j.contains("tol")) s.tol = as_real(j["tol"], "solver.tol");
    if (j.contains("lifted_max_iter"))
        s.lifted_max_iter = as_count(j["lifted_max_iter"], "solver.lifted_max_iter");
    if (j.contains("lifted_tol")) s.lifted_tol = as_real(j["lifted_tol"], "solver.lifted_tol");
    if (j.contains("pattern") && !j["pattern"].is_null()) s.pattern = pattern_from_json(j["pattern"]);
    if (j.contains("step")) {
        const json& st = j["step"];
        check_keys(st, {"initial", "growth", "backtrack"}, "solver.step");
        if (st.contains("initial")) s.step.initial = as_real(st["initial"], "step.initial");
        if (st.contains("growth")) s.step.growth = as_real(st["growth"], "step.growth");
        if (st.contains("backtrack")) s.step.backtrack = as_real(st["backtrack"], "step.backtrack");
    }
    if (j.contains("q_mode")) {
        if (!j["q_mode"].is_string()) throw ParseError("solver.q_mode must be a string", 0);
        const std::string q = j["q_mode"].get<std::string>();
        if (q == "canonical") {
            s.random_q = false;
        } else if (q == "random") {
            s.random_q = true;
        } else {
            throw ParseError("solver.q_mode must be 'canonical' or 'random'", 0);
        }
    }
    return s;
}

}  // namespace

void ExperimentConfig::validate() const {
    target.validate();
    if (!(e_w > 0.0) || !(e_h > 0.0)) throw InvalidInput("budgets must be positive");
    if (d == 0) throw InvalidInput("embedding dimension d must be positive");
    if (solver.restarts == 0) throw InvalidInput("solver.restarts must be positive");
    if (!(solver.step.initial > 0.0) || !(solver.step.backtrack > 0.0 && solver.step.backtrack < 1.0) ||
        !(solver.step.growth >= 1.0))
        throw InvalidInput("step schedule needs initial > 0, 0 < backtrack < 1 and growth >= 1");
    if (!(solver.tol > 0.0) || !(solver.lifted_tol > 0.0) || !(solver.rel_tol >= 0.0))
        throw InvalidInput("tolerances must be positive");
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, {"name", "target", "budgets", "d", "solver", "seed", "output_dir"}, "config");
    ExperimentConfig c;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ParseError("name must be a string", 0);
        c.name = j["name"].get<std::string>();
    }

    const json& target = need(j, "target", "config");
    check_keys(target, {"blocks"}, "target");
    const json& blocks = need(target, "blocks", "target");
    if (!blocks.is_array() || blocks.empty()) throw ParseError("target.blocks must be a nonempty array", 0);
    for (const auto& b : blocks) {
        check_keys(b, {"group", "base", "distinct_only"}, "target block");
        const json& base = need(b, "base", "target block");
        if (!base.is_array()) throw ParseError("block base must be an array", 0);
        Vector y;
        for (const auto& e : base) y.push_back(base_entry(e));
        TargetBlock block{group_from_json(need(b, "group", "target block")), std::move(y), false};
        if (b.contains("distinct_only")) block.distinct_only = as_bool(b["distinct_only"], "distinct_only");
        c.target.blocks.push_back(std::move(block));
    }

    const json& budgets = need(j, "budgets", "config");
    check_keys(budgets, {"e_w", "e_h"}, "budgets");
    c.e_w = as_real(need(budgets, "e_w", "budgets"), "budgets.e_w");
    c.e_h = as_real(need(budgets, "e_h", "budgets"), "budgets.e_h");

    if (j.contains("solver")) c.solver = solver_from_json(j["solver"]);
    if (j.contains("seed")) c.seed = as_count(j["seed"], "seed");
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw ParseError("output_dir must be a string", 0);
        c.output_dir = j["output_dir"].get<std::string>();
    }
    c.d = j.contains("d") ? as_count(j["d"], "d") : c.target.degree();
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json blocks = json::array();
    for (const auto& b : c.target.blocks)
        blocks.push_back({{"group", group_to_json(b.group)}, {"base", b.base}, {"distinct_only", b.distinct_only}});
    json solver = {
        {"restarts", c.solver.restarts},
        {"max_iter", c.solver.max_iter},
        {"rel_tol", c.solver.rel_tol},
        {"step",
         {{"initial", c.solver.step.initial},
          {"growth", c.solver.step.growth},
          {"backtrack", c.solver.step.backtrack}}},
        {"threads", c.solver.threads},
        {"tol", c.solver.tol},
        {"lifted_max_iter", c.solver.lifted_max_iter},
        {"lifted_tol", c.solver.lifted_tol},
        {"q_mode", c.solver.random_q ? "random" : "canonical"},
    };
    if (c.solver.pattern) solver["pattern"] = pattern_to_json(*c.solver.pattern);
    return {
        {"name", c.name},
        {"target", {{"blocks", blocks}}},
        {"budgets", {{"e_w", c.e_w}, {"e_h", c.e_h}}},
        {"d", c.d},
        {"solver", solver},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
    };
}

ExperimentConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad value: ") + e.what(), 0);
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path.string(), 0);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a64(config_to_json(c).dump())); }

}  // namespace symlab

#include "symlab/groups.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "symlab/error.hpp"

namespace symlab {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t sat_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a)
        return std::numeric_limits<std::size_t>::max();
    return a * b;
}

std::size_t factorial(std::size_t n) {
    std::size_t out = 1;
    for (std::size_t k = 2; k <= n; ++k) out = sat_mul(out, k);
    return out;
}

std::vector<Permutation> all_permutations(std::size_t m) {
    std::vector<Permutation> out;
    Permutation p = Permutation::identity(m);
    do {
        out.push_back(p);
    } while (std::next_permutation(p.image.begin(), p.image.end()));
    return out;
}

void require_symmetric_degree(std::size_t m) {
    if (m > GroupSpec::kMaxSymmetricDegree)
        throw TooLarge("symmetric group of degree " + std::to_string(m) + " exceeds the limit of " +
                       std::to_string(GroupSpec::kMaxSymmetricDegree));
}

std::vector<Permutation> validated_explicit(const std::vector<Permutation>& elements) {
    if (elements.empty()) throw InvalidInput("explicit group has no elements");
    const std::size_t m = elements.front().degree();
    std::set<Permutation> set;
    for (const auto& p : elements) {
        if (p.degree() != m) throw InvalidInput("explicit group mixes degrees");
        if (!p.is_valid()) throw InvalidInput("explicit group contains a non-bijection");
        set.insert(p);
    }
    if (!set.contains(Permutation::identity(m)))
        throw InvalidInput("explicit group does not contain the identity");
    for (const auto& p : set) {
        if (!set.contains(p.inverse())) throw InvalidInput("explicit group is not closed under inverse");
        for (const auto& q : set)
            if (!set.contains(compose(p, q)))
                throw InvalidInput("explicit group is not closed under composition");
    }
    return {set.begin(), set.end()};
}

}  // namespace

Permutation Permutation::identity(std::size_t m) {
    Permutation p;
    p.image.resize(m);
    std::iota(p.image.begin(), p.image.end(), std::size_t{0});
    return p;
}

Permutation Permutation::cyclic_shift(std::size_t m, std::size_t steps) {
    Permutation p;
    p.image.resize(m);
    for (std::size_t i = 0; i < m; ++i) p.image[i] = (i + steps) % m;
    return p;
}

bool Permutation::is_identity() const noexcept {
    for (std::size_t i = 0; i < image.size(); ++i)
        if (image[i] != i) return false;
    return true;
}

bool Permutation::is_valid() const {
    std::vector<bool> seen(image.size(), false);
    for (std::size_t v : image) {
        if (v >= image.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

Permutation Permutation::inverse() const {
    Permutation inv;
    inv.image.resize(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) inv.image[image[i]] = i;
    return inv;
}

Matrix Permutation::as_matrix() const {
    Matrix p(image.size(), image.size());
    for (std::size_t i = 0; i < image.size(); ++i) p(image[i], i) = 1.0;
    return p;
}

Permutation compose(const Permutation& p, const Permutation& q) {
    if (p.degree() != q.degree()) throw InvalidInput("compose: degree mismatch");
    Permutation out;
    out.image.resize(p.degree());
    for (std::size_t i = 0; i < p.degree(); ++i) out.image[i] = p.image[q.image[i]];
    return out;
}

Vector act(const Permutation& p, std::span<const double> x) {
    if (x.size() != p.degree())
        throw InvalidInput("act: vector length " + std::to_string(x.size()) +
                           " does not match permutation degree " + std::to_string(p.degree()));
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[p.image[i]] = x[i];
    return out;
}

GroupSpec::GroupSpec(Variant v) : v_(std::move(v)) {
    degree_ = std::visit(
        overloaded{
            [](const group::Cyclic& c) { return c.m; },
            [](const group::Symmetric& s) { return s.m; },
            [](const group::Explicit& e) {
                return e.elements.empty() ? std::size_t{0} : e.elements.front().degree();
            },
            [](const group::DirectSum& d) {
                return std::accumulate(d.sizes.begin(), d.sizes.end(), std::size_t{0});
            },
            [](const group::DirectProduct& d) { return d.a * d.l; },
            [](const group::Wreath& w) { return w.s * w.b; },
        },
        v_);
    if (degree_ == 0) throw InvalidInput("group degree must be at least 1");
    if (const auto* d = std::get_if<group::DirectSum>(&v_)) {
        for (std::size_t s : d->sizes)
            if (s == 0) throw InvalidInput("direct sum block sizes must be positive");
    }
}

GroupSpec GroupSpec::trivial(std::size_t m) {
    return GroupSpec(group::Explicit{{Permutation::identity(m)}});
}

GroupSpec GroupSpec::explicit_group(std::vector<Permutation> elements) {
    return GroupSpec(group::Explicit{validated_explicit(elements)});
}

std::size_t GroupSpec::order() const {
    return std::visit(
        overloaded{
            [](const group::Cyclic& c) { return c.m; },
            [](const group::Symmetric& s) { return factorial(s.m); },
            [](const group::Explicit& e) { return e.elements.size(); },
            [](const group::DirectSum& d) {
                std::size_t out = 1;
                for (std::size_t s : d.sizes) out = sat_mul(out, factorial(s));
                return out;
            },
            [](const group::DirectProduct& d) { return sat_mul(factorial(d.a), factorial(d.l)); },
            [](const group::Wreath& w) {
                std::size_t out = factorial(w.b);
                for (std::size_t k = 0; k < w.b; ++k) out = sat_mul(out, factorial(w.s));
                return out;
            },
        },
        v_);
}

std::string GroupSpec::describe() const {
    return std::visit(
        overloaded{
            [](const group::Cyclic& c) { return "C_" + std::to_string(c.m); },
            [](const group::Symmetric& s) { return "S_" + std::to_string(s.m); },
            [](const group::Explicit& e) {
                return "explicit(" + std::to_string(e.elements.size()) + " elements)";
            },
            [](const group::DirectSum& d) {
                std::string out;
                for (std::size_t k = 0; k < d.sizes.size(); ++k)
                    out += (k ? " + S_" : "S_") + std::to_string(d.sizes[k]);
                return out;
            },
            [](const group::DirectProduct& d) {
                return "S_" + std::to_string(d.a) + " x S_" + std::to_string(d.l);
            },
            [](const group::Wreath& w) {
                return "S_" + std::to_string(w.s) + " wr S_" + std::to_string(w.b);
            },
        },
        v_);
}

std::vector<Permutation> enumerate(const GroupSpec& g) {
    if (const auto* s = std::get_if<group::Symmetric>(&g.variant())) require_symmetric_degree(s->m);
    const std::size_t order = g.order();
    if (order > GroupSpec::kMaxOrder)
        throw TooLarge("group " + g.describe() + " has more than " +
                       std::to_string(GroupSpec::kMaxOrder) + " elements");

    std::vector<Permutation> out = std::visit(
        overloaded{
            [](const group::Cyclic& c) {
                std::vector<Permutation> v;
                for (std::size_t k = 0; k < c.m; ++k) v.push_back(Permutation::cyclic_shift(c.m, k));
                return v;
            },
            [](const group::Symmetric& s) { return all_permutations(s.m); },
            [](const group::Explicit& e) { return validated_explicit(e.elements); },
            [](const group::DirectSum& d) {
                std::vector<Permutation> v{Permutation{}};
                std::size_t offset = 0;
                for (std::size_t size : d.sizes) {
                    require_symmetric_degree(size);
                    const auto local = all_permutations(size);
                    std::vector<Permutation> next;
                    next.reserve(v.size() * local.size());
                    for (const auto& prefix : v) {
                        for (const auto& p : local) {
                            Permutation q = prefix;
                            for (std::size_t i : p.image) q.image.push_back(i + offset);
                            next.push_back(std::move(q));
                        }
                    }
                    v = std::move(next);
                    offset += size;
                }
                return v;
            },
            [](const group::DirectProduct& d) {
                require_symmetric_degree(d.a);
                require_symmetric_degree(d.l);
                std::vector<Permutation> v;
                for (const auto& rows : all_permutations(d.a)) {
                    for (const auto& cols : all_permutations(d.l)) {
                        Permutation p;
                        p.image.resize(d.a * d.l);
                        for (std::size_t r = 0; r < d.a; ++r)
                            for (std::size_t c = 0; c < d.l; ++c)
                                p.image[r * d.l + c] = rows.image[r] * d.l + cols.image[c];
                        v.push_back(std::move(p));
                    }
                }
                return v;
            },
            [](const group::Wreath& w) {
                require_symmetric_degree(w.s);
                require_symmetric_degree(w.b);
                const auto inner = all_permutations(w.s);
                const auto outer = all_permutations(w.b);
                std::vector<Permutation> v;
                std::vector<std::size_t> choice(w.b, 0);
                for (const auto& sigma : outer) {
                    std::fill(choice.begin(), choice.end(), 0);
                    while (true) {
                        Permutation p;
                        p.image.resize(w.s * w.b);
                        for (std::size_t blk = 0; blk < w.b; ++blk)
                            for (std::size_t pos = 0; pos < w.s; ++pos)
                                p.image[blk * w.s + pos] =
                                    sigma.image[blk] * w.s + inner[choice[blk]].image[pos];
                        v.push_back(std::move(p));
                        std::size_t k = 0;
                        while (k < w.b && ++choice[k] == inner.size()) choice[k++] = 0;
                        if (k == w.b) break;
                    }
                }
                return v;
            },
        },
        g.variant());
    std::sort(out.begin(), out.end());
    return out;
}

bool is_two_transitive(const GroupSpec& g) {
    const std::size_t m = g.degree();
    if (m < 2) throw InvalidInput("2-transitivity needs degree at least 2");
    const auto elements = enumerate(g);
    // For a group, the pair action is transitive iff the orbit of one
    // ordered pair already covers every ordered pair of distinct points.
    std::vector<bool> reached(m * m, false);
    for (const auto& p : elements) reached[p.image[0] * m + p.image[1]] = true;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            if (a != b && !reached[a * m + b]) return false;
    return true;
}

std::size_t TargetSpec::degree() const {
    if (blocks.empty()) throw InvalidInput("target has no blocks");
    return blocks.front().group.degree();
}

void TargetSpec::validate() const {
    const std::size_t m = degree();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        const std::string where = "target block " + std::to_string(i) + ": ";
        if (b.group.degree() != m) throw InvalidInput(where + "group degree differs from block 0");
        if (b.base.size() != m)
            throw InvalidInput(where + "base has length " + std::to_string(b.base.size()) +
                               ", expected " + std::to_string(m));
        double sum = 0.0;
        for (double v : b.base) {
            if (!std::isfinite(v) || v < 0.0)
                throw InvalidInput(where + "base entries must be finite and nonnegative");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw InvalidInput(where + "base sums to " + std::to_string(sum) + ", expected 1");
    }
}

OrbitMatrix orbit_matrix(const TargetSpec& t) {
    t.validate();
    const std::size_t m = t.degree();
    std::vector<Vector> columns;
    OrbitMatrix out;
    for (std::size_t i = 0; i < t.blocks.size(); ++i) {
        const auto& blk = t.blocks[i];
        std::set<Vector> seen;
        std::size_t count = 0;
        for (const auto& g : enumerate(blk.group)) {
            Vector col = act(g, blk.base);
            if (blk.distinct_only && !seen.insert(col).second) continue;
            columns.push_back(std::move(col));
            out.labels.push_back({i, g});
            ++count;
        }
        out.block_columns.push_back(count);
    }
    out.y = Matrix(m, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) out.y.set_col(j, columns[j]);
    return out;
}

TargetSpec animals_target(bool fixed_point_under_s3) {
    TargetSpec t;
    t.blocks.push_back({GroupSpec::symmetric(3), {1.0, 0.0, 0.0}, true});
    const double third = 1.0 / 3.0;
    if (fixed_point_under_s3)
        t.blocks.push_back({GroupSpec::symmetric(3), {third, third, third}, true});
    else
        t.blocks.push_back({GroupSpec::trivial(3), {third, third, third}, false});
    return t;
}

}  // namespace symlab

#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "symlab/matrix.hpp"

namespace symlab {

/// A permutation of {0, ..., m-1}. image[i] is the position that receives
/// coordinate i, so acting on x gives out[image[i]] = x[i].
struct Permutation {
    std::vector<std::size_t> image;

    static Permutation identity(std::size_t m);
    /// Moves coordinate i to i + 1 (mod m).
    static Permutation cyclic_shift(std::size_t m, std::size_t steps = 1);

    std::size_t degree() const noexcept { return image.size(); }
    bool is_identity() const noexcept;
    bool is_valid() const;
    Permutation inverse() const;

    /// Square matrix with column i equal to e_{image[i]}; rho(g) x = g o x.
    Matrix as_matrix() const;

    friend auto operator<=>(const Permutation&, const Permutation&) = default;
};

/// (p o q) acts as q first, then p.
Permutation compose(const Permutation& p, const Permutation& q);

Vector act(const Permutation& p, std::span<const double> x);

namespace group {
struct Cyclic {
    std::size_t m;
};
struct Symmetric {
    std::size_t m;
};
struct Explicit {
    std::vector<Permutation> elements;
};
/// Product of symmetric groups, each permuting its own consecutive block.
struct DirectSum {
    std::vector<std::size_t> sizes;
};
/// S_a x S_l acting on an a-by-l grid stored row-major.
struct DirectProduct {
    std::size_t a;
    std::size_t l;
};
/// S_s wr S_b: b blocks of size s; each block is permuted internally and the
/// blocks are permuted among themselves.
struct Wreath {
    std::size_t s;
    std::size_t b;
};
}  // namespace group

class GroupSpec {
public:
    using Variant = std::variant<group::Cyclic, group::Symmetric, group::Explicit,
                                 group::DirectSum, group::DirectProduct, group::Wreath>;

    static constexpr std::size_t kMaxSymmetricDegree = 10;
    static constexpr std::size_t kMaxOrder = 100000;

    GroupSpec(Variant v);

    static GroupSpec cyclic(std::size_t m) { return GroupSpec(group::Cyclic{m}); }
    static GroupSpec symmetric(std::size_t m) { return GroupSpec(group::Symmetric{m}); }
    static GroupSpec trivial(std::size_t m);
    static GroupSpec explicit_group(std::vector<Permutation> elements);
    static GroupSpec direct_sum(std::vector<std::size_t> sizes) {
        return GroupSpec(group::DirectSum{std::move(sizes)});
    }
    static GroupSpec direct_product(std::size_t a, std::size_t l) {
        return GroupSpec(group::DirectProduct{a, l});
    }
    static GroupSpec wreath(std::size_t s, std::size_t b) { return GroupSpec(group::Wreath{s, b}); }

    const Variant& variant() const noexcept { return v_; }
    std::size_t degree() const noexcept { return degree_; }
    /// Group order computed without enumerating. Saturates at SIZE_MAX.
    std::size_t order() const;
    std::string describe() const;

private:
    Variant v_;
    std::size_t degree_ = 0;
};

/// Elements in lexicographic order of their image arrays. Throws TooLarge past
/// the guard rails and InvalidInput for an Explicit list that is not a group.
std::vector<Permutation> enumerate(const GroupSpec& g);

bool is_two_transitive(const GroupSpec& g);

struct TargetBlock {
    GroupSpec group;
    Vector base;
    /// Keep one column per distinct vector g o base instead of one per
    /// element. This changes the column multiplicities and therefore the
    /// scale of every quantity weighted by them.
    bool distinct_only = false;
};

struct TargetSpec {
    std::vector<TargetBlock> blocks;

    std::size_t degree() const;
    /// Throws InvalidInput unless every base is a probability vector and all
    /// blocks share one degree.
    void validate() const;
};

struct ColumnLabel {
    std::size_t block;
    Permutation element;
};

struct OrbitMatrix {
    Matrix y;
    std::vector<ColumnLabel> labels;
    /// Number of columns contributed by each block, in block order.
    std::vector<std::size_t> block_columns;
};

OrbitMatrix orbit_matrix(const TargetSpec& t);

/// The 3x4 dog/cat/rabbit target: the orbit of e_dog under S_3 (distinct
/// columns) followed by the uniform column. With `fixed_point_under_s3` the
/// uniform column is an S_3 orbit of size one, otherwise an orbit of the
/// trivial group.
TargetSpec animals_target(bool fixed_point_under_s3 = false);

}  // namespace symlab

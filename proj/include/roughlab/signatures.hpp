#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "roughlab/tensor.hpp"

namespace roughlab {

/// Points x_0..x_N of a discrete path in R^d. x_0 need not be the origin;
/// every signature-type operation depends on the increments only.
struct DiscretePath {
    std::vector<Vec> points;
};

/// Step vectors F_1..F_N, optionally decorated with per-step antisymmetric
/// area tensors a_1..a_N (empty decorations = all zero).
struct IncrementSeq {
    std::vector<Vec> steps;
    std::vector<Tensor2> decorations;

    std::size_t size() const { return steps.size(); }
    Eigen::Index dim() const { return steps.empty() ? 0 : steps.front().size(); }
    bool has_decorations() const { return !decorations.empty(); }
};

/// Dense order-l tensor over R^d, entries in row-major order:
/// entry (i_1,..,i_l) at index ((i_1*d + i_2)*d + ...) + i_l.
struct LevelTensor {
    int order = 1;
    Eigen::Index dim = 0;
    std::vector<double> data;

    double& at(std::span<const Eigen::Index> idx);
    double at(std::span<const Eigen::Index> idx) const;

    Vec as_vector() const;      // order 1 only
    Tensor2 as_matrix() const;  // order 2 only

    static LevelTensor zero(int order, Eigen::Index dim);
};

/// Largest dense tensor the iterated-sum routines will allocate (d^l entries).
inline constexpr std::size_t kMaxDenseTensorSize = 1'000'000;

IncrementSeq increments(const DiscretePath& p);

/// Iterated sum over strictly increasing index tuples,
/// sum_{j_1<...<j_l} F_{j_1} (x) ... (x) F_{j_l}, by the one-pass prefix
/// recursion P_m <- P_m + P_{m-1} (x) F_j.
LevelTensor iterated_sum(const IncrementSeq& F, int order);

/// Levels 1..max_order in one pass.
std::vector<LevelTensor> discrete_signature(const IncrementSeq& F, int max_order);

/// Level-2 iterated integral of the piecewise-linear interpolation:
/// iterated_sum(F,2) + sum_k F_k (x) F_k / 2. Decorations are ignored.
Tensor2 pwl_level2(const IncrementSeq& F);

/// sum_k F_k (x) F_k (the same-index square sum Z_N).
Tensor2 square_sum(const IncrementSeq& F);

/// Step lift (F, F (x) F / 2 + a); a must be antisymmetric.
G2Element lift_step(const Vec& F, const Tensor2& a);
G2Element lift_step(const Vec& F);

/// Running products of decorated step lifts; lifts[n] is the lift after n
/// steps (lifts[0] = identity, lifts[N] = endpoint).
std::vector<G2Element> path_lift(const IncrementSeq& F);

/// hom_dist(x (x) y, xy) <= tol.
bool chen_check(const G2Element& x, const G2Element& y, const G2Element& xy,
                double tol);

/// Running iterated-sum lift Y_n = (X_n, sum_{k1<k2<=n} F (x) F); valued in
/// the full algebra, never geometric once some square sum accumulates.
std::vector<T2Element> nongeo_lift(const IncrementSeq& F);

/// Signed-area tensor (antisymmetric part of iterated_sum(F,2)).
Tensor2 signed_area(const IncrementSeq& F);

/// CSV path input: one row per point, d columns. No header.
DiscretePath path_from_csv(const std::string& text);

/// Flat row-major JSON with an "order" field.
std::string to_json(const LevelTensor& t);

}  // namespace roughlab

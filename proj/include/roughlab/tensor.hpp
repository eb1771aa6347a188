#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>

namespace roughlab {

using Vec = Eigen::VectorXd;
using Tensor2 = Eigen::MatrixXd;

/// Element (a, b) of the step-2 truncated tensor algebra, a in R^d and b a
/// d x d matrix. The scalar level is implicitly 1, so every element is
/// invertible under the product (a,b)*(a',b') = (a+a', b+b'+a (x) a').
/// Values are immutable by convention: operations return fresh elements.
struct T2Element {
    Vec a;
    Tensor2 b;

    T2Element() = default;
    T2Element(Vec a_, Tensor2 b_);

    Eigen::Index dim() const { return a.size(); }

    static T2Element identity(Eigen::Index d);
    static T2Element from_level1(const Vec& a);
};

/// Geometric elements are T2Elements satisfying Sym(b) = a (x) a / 2; there is
/// no separate type, membership is a runtime predicate (is_geometric).
using G2Element = T2Element;

T2Element tensor_mul(const T2Element& x, const T2Element& y);
T2Element tensor_inv(const T2Element& x);

/// Antisymmetric product on the reduced representation (a, antisym area):
/// (a,b) ^ (a',b') = (a+a', b+b' + (a (x) a' - a' (x) a)/2).
/// Inputs must carry a G2-compatible second level: either geometric
/// (Sym(b) = a (x) a / 2) or already reduced (b antisymmetric); geometric
/// inputs are reduced before the law applies.
G2Element wedge_mul(const G2Element& x, const G2Element& y);

/// Dilation delta_eps(a, b) = (eps a, eps^2 b).
T2Element dilate(const T2Element& x, double eps);

/// (Sym(b), Antisym(b)); the parts sum back to b exactly.
std::pair<Tensor2, Tensor2> split_sym_antisym(const Tensor2& b);

/// Level-2 shuffle condition a_i a_j = b_ij + b_ji, checked entrywise.
bool is_geometric(const T2Element& x, double tol);
bool is_geometric(const T2Element& x);

/// Default G2 membership tolerance, scaled quadratically for large elements.
double geo_tolerance(const T2Element& x);

/// max(|a|_2, |b|_F^(1/2)); homogeneous: ||delta_eps x|| = |eps| ||x||.
double hom_norm(const T2Element& x);

/// hom_norm(x^{-1} (x) y); subadditive, symmetric only up to a fixed factor.
double hom_dist(const T2Element& x, const T2Element& y);

/// delta_s(g) for s in [0,1]: the point at parameter s of the geodesic from
/// the identity to g. Requires g geometric.
G2Element geodesic_point(const G2Element& g, double s);

/// Reduced representative (a, Antisym(b)) of a geometric element.
G2Element reduce_to_area(const G2Element& g);

/// Geometric element with first level a and prescribed signed area:
/// (a, a (x) a / 2 + area). area must be antisymmetric.
G2Element geometric_completion(const Vec& a, const Tensor2& area);

/// Flat JSON array [a_1..a_d, b_11..b_dd] (b row-major).
std::string to_json(const T2Element& x);
T2Element t2_from_json(const std::string& text);

}  // namespace roughlab

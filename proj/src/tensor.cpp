#include "roughlab/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roughlab {

namespace {

void check_same_dim(const T2Element& x, const T2Element& y, const char* op) {
    if (x.dim() != y.dim())
        throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                    std::to_string(x.dim()) + " vs " +
                                    std::to_string(y.dim()) + ")");
}

void check_finite(const T2Element& x, const char* op) {
    if (!x.a.allFinite() || !x.b.allFinite())
        throw std::invalid_argument(std::string(op) + ": non-finite entries");
}

}  // namespace

T2Element::T2Element(Vec a_, Tensor2 b_) : a(std::move(a_)), b(std::move(b_)) {
    if (b.rows() != a.size() || b.cols() != a.size())
        throw std::invalid_argument("T2Element: level-2 shape " +
                                    std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) +
                                    " does not match level-1 size " +
                                    std::to_string(a.size()));
}

T2Element T2Element::identity(Eigen::Index d) {
    return {Vec::Zero(d), Tensor2::Zero(d, d)};
}

T2Element T2Element::from_level1(const Vec& a) {
    return {a, Tensor2::Zero(a.size(), a.size())};
}

T2Element tensor_mul(const T2Element& x, const T2Element& y) {
    check_same_dim(x, y, "tensor_mul");
    return {x.a + y.a, x.b + y.b + x.a * y.a.transpose()};
}

T2Element tensor_inv(const T2Element& x) {
    return {-x.a, -x.b + x.a * x.a.transpose()};
}

G2Element wedge_mul(const G2Element& x, const G2Element& y) {
    check_same_dim(x, y, "wedge_mul");
    auto reduced = [](const G2Element& g) -> Tensor2 {
        const Tensor2 anti = 0.5 * (g.b - g.b.transpose());
        const double scale = std::max(1.0, (g.b - anti).norm());
        if ((g.b - anti).norm() <= 1e-12 * scale) return anti;  // already reduced
        if (!is_geometric(g))
            throw std::invalid_argument(
                "wedge_mul: input is neither geometric nor area-reduced");
        return anti;
    };
    const Tensor2 bx = reduced(x);
    const Tensor2 by = reduced(y);
    const Tensor2 cross =
        0.5 * (x.a * y.a.transpose() - y.a * x.a.transpose());
    return {x.a + y.a, bx + by + cross};
}

T2Element dilate(const T2Element& x, double eps) {
    return {eps * x.a, (eps * eps) * x.b};
}

std::pair<Tensor2, Tensor2> split_sym_antisym(const Tensor2& b) {
    Tensor2 sym = 0.5 * (b + b.transpose());
    Tensor2 anti = 0.5 * (b - b.transpose());
    return {std::move(sym), std::move(anti)};
}

bool is_geometric(const T2Element& x, double tol) {
    if (tol < 0) throw std::invalid_argument("is_geometric: tol must be >= 0");
    const Eigen::Index d = x.dim();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            worst = std::max(worst,
                             std::abs(x.a(i) * x.a(j) - (x.b(i, j) + x.b(j, i))));
    return worst <= tol;
}

bool is_geometric(const T2Element& x) { return is_geometric(x, geo_tolerance(x)); }

double geo_tolerance(const T2Element& x) {
    const double n = hom_norm(x);
    return 1e-9 * std::max(1.0, n * n);
}

double hom_norm(const T2Element& x) {
    return std::max(x.a.norm(), std::sqrt(x.b.norm()));
}

double hom_dist(const T2Element& x, const T2Element& y) {
    check_same_dim(x, y, "hom_dist");
    return hom_norm(tensor_mul(tensor_inv(x), y));
}

G2Element geodesic_point(const G2Element& g, double s) {
    if (s < 0.0 || s > 1.0)
        throw std::invalid_argument("geodesic_point: s must be in [0,1]");
    check_finite(g, "geodesic_point");
    return dilate(g, s);
}

G2Element reduce_to_area(const G2Element& g) {
    return {g.a, 0.5 * (g.b - g.b.transpose())};
}

G2Element geometric_completion(const Vec& a, const Tensor2& area) {
    if (area.rows() != a.size() || area.cols() != a.size())
        throw std::invalid_argument("geometric_completion: shape mismatch");
    const double scale = std::max(1.0, area.norm());
    if ((area + area.transpose()).norm() > 1e-12 * scale)
        throw std::invalid_argument("geometric_completion: area not antisymmetric");
    return {a, 0.5 * a * a.transpose() + area};
}

std::string to_json(const T2Element& x) {
    nlohmann::json arr = nlohmann::json::array();
    const Eigen::Index d = x.dim();
    for (Eigen::Index i = 0; i < d; ++i) arr.push_back(x.a(i));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) arr.push_back(x.b(i, j));
    return arr.dump();
}

T2Element t2_from_json(const std::string& text) {
    const auto arr = nlohmann::json::parse(text);
    if (!arr.is_array())
        throw std::invalid_argument("t2_from_json: expected a flat array");
    // length d + d^2 determines d
    const std::size_t n = arr.size();
    Eigen::Index d = -1;
    for (Eigen::Index k = 1; static_cast<std::size_t>(k + k * k) <= n; ++k)
        if (static_cast<std::size_t>(k + k * k) == n) d = k;
    if (d < 0)
        throw std::invalid_argument("t2_from_json: array length " +
                                    std::to_string(n) + " is not d + d^2");
    Vec a(d);
    Tensor2 b(d, d);
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < d; ++i) a(i) = arr[pos++].get<double>();
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) b(i, j) = arr[pos++].get<double>();
    return {std::move(a), std::move(b)};
}

}  // namespace roughlab

#include "roughlab/signatures.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roughlab {

namespace {

std::size_t dense_size(Eigen::Index d, int order) {
    std::size_t n = 1;
    for (int i = 0; i < order; ++i) {
        n *= static_cast<std::size_t>(d);
        if (n > kMaxDenseTensorSize)
            throw std::invalid_argument("iterated_sum: d^l exceeds the dense tensor budget");
    }
    return n;
}

void check_steps(const IncrementSeq& F) {
    const Eigen::Index d = F.dim();
    for (const auto& s : F.steps)
        if (s.size() != d)
            throw std::invalid_argument("IncrementSeq: inconsistent step dimensions");
    if (F.has_decorations()) {
        if (F.decorations.size() != F.steps.size())
            throw std::invalid_argument("IncrementSeq: decoration count != step count");
        for (const auto& a : F.decorations) {
            if (a.rows() != d || a.cols() != d)
                throw std::invalid_argument("IncrementSeq: decoration shape mismatch");
        }
    }
}

void check_antisym(const Tensor2& a, const char* op) {
    const double scale = std::max(1.0, a.norm());
    if ((a + a.transpose()).norm() > 1e-12 * scale)
        throw std::invalid_argument(std::string(op) + ": decoration not antisymmetric");
}

}  // namespace

LevelTensor LevelTensor::zero(int order, Eigen::Index dim) {
    LevelTensor t;
    t.order = order;
    t.dim = dim;
    t.data.assign(dense_size(dim, order), 0.0);
    return t;
}

double& LevelTensor::at(std::span<const Eigen::Index> idx) {
    std::size_t pos = 0;
    for (Eigen::Index i : idx) pos = pos * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i);
    return data[pos];
}

double LevelTensor::at(std::span<const Eigen::Index> idx) const {
    return const_cast<LevelTensor*>(this)->at(idx);
}

Vec LevelTensor::as_vector() const {
    if (order != 1) throw std::logic_error("LevelTensor::as_vector: order != 1");
    return Eigen::Map<const Vec>(data.data(), dim);
}

Tensor2 LevelTensor::as_matrix() const {
    if (order != 2) throw std::logic_error("LevelTensor::as_matrix: order != 2");
    // data is row-major
    Tensor2 m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            m(i, j) = data[static_cast<std::size_t>(i * dim + j)];
    return m;
}

IncrementSeq increments(const DiscretePath& p) {
    IncrementSeq F;
    if (p.points.empty()) return F;
    const Eigen::Index d = p.points.front().size();
    F.steps.reserve(p.points.size() - 1);
    for (std::size_t k = 1; k < p.points.size(); ++k) {
        if (p.points[k].size() != d)
            throw std::invalid_argument("increments: inconsistent point dimensions");
        F.steps.push_back(p.points[k] - p.points[k - 1]);
    }
    return F;
}

std::vector<LevelTensor> discrete_signature(const IncrementSeq& F, int max_order) {
    if (max_order < 1)
        throw std::invalid_argument("discrete_signature: order must be >= 1");
    check_steps(F);
    const Eigen::Index d = F.dim();
    std::vector<LevelTensor> levels;
    levels.reserve(static_cast<std::size_t>(max_order));
    for (int l = 1; l <= max_order; ++l) levels.push_back(LevelTensor::zero(l, d));
    if (d == 0) return levels;

    // P_m after step j holds sum over tuples j_1<...<j_m<=j; update top-down
    // so each step contributes to every level exactly once.
    for (const auto& step : F.steps) {
        for (int m = max_order; m >= 1; --m) {
            auto& target = levels[static_cast<std::size_t>(m - 1)].data;
            if (m == 1) {
                for (Eigen::Index i = 0; i < d; ++i) target[static_cast<std::size_t>(i)] += step(i);
            } else {
                const auto& lower = levels[static_cast<std::size_t>(m - 2)].data;
                const std::size_t dd = static_cast<std::size_t>(d);
                for (std::size_t p = 0; p < lower.size(); ++p) {
                    const double w = lower[p];
                    if (w == 0.0) continue;
                    const std::size_t base = p * dd;
                    for (Eigen::Index i = 0; i < d; ++i)
                        target[base + static_cast<std::size_t>(i)] += w * step(i);
                }
            }
        }
    }
    return levels;
}

LevelTensor iterated_sum(const IncrementSeq& F, int order) {
    if (order < 1) throw std::invalid_argument("iterated_sum: order must be >= 1");
    auto levels = discrete_signature(F, order);
    return std::move(levels.back());
}

Tensor2 pwl_level2(const IncrementSeq& F) {
    check_steps(F);
    const Eigen::Index d = F.dim();
    Tensor2 b = Tensor2::Zero(d, d);
    Vec running = Vec::Zero(d);
    for (const auto& step : F.steps) {
        b.noalias() += running * step.transpose();
        b.noalias() += 0.5 * step * step.transpose();
        running += step;
    }
    return b;
}

Tensor2 square_sum(const IncrementSeq& F) {
    check_steps(F);
    const Eigen::Index d = F.dim();
    Tensor2 z = Tensor2::Zero(d, d);
    for (const auto& step : F.steps) z.noalias() += step * step.transpose();
    return z;
}

G2Element lift_step(const Vec& F, const Tensor2& a) {
    if (a.rows() != F.size() || a.cols() != F.size())
        throw std::invalid_argument("lift_step: decoration shape mismatch");
    check_antisym(a, "lift_step");
    return {F, 0.5 * F * F.transpose() + a};
}

G2Element lift_step(const Vec& F) {
    return {F, 0.5 * F * F.transpose()};
}

std::vector<G2Element> path_lift(const IncrementSeq& F) {
    check_steps(F);
    const Eigen::Index d = F.dim();
    std::vector<G2Element> lifts;
    lifts.reserve(F.size() + 1);
    lifts.push_back(T2Element::identity(d));
    for (std::size_t k = 0; k < F.size(); ++k) {
        const G2Element step = F.has_decorations()
                                   ? lift_step(F.steps[k], F.decorations[k])
                                   : lift_step(F.steps[k]);
        lifts.push_back(tensor_mul(lifts.back(), step));
    }
    return lifts;
}

bool chen_check(const G2Element& x, const G2Element& y, const G2Element& xy,
                double tol) {
    return hom_dist(tensor_mul(x, y), xy) <= tol;
}

std::vector<T2Element> nongeo_lift(const IncrementSeq& F) {
    check_steps(F);
    if (F.has_decorations())
        for (const auto& a : F.decorations)
            if (a.norm() != 0.0)
                throw std::invalid_argument("nongeo_lift: decorations must be zero");
    const Eigen::Index d = F.dim();
    std::vector<T2Element> out;
    out.reserve(F.size() + 1);
    out.push_back(T2Element::identity(d));
    Vec running = Vec::Zero(d);
    Tensor2 pair = Tensor2::Zero(d, d);
    for (const auto& step : F.steps) {
        pair.noalias() += running * step.transpose();
        running += step;
        out.emplace_back(running, pair);
    }
    return out;
}

Tensor2 signed_area(const IncrementSeq& F) {
    check_steps(F);
    const Eigen::Index d = F.dim();
    Tensor2 area = Tensor2::Zero(d, d);
    Vec running = Vec::Zero(d);
    for (const auto& step : F.steps) {
        area.noalias() += 0.5 * (running * step.transpose() - step * running.transpose());
        running += step;
    }
    return area;
}

DiscretePath path_from_csv(const std::string& text) {
    DiscretePath p;
    std::istringstream in(text);
    std::string line;
    Eigen::Index d = -1;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::vector<double> row;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ','))
            row.push_back(std::stod(field));
        if (d < 0) d = static_cast<Eigen::Index>(row.size());
        if (static_cast<Eigen::Index>(row.size()) != d)
            throw std::invalid_argument("path_from_csv: row " + std::to_string(lineno) +
                                        " has " + std::to_string(row.size()) +
                                        " columns, expected " + std::to_string(d));
        p.points.push_back(Eigen::Map<const Vec>(row.data(), d));
    }
    return p;
}

std::string to_json(const LevelTensor& t) {
    nlohmann::json j;
    j["order"] = t.order;
    j["dim"] = t.dim;
    j["data"] = t.data;
    return j.dump();
}

}  // namespace roughlab

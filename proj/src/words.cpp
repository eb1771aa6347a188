#include "roughlab/words.hpp"

#include <cmath>
#include <stdexcept>

namespace roughlab {

std::optional<Letter> indicator_bracket(Letter u, Letter v) {
    if (u == v) return u;
    return std::nullopt;
}

BigInt occupation(std::span<const Letter> seq, const Word& w) {
    const std::size_t k = w.size();
    // prefix[m] = number of increasing tuples spelling w[0..m) seen so far
    std::vector<BigInt> prefix(k + 1);
    prefix[0] = 1;
    for (const Letter r : seq) {
        for (std::size_t m = k; m >= 1; --m) {
            if (w[m - 1] == r) prefix[m] += prefix[m - 1];
        }
    }
    return prefix[k];
}

namespace {

void add_term(WordCombination& acc, const Word& w, std::int64_t coeff) {
    if (coeff == 0) return;
    auto it = acc.find(w);
    if (it == acc.end()) {
        acc.emplace(w, coeff);
    } else {
        it->second += coeff;
        if (it->second == 0) acc.erase(it);
    }
}

// Both products share the same recursion skeleton over (prefix, w1-tail,
// w2-tail); the bracket term is simply absent for the plain shuffle.
void shuffle_rec(const Word& w1, std::size_t i, const Word& w2, std::size_t j,
                 Word& prefix, WordCombination& acc) {
    if (i == w1.size() && j == w2.size()) {
        add_term(acc, prefix, 1);
        return;
    }
    if (i < w1.size()) {
        prefix.push_back(w1[i]);
        shuffle_rec(w1, i + 1, w2, j, prefix, acc);
        prefix.pop_back();
    }
    if (j < w2.size()) {
        prefix.push_back(w2[j]);
        shuffle_rec(w1, i, w2, j + 1, prefix, acc);
        prefix.pop_back();
    }
}

void quasi_rec(const Word& w1, std::size_t i, const Word& w2, std::size_t j,
               const QuasiBracket& bracket, Word& prefix, WordCombination& acc) {
    if (i == w1.size() && j == w2.size()) {
        add_term(acc, prefix, 1);
        return;
    }
    if (i < w1.size()) {
        prefix.push_back(w1[i]);
        quasi_rec(w1, i + 1, w2, j, bracket, prefix, acc);
        prefix.pop_back();
    }
    if (j < w2.size()) {
        prefix.push_back(w2[j]);
        quasi_rec(w1, i, w2, j + 1, bracket, prefix, acc);
        prefix.pop_back();
    }
    if (i < w1.size() && j < w2.size()) {
        if (auto merged = bracket(w1[i], w2[j])) {
            prefix.push_back(*merged);
            quasi_rec(w1, i + 1, w2, j + 1, bracket, prefix, acc);
            prefix.pop_back();
        }
    }
}

}  // namespace

WordCombination shuffle(const Word& w1, const Word& w2) {
    WordCombination acc;
    Word prefix;
    prefix.reserve(w1.size() + w2.size());
    shuffle_rec(w1, 0, w2, 0, prefix, acc);
    return acc;
}

WordCombination quasi_shuffle(const Word& w1, const Word& w2,
                              const QuasiBracket& bracket) {
    WordCombination acc;
    Word prefix;
    prefix.reserve(w1.size() + w2.size());
    quasi_rec(w1, 0, w2, 0, bracket, prefix, acc);
    return acc;
}

bool verify_product(std::span<const Letter> seq, const Word& w1, const Word& w2) {
    const BigInt lhs = occupation(seq, w1) * occupation(seq, w2);
    BigInt rhs = 0;
    for (const auto& [word, coeff] : quasi_shuffle(w1, w2))
        rhs += BigInt(coeff) * occupation(seq, word);
    return lhs == rhs;
}

LevelTensor decompose_iterated_sum(std::span<const Letter> seq,
                                   const std::vector<Vec>& f, int order) {
    if (order < 1)
        throw std::invalid_argument("decompose_iterated_sum: order must be >= 1");
    if (f.empty())
        throw std::invalid_argument("decompose_iterated_sum: empty state map");
    const Eigen::Index d = f.front().size();
    const std::size_t n_states = f.size();
    for (const auto& v : f)
        if (v.size() != d)
            throw std::invalid_argument("decompose_iterated_sum: inconsistent f dims");

    LevelTensor out = LevelTensor::zero(order, d);
    // enumerate all words of the given length over the state alphabet
    Word word(static_cast<std::size_t>(order), 0);
    while (true) {
        const BigInt L = occupation(seq, word);
        if (L != 0) {
            const double weight = L.get_d();
            // weight * f(u_1) (x) ... (x) f(u_l), entries in row-major order
            for (std::size_t flat = 0; flat < out.data.size(); ++flat) {
                double prod = weight;
                std::size_t rest = flat;
                for (int m = order - 1; m >= 0; --m) {
                    const auto i = static_cast<Eigen::Index>(rest % static_cast<std::size_t>(d));
                    rest /= static_cast<std::size_t>(d);
                    prod *= f[static_cast<std::size_t>(word[static_cast<std::size_t>(m)])](i);
                }
                out.data[flat] += prod;
            }
        }
        // next word
        int m = order - 1;
        for (; m >= 0; --m) {
            if (static_cast<std::size_t>(++word[static_cast<std::size_t>(m)]) < n_states) break;
            word[static_cast<std::size_t>(m)] = 0;
        }
        if (m < 0) break;
    }
    return out;
}

std::vector<ErgodicRow> ergodic_scaling(std::span<const Letter> seq, const Word& w,
                                        std::span<const double> pi,
                                        std::span<const std::size_t> n_grid) {
    const std::size_t k = w.size();
    double predicted = 1.0;
    for (const Letter u : w) {
        if (u < 0 || static_cast<std::size_t>(u) >= pi.size())
            throw std::invalid_argument("ergodic_scaling: word letter outside pi");
        predicted *= pi[static_cast<std::size_t>(u)];
    }
    for (std::size_t m = 2; m <= k; ++m) predicted /= static_cast<double>(m);

    std::vector<ErgodicRow> table;
    table.reserve(n_grid.size());
    std::vector<BigInt> prefix(k + 1);
    prefix[0] = 1;
    std::size_t pos = 0;
    for (const std::size_t n : n_grid) {
        if (n > seq.size())
            throw std::invalid_argument("ergodic_scaling: grid point beyond sequence");
        for (; pos < n; ++pos) {
            const Letter r = seq[pos];
            for (std::size_t m = k; m >= 1; --m)
                if (w[m - 1] == r) prefix[m] += prefix[m - 1];
        }
        ErgodicRow row;
        row.n = n;
        row.count = prefix[k];
        row.rescaled = row.count.get_d() / std::pow(static_cast<double>(n),
                                                    static_cast<double>(k));
        row.predicted = predicted;
        row.abs_error = std::abs(row.rescaled - row.predicted);
        table.push_back(std::move(row));
    }
    return table;
}

double centered_pair(std::span<const Letter> seq, Letter u, Letter v,
                     std::span<const double> pi) {
    if (u < 0 || static_cast<std::size_t>(u) >= pi.size() || v < 0 ||
        static_cast<std::size_t>(v) >= pi.size())
        throw std::invalid_argument("centered_pair: letter outside pi");
    const double pu = pi[static_cast<std::size_t>(u)];
    const double pv = pi[static_cast<std::size_t>(v)];
    double first = 0.0;   // running sum of centered u-indicators
    double second = 0.0;  // accumulated pair sum
    for (const Letter r : seq) {
        second += first * ((r == v ? 1.0 : 0.0) - pv);
        first += (r == u ? 1.0 : 0.0) - pu;
    }
    return second;
}

}  // namespace roughlab

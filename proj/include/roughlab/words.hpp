#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <gmpxx.h>

#include "roughlab/signatures.hpp"

namespace roughlab {

/// Letters are alphabet indices (chain states or basis directions).
using Letter = int;
using Word = std::vector<Letter>;

/// Integer-coefficient formal sum of words; zero coefficients are never stored.
using WordCombination = std::map<Word, std::int64_t>;

/// Exact counts need arbitrary precision: they grow like n^|w|.
using BigInt = mpz_class;

/// Commutative bracket hook for the quasi-shuffle recursion: returns the
/// merged letter, or nullopt to annihilate the term.
using QuasiBracket = std::function<std::optional<Letter>(Letter, Letter)>;

/// The bracket the discrete identities instantiate: [u,v] = u when u = v,
/// otherwise the term is dropped.
std::optional<Letter> indicator_bracket(Letter u, Letter v);

/// Number of strictly increasing index tuples at which seq spells out w.
/// Empty word counts 1 (the unit). One pass, exact integers.
BigInt occupation(std::span<const Letter> seq, const Word& w);

/// All interleavings of w1 and w2 as a formal sum.
WordCombination shuffle(const Word& w1, const Word& w2);

/// ax * by = [a,b](x*y) + a(x*by) + b(ax*y), with the indicator bracket by
/// default. Restricting the result to words of full length |w1|+|w2| recovers
/// the shuffle product.
WordCombination quasi_shuffle(const Word& w1, const Word& w2,
                              const QuasiBracket& bracket = indicator_bracket);

/// occupation(w1) * occupation(w2) == sum over quasi_shuffle(w1,w2) of
/// coeff * occupation(w), exactly.
bool verify_product(std::span<const Letter> seq, const Word& w1, const Word& w2);

/// sum over words (u_1..u_l) of f(u_1) (x) ... (x) f(u_l) * L_{word}; equals
/// the order-l iterated sum of the induced increments when emissions are
/// deterministic per state.
LevelTensor decompose_iterated_sum(std::span<const Letter> seq,
                                   const std::vector<Vec>& f, int order);

/// One row of the ergodic-scaling table for a fixed word.
struct ErgodicRow {
    std::size_t n = 0;
    BigInt count;
    double rescaled = 0.0;   // count / n^|w|
    double predicted = 0.0;  // (1/k!) prod pi(u_i)
    double abs_error = 0.0;
};

/// L_{w;n} / n^|w| against its stationary limit along an n-grid (ascending).
std::vector<ErgodicRow> ergodic_scaling(std::span<const Letter> seq, const Word& w,
                                        std::span<const double> pi,
                                        std::span<const std::size_t> n_grid);

/// Centered second-order occupation sum
/// sum_{l1<l2} (1_{seq=u} - pi(u))(1_{seq=v} - pi(v)).
double centered_pair(std::span<const Letter> seq, Letter u, Letter v,
                     std::span<const double> pi);

}  // namespace roughlab

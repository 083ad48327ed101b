#pragma once

#include <random>

#include "stacksem/logic.hpp"

namespace stacksem {

struct GenOptions {
    int depth = 3;
    bool delta0 = true;          // arrows out of 1 only, no object quantifiers
    int max_term_length = 3;
};

/// Random well-typed closed formula over the signature. Draws only through rng() % n, so
/// the output is a function of the seed.
FormulaPtr random_formula(const Signature& sig, std::mt19937_64& rng, const GenOptions& opt);

}  // namespace stacksem

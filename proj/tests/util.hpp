#pragma once

#include <numeric>
#include <vector>

#include "stacksem/catkit.hpp"

namespace testutil {

using stacksem::Handle;
using stacksem::Mor;
using stacksem::Obj;

inline std::vector<int> iota(int n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

/// Finite set with n elements.
inline Obj fs(int n) { return Obj({n}, {iota(n)}); }

inline Mor fsmap(int dom, int cod, std::vector<int> table) { return Mor{fs(dom), fs(cod), {std::move(table)}}; }

/// Z/2-set from an involution table.
inline Obj z2obj(std::vector<int> swap) {
    int n = static_cast<int>(swap.size());
    return Obj({n}, {iota(n), std::move(swap)});
}

inline Obj free_orbit() { return z2obj({1, 0}); }

/// All functions n -> m as tables, lexicographic.
inline std::vector<std::vector<int>> all_tables(int n, int m) {
    std::vector<std::vector<int>> out;
    if (n > 0 && m == 0) return out;
    std::vector<int> t(n, 0);
    while (true) {
        out.push_back(t);
        int k = n - 1;
        while (k >= 0 && t[k] == m - 1) t[k--] = 0;
        if (k < 0) break;
        t[k]++;
    }
    return out;
}

}  // namespace testutil

#pragma once

// Plain recursive sets: sorted duplicate-free member vectors, compared structurally.
// Shares nothing with the hash-consed codes it is checked against.

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacksem/matset.hpp"

namespace oracle {

struct Set {
    std::vector<Set> m;

    friend bool operator==(const Set& a, const Set& b) { return a.m == b.m; }
    friend bool operator<(const Set& a, const Set& b) {
        if (a.m.size() != b.m.size()) return a.m.size() < b.m.size();
        return std::lexicographical_compare(a.m.begin(), a.m.end(), b.m.begin(), b.m.end());
    }
};

inline Set make(std::vector<Set> ms) {
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    return Set{std::move(ms)};
}

inline bool has(const Set& s, const Set& x) { return std::binary_search(s.m.begin(), s.m.end(), x); }

inline Set parse(const std::string& s) {
    size_t i = 0;
    auto skip = [&] {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    };
    auto one = [&](auto&& self) -> Set {
        skip();
        if (s.at(i) != '{') throw std::runtime_error("oracle parse");
        ++i;
        std::vector<Set> ms;
        skip();
        if (s.at(i) == '}') {
            ++i;
            return {};
        }
        while (true) {
            ms.push_back(self(self));
            skip();
            char c = s.at(i++);
            if (c == '}') return make(std::move(ms));
            if (c != ',') throw std::runtime_error("oracle parse");
        }
    };
    return one(one);
}

inline Set from(const stacksem::mat::Hf& h) {
    std::vector<Set> ms;
    for (const auto& x : h.members()) ms.push_back(from(x));
    return make(std::move(ms));
}

inline Set pair(const Set& a, const Set& b) { return make({a, b}); }
inline Set kpair(const Set& a, const Set& b) { return make({make({a}), make({a, b})}); }

inline Set unite(const Set& a) {
    std::vector<Set> ms;
    for (const auto& y : a.m) ms.insert(ms.end(), y.m.begin(), y.m.end());
    return make(std::move(ms));
}

inline Set product(const Set& a, const Set& b) {
    std::vector<Set> ms;
    for (const auto& x : a.m)
        for (const auto& y : b.m) ms.push_back(kpair(x, y));
    return make(std::move(ms));
}

inline Set funcs(const Set& a, const Set& b) {
    std::vector<Set> graphs{Set{}};
    for (const auto& x : a.m) {
        std::vector<Set> next;
        for (const auto& g : graphs)
            for (const auto& y : b.m) {
                auto ms = g.m;
                ms.push_back(kpair(x, y));
                next.push_back(make(std::move(ms)));
            }
        graphs = std::move(next);
    }
    return make(std::move(graphs));
}

inline Set power(const Set& a) {
    std::vector<Set> subs;
    for (unsigned mask = 0; mask < (1u << a.m.size()); ++mask) {
        std::vector<Set> ms;
        for (size_t i = 0; i < a.m.size(); ++i)
            if (mask >> i & 1) ms.push_back(a.m[i]);
        subs.push_back(make(std::move(ms)));
    }
    return make(std::move(subs));
}

inline void collect(const Set& a, std::vector<Set>& out) {
    for (const auto& x : a.m) {
        out.push_back(x);
        collect(x, out);
    }
}

inline Set tc(const Set& a) {
    std::vector<Set> out;
    collect(a, out);
    return make(std::move(out));
}

inline Set vn(int n) {
    Set s;
    for (int k = 0; k < n; ++k) {
        auto ms = s.m;
        ms.push_back(s);
        s = make(std::move(ms));
    }
    return s;
}

/// Every set whose transitive closure has at most b elements, by closing under "add a member".
inline std::vector<Set> upto_tc(int b) {
    std::vector<Set> all{Set{}};
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<Set> fresh;
        for (const auto& s : all)
            for (const auto& x : all) {
                if (has(s, x)) continue;
                auto ms = s.m;
                ms.push_back(x);
                Set t = make(std::move(ms));
                if (static_cast<int>(tc(t).m.size()) > b) continue;
                if (!std::binary_search(all.begin(), all.end(), t) &&
                    std::find(fresh.begin(), fresh.end(), t) == fresh.end())
                    fresh.push_back(t);
            }
        if (!fresh.empty()) {
            grew = true;
            all.insert(all.end(), fresh.begin(), fresh.end());
            std::sort(all.begin(), all.end());
        }
    }
    return all;
}

/// V_r by iterating the power set from the empty set.
inline Set powerset_iterate(int r) {
    Set s;
    for (int k = 0; k < r; ++k) s = power(s);
    return s;
}

}  // namespace oracle

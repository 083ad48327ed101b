#include <doctest.h>

#include <future>
#include <numeric>
#include <random>
#include <set>

#include "hf_oracle.hpp"
#include "stacksem/logic.hpp"
#include "stacksem/matset.hpp"

using namespace stacksem;
using namespace stacksem::mat;

namespace {

Graph graph_from_mask(int n, std::uint64_t mask) {
    std::vector<std::pair<int, int>> edges;
    for (int s = 0; s < n * n; ++s)
        if (mask >> s & 1) edges.emplace_back(s / n, s % n);
    return Graph::from_edges(n, edges);
}

Graph random_graph(int n, double p, std::mt19937& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<std::pair<int, int>> edges;
    for (int c = 0; c < n; ++c)
        for (int q = 0; q < n; ++q)
            if (coin(rng)) edges.emplace_back(c, q);
    return Graph::from_edges(n, edges);
}

// cycle test by reachability closure
bool has_cycle(const Graph& g) {
    const int n = g.size();
    std::vector<std::vector<char>> r(n, std::vector<char>(n, 0));
    for (auto [c, p] : g.edges()) r[c][p] = 1;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = 1;
    for (int i = 0; i < n; ++i)
        if (r[i][i]) return true;
    return false;
}

// Collapse of a well-founded graph, computed on plain sets.
oracle::Set collapse(const Graph& g, int v) {
    std::vector<oracle::Set> ms;
    for (int c : g.kids[v]) ms.push_back(collapse(g, c));
    return oracle::make(std::move(ms));
}

Apg permuted(const Apg& X, const std::vector<int>& perm) {
    std::vector<std::pair<int, int>> edges;
    for (auto [c, p] : X.graph.edges()) edges.emplace_back(perm[c], perm[p]);
    return make_apg(Graph::from_edges(X.size(), edges), perm[X.root]);
}

std::vector<int> shuffled(int n, std::mt19937& rng) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

Apg lit(const std::string& s) { return decode(parse_hf(s)); }

std::string braces(const Apg& X) { return code(X).str(); }

}  // namespace

TEST_CASE("well-foundedness and extensionality examples") {
    CHECK(is_wellfounded(Graph{}));
    CHECK_FALSE(is_wellfounded(Graph::from_edges(1, {{0, 0}})));
    CHECK(is_wellfounded(Graph::from_edges(2, {{0, 1}})));

    CHECK_FALSE(is_extensional(Graph::from_edges(3, {{0, 2}, {1, 2}})));
    CHECK(is_extensional(von_neumann(2).graph));
    CHECK(is_extensional(Graph{}));
    CHECK_THROWS_AS(Graph::from_edges(2, {{0, 2}}), MatError);
    CHECK_THROWS_AS(make_apg(Graph::from_edges(2, {}), 0), MatError);
}

TEST_CASE("inductive closure agrees with acyclicity") {
    for (int n = 0; n <= 4; ++n)
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n * n)); ++mask) {
            Graph g = graph_from_mask(n, mask);
            REQUIRE(is_wellfounded(g) == !has_cycle(g));
        }
    std::mt19937 rng(7);
    for (int n : {5, 6})
        for (int k = 0; k < 20000; ++k) {
            Graph g = random_graph(n, 0.15, rng);
            REQUIRE(is_wellfounded(g) == !has_cycle(g));
        }
}

TEST_CASE("largest bisimulation") {
    Apg v2 = von_neumann(2);
    auto R = largest_bisimulation(v2.graph, v2.graph);
    for (int x = 0; x < v2.size(); ++x)
        for (int y = 0; y < v2.size(); ++y) CHECK(R[x][y] == (x == y));

    Graph twins = Graph::from_edges(3, {{0, 2}, {1, 2}});
    auto T = largest_bisimulation(twins, twins);
    CHECK(T[0][1]);
    CHECK(T[1][0]);
    CHECK(is_bisimulation(twins, twins, T));

    Apg a = lit("{{}}");
    Apg b = lit("{{{}}}");
    auto S = largest_bisimulation(a.graph, b.graph);
    CHECK_FALSE(S[a.root][b.root]);
    CHECK_FALSE(apg_eq_bisim(a, b));
    CHECK_FALSE(find_isomorphism(a, b));

    // the result is a bisimulation and contains every bisimulation found by brute force on small graphs
    std::mt19937 rng(3);
    for (int k = 0; k < 200; ++k) {
        Graph X = random_graph(3, 0.3, rng);
        Graph Y = random_graph(2, 0.3, rng);
        auto L = largest_bisimulation(X, Y);
        REQUIRE(is_bisimulation(X, Y, L));
        for (unsigned m = 0; m < (1u << 6); ++m) {
            Relation Q(3, std::vector<char>(2, 0));
            for (int i = 0; i < 6; ++i) Q[i / 2][i % 2] = m >> i & 1;
            if (!is_bisimulation(X, Y, Q)) continue;
            for (int i = 0; i < 6; ++i)
                if (Q[i / 2][i % 2]) REQUIRE(L[i / 2][i % 2]);
        }
    }
}

TEST_CASE("extensional quotient examples") {
    Apg ab = make_apg(Graph::from_edges(3, {{0, 2}, {1, 2}}), 2);
    Quotient q = extensional_quotient(ab);
    CHECK(q.apg.size() == 2);
    CHECK(code(q.apg).str() == "{{}}");
    CHECK(q.map[0] == q.map[1]);

    Apg v2 = von_neumann(2);
    CHECK(code(extensional_quotient(v2).apg) == code(v2));
    CHECK(extensional_quotient(v2).apg.size() == v2.size());

    // three copies of the empty set and two of {empty} under one root
    Apg redundant = make_apg(Graph::from_edges(6, {{0, 5}, {1, 5}, {2, 5}, {0, 3}, {1, 4}, {3, 5}, {4, 5}}), 5);
    Quotient r = extensional_quotient(redundant);
    CHECK(r.apg.size() == 3);
    CHECK(oracle::from(code(r.apg)) == collapse(redundant.graph, redundant.root));
    CHECK(oracle::from(code(r.apg)) == oracle::parse("{{},{{}}}"));

    CHECK_THROWS_AS(extensional_quotient(make_apg(Graph::from_edges(1, {{0, 0}}), 0)), MatError);
    CHECK_THROWS_AS(code(make_apg(Graph::from_edges(2, {{0, 1}, {1, 0}}), 0)), MatError);
}

TEST_CASE("quotient is canonical and invariant under relabelling") {
    std::mt19937 rng(11);
    int seen = 0;
    auto visit = [&](const Graph& g) {
        if (!is_wellfounded(g)) return;
        for (int root = 0; root < g.size(); ++root) {
            if (!is_accessible(g, root)) continue;
            Apg X{g, root};
            Quotient q = extensional_quotient(X);
            REQUIRE(is_wellfounded(q.apg.graph));
            REQUIRE(is_extensional(q.apg.graph));
            REQUIRE(is_accessible(q.apg.graph, q.apg.root));
            REQUIRE(is_simulation(X.graph, q.apg.graph, q.map));
            std::set<int> image(q.map.begin(), q.map.end());
            REQUIRE(static_cast<int>(image.size()) == q.apg.size());
            Hf c = code(q.apg);
            REQUIRE(oracle::from(c) == collapse(g, root));
            REQUIRE(code(extensional_quotient(q.apg).apg) == c);
            REQUIRE(extensional_quotient(q.apg).apg.size() == q.apg.size());
            REQUIRE(code(permuted(X, shuffled(X.size(), rng))) == c);
            ++seen;
        }
    };
    for (int n = 1; n <= 4; ++n)
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n * n)); ++mask) visit(graph_from_mask(n, mask));
    for (int k = 0; k < 20000; ++k) visit(random_graph(5, 0.2, rng));
    CHECK(seen > 500);
}

TEST_CASE("simulations between well-founded extensional graphs are rigid") {
    std::mt19937 rng(5);
    std::vector<Apg> apgs;
    for (const auto& x : hf_upto_tc(3)) {
        Apg d = decode(x);
        apgs.push_back(d);
        apgs.push_back(permuted(d, shuffled(d.size(), rng)));
    }
    int sims = 0;
    for (const auto& X : apgs)
        for (const auto& Y : apgs) {
            const int n = X.size(), m = Y.size();
            std::vector<std::vector<int>> found;
            std::vector<int> f(n, 0);
            while (true) {
                if (is_simulation(X.graph, Y.graph, f)) found.push_back(f);
                int k = 0;
                while (k < n && ++f[k] == m) f[k++] = 0;
                if (k == n) break;
            }
            for (const auto& s : found) {
                ++sims;
                std::set<int> img(s.begin(), s.end());
                REQUIRE(static_cast<int>(img.size()) == n);
                // image is closed downward
                for (int y : img)
                    for (int c : Y.graph.kids[y]) REQUIRE(img.count(c));
            }
            // parallel simulations from an accessible source agree on the root, hence everywhere
            std::map<int, std::vector<std::vector<int>>> by_root;
            for (const auto& s : found) by_root[s[X.root]].push_back(s);
            for (const auto& [r, group] : by_root)
                for (const auto& s : group) REQUIRE(s == group.front());
        }
    CHECK(sims > 0);
}

TEST_CASE("bi-entire bisimulations are isomorphisms") {
    std::mt19937 rng(9);
    std::vector<Apg> apgs;
    for (const auto& x : hf_upto_tc(4)) {
        Apg d = decode(x);
        apgs.push_back(d);
        apgs.push_back(permuted(d, shuffled(d.size(), rng)));
    }
    for (const auto& X : apgs)
        for (const auto& Y : apgs) {
            auto R = largest_bisimulation(X.graph, Y.graph);
            bool total = true;
            for (int x = 0; x < X.size(); ++x)
                total = total && std::any_of(R[x].begin(), R[x].end(), [](char c) { return c != 0; });
            for (int y = 0; y < Y.size(); ++y) {
                bool hit = false;
                for (int x = 0; x < X.size(); ++x) hit = hit || R[x][y];
                total = total && hit;
            }
            bool iso = find_isomorphism(X, Y).has_value();
            REQUIRE(apg_eq_bisim(X, Y) == iso);
            REQUIRE(apg_eq(X, Y) == iso);
            if (!total) continue;
            REQUIRE(X.size() == Y.size());
            std::vector<int> f(X.size(), -1);
            for (int x = 0; x < X.size(); ++x)
                for (int y = 0; y < Y.size(); ++y)
                    if (R[x][y]) {
                        REQUIRE(f[x] == -1);
                        f[x] = y;
                    }
            std::set<int> img(f.begin(), f.end());
            REQUIRE(static_cast<int>(img.size()) == X.size());
            for (int x = 0; x < X.size(); ++x)
                for (int x2 = 0; x2 < X.size(); ++x2) REQUIRE(X.graph.has_edge(x, x2) == Y.graph.has_edge(f[x], f[x2]));
        }
}

TEST_CASE("codes") {
    CHECK(braces(empty()) == "{}");
    CHECK(empty().size() == 1);
    CHECK(oracle::from(code(von_neumann(2))) == oracle::vn(2));
    CHECK(braces(von_neumann(2)) == "{{},{{}}}");
    Apg one = decode(parse_hf("{{}}"));
    CHECK(one.size() == 2);
    CHECK(one.graph.edges() == std::vector<std::pair<int, int>>{{0, 1}});

    for (const auto& x : hf_upto_tc(4)) {
        REQUIRE(code(decode(x)) == x);
        REQUIRE(decode(x).size() == tc_size(x) + 1);
        REQUIRE(parse_hf(x.str()) == x);
        REQUIRE(oracle::parse(x.str()) == oracle::from(x));
    }
    CHECK(parse_hf("{ {}, {} }") == parse_hf("{{}}"));
    CHECK_THROWS_AS(parse_hf("{"), MatError);
    CHECK_THROWS_AS(parse_hf("{}}"), MatError);

    // Ackermann numbering of V_3, then 2^2
    std::vector<std::string> acks;
    for (const auto& x : hf_upto_rank(3)) acks.push_back(x.ackermann());
    CHECK(acks == std::vector<std::string>{"0", "1", "2", "3"});
    CHECK(parse_hf("{{{{}}}}").ackermann() == "4");
    CHECK(parse_hf("{{{}}}").ackermann() == "2");
    CHECK(von_neumann_code(3) == code(von_neumann(3)));
    CHECK(rank(von_neumann_code(3)) == 3);
}

TEST_CASE("enumerations match the oracle") {
    for (int b = 0; b <= 4; ++b) {
        auto ours = hf_upto_tc(b);
        auto theirs = oracle::upto_tc(b);
        std::vector<oracle::Set> conv;
        for (const auto& x : ours) conv.push_back(oracle::from(x));
        std::sort(conv.begin(), conv.end());
        CHECK(conv == theirs);
        CHECK(std::is_sorted(ours.begin(), ours.end()));
    }
    CHECK(hf_upto_rank(4).size() == oracle::powerset_iterate(4).m.size());
    CHECK(oracle::powerset_iterate(4).m.size() == 16);
}

TEST_CASE("minimal graphs on at most three nodes name four sets") {
    std::set<oracle::Set> codes;
    for (int n = 1; n <= 3; ++n)
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n * n)); ++mask) {
            Graph g = graph_from_mask(n, mask);
            if (has_cycle(g) || !is_extensional(g)) continue;
            for (int root = 0; root < n; ++root)
                if (is_accessible(g, root)) codes.insert(collapse(g, root));
        }
    CHECK(codes.size() == 4);
    int ours = 0;
    for (const auto& x : hf_upto_tc(4))
        if (decode(x).size() <= 3) ++ours;
    CHECK(ours == 4);
}

TEST_CASE("membership and equality") {
    Apg e = empty();
    Apg one = lit("{{}}");
    CHECK(apg_mem(e, one));
    CHECK(apg_mem_bisim(e, one));
    CHECK_FALSE(apg_mem(one, one));
    CHECK_FALSE(apg_mem_bisim(one, one));

    Apg direct = lit("{{},{{}}}");
    Apg via_pair = pair(empty(), lit("{{}}"));
    Apg presented = make_apg(Graph::from_edges(3, {{2, 0}, {2, 1}, {0, 1}}), 1);
    CHECK(apg_eq(direct, via_pair));
    CHECK(apg_eq_bisim(direct, via_pair));
    CHECK(apg_eq_bisim(direct, presented));
    CHECK(apg_eq(direct, presented));

    auto all = hf_upto_tc(3);
    for (const auto& a : all)
        for (const auto& b : all) {
            REQUIRE(apg_mem(decode(a), decode(b)) == b.contains(a));
            REQUIRE(apg_mem_bisim(decode(a), decode(b)) == b.contains(a));
        }
}

TEST_CASE("slices") {
    Apg v2 = von_neumann(2);
    CHECK(code(slash(v2, v2.root)) == code(v2));
    CHECK(slash(v2, v2.root).size() == v2.size());
    int zero = -1;
    for (int v = 0; v < v2.size(); ++v)
        if (v2.graph.kids[v].empty()) zero = v;
    CHECK(braces(slash(v2, zero)) == "{}");
    auto rest = slashslash(v2, v2.root);
    std::vector<int> expected;
    for (int v = 0; v < v2.size(); ++v)
        if (v != v2.root) expected.push_back(v);
    CHECK(rest == expected);
    CHECK(slashslash(v2, zero).empty());
}

TEST_CASE("construction examples") {
    Apg e = empty();
    Apg v2 = von_neumann(2);
    CHECK(braces(pair(e, e)) == "{{}}");
    CHECK(oracle::from(code(union_of(lit("{{{}},{{{}}}}")))) == oracle::parse("{{},{{}}}"));
    CHECK(oracle::from(code(product(lit("{{}}"), lit("{{}}")))) == oracle::parse("{{{{}}}}"));
    CHECK(code(function_set(v2, v2)).card() == 4);
    CHECK(code(power(v2)).card() == 4);
    CHECK(oracle::from(code(transitive_closure(lit("{{{}}}")))) == oracle::parse("{{},{{}}}"));
    CHECK(oracle::from(code(von_neumann(3))) == oracle::parse("{{},{{}},{{},{{}}}}"));
    CHECK(oracle::from(code(von_neumann(3))) == oracle::vn(3));
    CHECK(braces(von_neumann(0)) == "{}");

    // carriers have the advertised shapes before quotienting
    CHECK(pair_carrier(v2, e).size() == v2.size() + e.size() + 1);
    CHECK(tc_carrier(v2).size() == v2.size());
    CHECK(power_carrier(v2).size() == (v2.size() - 1) + 4 + 1);
    CHECK(function_set_carrier(v2, e).size() > 0);
    CHECK(braces(function_set(v2, e)) == "{}");
    CHECK(braces(function_set(e, v2)) == "{{}}");
}

TEST_CASE("constructions agree with the oracle") {
    std::mt19937 rng(13);
    auto inputs = hf_upto_tc(4);
    std::vector<Apg> apgs;
    for (const auto& x : inputs) {
        Apg d = decode(x);
        // a redundant presentation: every hereditary member duplicated, root shared
        const int t = d.size() - 1;  // decode puts the root last
        std::vector<std::pair<int, int>> edges;
        for (auto [c, p] : d.graph.edges()) {
            if (p == d.root) {
                edges.emplace_back(c, 2 * t);
                edges.emplace_back(c + t, 2 * t);
            } else {
                edges.emplace_back(c, p);
                edges.emplace_back(c + t, p + t);
            }
        }
        Apg twice = make_apg(Graph::from_edges(2 * t + 1, edges), 2 * t);
        apgs.push_back(apgs.size() % 2 ? twice : permuted(d, shuffled(d.size(), rng)));
    }
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Apg& X = apgs[i];
        auto a = oracle::from(inputs[i]);
        REQUIRE(code(X) == inputs[i]);
        REQUIRE(oracle::from(code(union_of(X))) == oracle::unite(a));
        REQUIRE(oracle::from(code(power(X))) == oracle::power(a));
        REQUIRE(oracle::from(code(transitive_closure(X))) == oracle::tc(a));
        REQUIRE(code(power(X)).card() == (1 << a.m.size()));
        for (size_t j = 0; j < inputs.size(); ++j) {
            const Apg& Y = apgs[j];
            auto b = oracle::from(inputs[j]);
            REQUIRE(oracle::from(code(pair(X, Y))) == oracle::pair(a, b));
            Hf P = code(product(X, Y));
            REQUIRE(oracle::from(P) == oracle::product(a, b));
            REQUIRE(P.card() == static_cast<int>(a.m.size() * b.m.size()));
            Hf F = code(function_set(X, Y));
            INFO(inputs[i].str(), " -> ", inputs[j].str(), ": ", F.str());
            REQUIRE(oracle::from(F) == oracle::funcs(a, b));
            int expected = 1;
            for (size_t k = 0; k < a.m.size(); ++k) expected *= static_cast<int>(b.m.size());
            REQUIRE(F.card() == expected);
        }
    }
}

TEST_CASE("choice functions") {
    Apg X = lit("{{{}},{{},{{}}}}");
    Hf f = code(choice_fn(X));
    HfCategory cat;
    Hf x = code(X);
    Hf u = code(union_of(X));
    CHECK(cat.is_function(f, x, u));
    for (const auto& m : x.members()) CHECK(m.contains(cat.apply(f, m)));
    oracle::Set none;
    oracle::Set expected = oracle::make({oracle::kpair(oracle::parse("{{}}"), none),
                                         oracle::kpair(oracle::parse("{{},{{}}}"), none)});
    CHECK(oracle::from(f) == expected);
    CHECK_THROWS_AS(choice_fn(lit("{{},{{}}}")), MatError);
    CHECK(braces(choice_fn(empty())) == "{}");

    for (const auto& s : hf_upto_tc(4)) {
        if (std::any_of(s.members().begin(), s.members().end(), [](const Hf& m) { return m.card() == 0; })) continue;
        Hf g = code(choice_fn(decode(s)));
        Hf us = code(union_of(decode(s)));
        REQUIRE(cat.is_function(g, s, us));
        for (const auto& m : s.members()) REQUIRE(m.contains(cat.apply(g, m)));
    }
}

TEST_CASE("mostowski collapse") {
    Apg v2 = von_neumann(2);
    CHECK(mostowski(v2.graph, v2.root).str() == "{{},{{}}}");
    int leaf = -1;
    for (int v = 0; v < v2.size(); ++v)
        if (v2.graph.kids[v].empty()) leaf = v;
    CHECK(mostowski(v2.graph, leaf).str() == "{}");
    Graph chain = Graph::from_edges(3, {{0, 1}, {1, 2}});
    CHECK(mostowski(chain, 2).str() == "{{{}}}");
    CHECK_THROWS_AS(mostowski(Graph::from_edges(3, {{0, 2}, {1, 2}}), 2), MatError);
    CHECK_THROWS_AS(mostowski(Graph::from_edges(1, {{0, 0}}), 0), MatError);
}

TEST_CASE("staged quotient matches the greatest-bisimulation quotient") {
    std::mt19937 rng(17);
    int compared = 0;
    for (int k = 0; k < 3000; ++k) {
        Graph g = random_graph(5, 0.25, rng);
        if (!is_wellfounded(g)) continue;
        for (int root = 0; root < g.size(); ++root) {
            if (!is_accessible(g, root)) continue;
            Apg X{g, root};
            Quotient full = extensional_quotient(X);
            for (int n = 1; n <= 3; ++n) {
                if (!staged_hypothesis(X, n)) continue;
                Quotient s = staged_quotient(X, n);
                REQUIRE(is_simulation(X.graph, s.apg.graph, s.map));
                if (!is_extensional(s.apg.graph)) continue;
                ++compared;
                REQUIRE(code(s.apg) == code(full.apg));
                REQUIRE(find_isomorphism(s.apg, full.apg).has_value());
            }
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("material formulas parse and print") {
    auto f = parse_material("forall z in x. z in y");
    CHECK(is_delta0(f));
    CHECK(print(f) == "forall z in x. z in y");
    CHECK(free_vars(f) == std::vector<std::string>{"x", "y"});
    auto g = parse_material("exists w. forall z in x. z in w");
    CHECK_FALSE(is_delta0(g));
    CHECK(free_vars(g) == std::vector<std::string>{"x"});
    for (const std::string s :
         {"a = b or a in b and not b in a", "(a = b => b = a) => true", "not (exists x in a. x = x)",
          "forall x, y in a. x = y", "(forall x in a. x = x) and a = a"}) {
        auto p = parse_material(s);
        CHECK(print(parse_material(print(p))) == print(p));
    }
    CHECK_THROWS_AS(parse_material("x in"), ParseError);
    CHECK_THROWS_AS(parse_material("forall in x. true"), ParseError);
    CHECK_THROWS_AS(parse_material("x ~ y"), ParseError);
}

TEST_CASE("material evaluation examples") {
    Hf e;
    Hf v2 = von_neumann_code(2);
    auto vacuous = eval_material(parse_material("forall z in x. z in y"), {{"x", e}, {"y", e}}, 4);
    CHECK(vacuous.str() == "Forced(Exact)");

    auto ext = parse_material("(forall z in a. z in b) and (forall z in b. z in a) => a = b");
    Hf p = code(pair(empty(), lit("{{}}")));
    CHECK(eval_material(ext, {{"a", p}, {"b", v2}}, 4).forced_exact());
    CHECK(eval_material(parse_material("a = b"), {{"a", p}, {"b", v2}}, 4).forced_exact());

    auto bound = eval_material(parse_material("exists w. forall z in x. z in w"), {{"x", v2}}, 4);
    CHECK(bound.str() == "Forced(Exact)");
    REQUIRE(bound.evidence);
    CHECK(bound.evidence->note.find("witness w = ") == 0);

    auto universal = eval_material(parse_material("forall w. not w in w"), {}, 3);
    CHECK(universal.str() == "Forced(AtBudget)");
    auto missing = eval_material(parse_material("exists w. forall z in w. false and true"), {}, 3);
    CHECK(missing.forced_exact());
    auto nothing = eval_material(parse_material("exists w. w in w"), {}, 3);
    CHECK(nothing.str() == "Refuted(AtBudget)");

    CHECK_THROWS_AS(eval_material(parse_material("x in y"), {{"x", e}}, 4), MatError);
    CHECK_THROWS_AS(eval_material(parse_material("true"), {}, 0), std::invalid_argument);
}

TEST_CASE("direct and amalgam routes agree on bounded formulas") {
    std::mt19937 rng(21);
    const std::vector<std::string> vars = {"a", "b", "c"};
    auto pick = [&](const std::vector<std::string>& vs) { return vs[rng() % vs.size()]; };
    std::function<std::string(int, std::vector<std::string>)> gen = [&](int depth, std::vector<std::string> vs) {
        int choice = static_cast<int>(rng() % (depth > 0 ? 7 : 2));
        switch (choice) {
            case 0: return pick(vs) + " = " + pick(vs);
            case 1: return pick(vs) + " in " + pick(vs);
            case 2: return "(" + gen(depth - 1, vs) + " and " + gen(depth - 1, vs) + ")";
            case 3: return "(" + gen(depth - 1, vs) + " or " + gen(depth - 1, vs) + ")";
            case 4: return "(" + gen(depth - 1, vs) + " => " + gen(depth - 1, vs) + ")";
            case 5: return "not " + gen(depth - 1, vs);
            default: {
                std::string v = "v" + std::to_string(vs.size());
                std::string y = pick(vs);
                vs.push_back(v);
                return std::string(rng() % 2 ? "(forall " : "(exists ") + v + " in " + y + ". " + gen(depth - 1, vs) +
                       ")";
            }
        }
    };
    auto sets = hf_upto_tc(3);
    int agreed = 0;
    for (int k = 0; k < 300; ++k) {
        auto f = parse_material(gen(3, vars));
        REQUIRE(is_delta0(f));
        std::map<std::string, Hf> env;
        for (const auto& v : vars) env[v] = sets[rng() % sets.size()];
        Verdict d = eval_material(f, env, 3, Route::Direct);
        Verdict m = eval_material(f, env, 3, Route::Amalgam);
        REQUIRE(d.exact());
        REQUIRE(m.exact());
        REQUIRE(d.forced() == m.forced());
        ++agreed;
    }
    CHECK(agreed == 300);
}

TEST_CASE("axiom suite at rank 3") {
    AxiomReport rep = axiom_suite(3);
    CHECK(rep.universe == 4);
    CHECK(rep.results.size() == 10);
    for (const auto& r : rep.results) {
        INFO(r.name);
        CHECK(r.instances > 0);
        CHECK(r.violations == 0);
    }
    CHECK(rep.ok());
}

TEST_CASE("HF category matches FinSet") {
    HfCategory cat = hf_category();
    auto sets = hf_upto_tc(3);
    for (const auto& X : sets)
        for (const auto& Y : sets) {
            auto homs = cat.hom(X, Y);
            int expected = 1;
            for (int k = 0; k < X.card(); ++k) expected *= Y.card();
            REQUIRE(static_cast<int>(homs.size()) == expected);
            auto fin = cat.finset()->morphisms(cat.to_finset(X), cat.to_finset(Y));
            REQUIRE(fin.size() == homs.size());
            std::set<std::string> keys;
            for (const auto& f : homs) {
                REQUIRE(cat.is_function(f, X, Y));
                keys.insert(cat.to_finset(f, X, Y).key());
            }
            REQUIRE(keys.size() == homs.size());
            for (const auto& f : homs) {
                REQUIRE(cat.compose(f, cat.identity(X)) == f);
                REQUIRE(cat.compose(cat.identity(Y), f) == f);
            }
        }
    Hf two = von_neumann_code(2);
    CHECK_FALSE(cat.is_function(Hf(), two, two));
    CHECK_THROWS_AS(cat.to_finset(Hf(), two, two), MatError);
}

TEST_CASE("round trip through the HF category") {
    auto rep = roundtrip_check(3);
    CHECK(rep.ok());
    CHECK(rep.checked > 0);
    for (const auto& x : hf_upto_tc(4)) REQUIRE(code(embed(x)) == x);
}

TEST_CASE("expressions and JSON") {
    CHECK(braces(eval_expr("pair(empty, power(empty))")) == "{{},{{}}}");
    CHECK(code(eval_expr("power(vn(2))")).card() == 4);
    CHECK(braces(eval_expr("union({{{}},{{{}}}})")) == braces(lit("{{},{{}}}")));
    CHECK(code(eval_expr("funcs(vn(2), vn(3))")).card() == 9);
    CHECK(braces(eval_expr("tc( {{{}}} )")) == "{{},{{}}}");
    CHECK_THROWS_AS(eval_expr("powerset(empty)"), ParseError);
    CHECK_THROWS_AS(eval_expr("pair(empty)"), ParseError);
    CHECK_THROWS_AS(eval_expr("{{}"), ParseError);

    Apg X = eval_expr("product(vn(2), vn(1))");
    std::string js = apg_json(X);
    Apg back = apg_from_json(js);
    CHECK(apg_json(back) == js);
    CHECK(code(back) == code(X));
    CHECK(apg_json(empty()) == R"({"n":1,"edges":[],"root":0})");
    CHECK_THROWS_AS(apg_from_json("{\"n\":2,\"edges\":[],\"root\":0}"), MatError);
    CHECK_THROWS_AS(apg_from_json("[1]"), MatError);
    CHECK_THROWS_AS(apg_from_json("{\"n\":1,\"edges\":[[0,5]],\"root\":0}"), MatError);
}

TEST_CASE("interning is consistent across threads") {
    auto build = [] {
        std::vector<std::uint64_t> ids;
        for (const auto& x : hf_upto_tc(4)) ids.push_back(Hf::set({x, von_neumann_code(3)}).id());
        return ids;
    };
    std::vector<std::future<std::vector<std::uint64_t>>> runs;
    for (int t = 0; t < 4; ++t) runs.push_back(std::async(std::launch::async, build));
    auto first = runs[0].get();
    for (int t = 1; t < 4; ++t) CHECK(runs[t].get() == first);
}

#include "stacksem/matset.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cctype>
#include <functional>
#include <mutex>
#include "json.hpp"
#include <set>
#include <sstream>

namespace stacksem::mat {

// ------------------------------------------------------------------ graphs

Graph Graph::from_edges(int n, const std::vector<std::pair<int, int>>& child_parent) {
    if (n < 0) throw MatError("negative node count");
    Graph g;
    g.kids.resize(n);
    for (auto [c, p] : child_parent) {
        if (c < 0 || c >= n || p < 0 || p >= n)
            throw MatError("edge [" + std::to_string(c) + ", " + std::to_string(p) + "] out of range");
        g.kids[p].push_back(c);
    }
    for (auto& k : g.kids) {
        std::sort(k.begin(), k.end());
        k.erase(std::unique(k.begin(), k.end()), k.end());
    }
    return g;
}

std::vector<std::pair<int, int>> Graph::edges() const {
    std::vector<std::pair<int, int>> out;
    for (int p = 0; p < size(); ++p)
        for (int c : kids[p]) out.emplace_back(c, p);
    std::sort(out.begin(), out.end());
    return out;
}

bool Graph::has_edge(int child, int parent) const {
    return std::binary_search(kids[parent].begin(), kids[parent].end(), child);
}

namespace {

// nodes with a path to x, including x
std::vector<char> below(const Graph& g, int x) {
    std::vector<char> seen(g.size(), 0);
    std::vector<int> stack{x};
    seen[x] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int c : g.kids[v])
            if (!seen[c]) {
                seen[c] = 1;
                stack.push_back(c);
            }
    }
    return seen;
}

}  // namespace

bool is_accessible(const Graph& g, int root) {
    if (root < 0 || root >= g.size()) return false;
    auto seen = below(g, root);
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

Apg make_apg(Graph g, int root) {
    if (root < 0 || root >= g.size()) throw MatError("root out of range");
    if (!is_accessible(g, root)) throw MatError("graph is not accessible from its root");
    return Apg{std::move(g), root};
}

bool is_acyclic(const Graph& g) {
    std::vector<int> color(g.size(), 0);
    std::function<bool(int)> visit = [&](int v) {
        color[v] = 1;
        for (int c : g.kids[v]) {
            if (color[c] == 1) return false;
            if (color[c] == 0 && !visit(c)) return false;
        }
        color[v] = 2;
        return true;
    };
    for (int v = 0; v < g.size(); ++v)
        if (color[v] == 0 && !visit(v)) return false;
    return true;
}

bool is_wellfounded(const Graph& g) {
    std::vector<char> in(g.size(), 0);
    bool grew = true;
    while (grew) {
        grew = false;
        for (int v = 0; v < g.size(); ++v) {
            if (in[v]) continue;
            if (std::all_of(g.kids[v].begin(), g.kids[v].end(), [&](int c) { return in[c] != 0; })) {
                in[v] = 1;
                grew = true;
            }
        }
    }
    bool wf = std::all_of(in.begin(), in.end(), [](char c) { return c != 0; });
    if (wf != is_acyclic(g)) throw std::logic_error("inductive closure and acyclicity disagree");
    return wf;
}

bool is_extensional(const Graph& g) {
    std::set<std::vector<int>> seen;
    for (const auto& k : g.kids)
        if (!seen.insert(k).second) return false;
    return true;
}

namespace {

// coarsest stable partition: block ids numbered by first occurrence
std::vector<int> refine(const Graph& g) {
    const int n = g.size();
    std::vector<int> block(n, 0);
    int count = n > 0 ? 1 : 0;
    while (true) {
        std::map<std::pair<int, std::vector<int>>, int> ids;
        std::vector<int> next(n);
        for (int v = 0; v < n; ++v) {
            std::vector<int> sig;
            for (int c : g.kids[v]) sig.push_back(block[c]);
            std::sort(sig.begin(), sig.end());
            sig.erase(std::unique(sig.begin(), sig.end()), sig.end());
            auto [it, fresh] = ids.emplace(std::make_pair(block[v], std::move(sig)), static_cast<int>(ids.size()));
            next[v] = it->second;
        }
        block = std::move(next);
        if (static_cast<int>(ids.size()) == count) break;
        count = static_cast<int>(ids.size());
    }
    // renumber by first occurrence
    std::vector<int> rename(count, -1);
    int k = 0;
    for (int v = 0; v < n; ++v)
        if (rename[block[v]] < 0) rename[block[v]] = k++;
    for (int& b : block) b = rename[b];
    return block;
}

Graph disjoint_union(const Graph& X, const Graph& Y) {
    Graph u = X;
    for (const auto& k : Y.kids) {
        std::vector<int> shifted;
        for (int c : k) shifted.push_back(c + X.size());
        u.kids.push_back(std::move(shifted));
    }
    return u;
}

Quotient quotient_by(const Apg& X, const std::vector<int>& block) {
    int nb = block.empty() ? 0 : *std::max_element(block.begin(), block.end()) + 1;
    std::vector<std::pair<int, int>> edges;
    for (int p = 0; p < X.size(); ++p)
        for (int c : X.graph.kids[p]) edges.emplace_back(block[c], block[p]);
    Quotient q{make_apg(Graph::from_edges(nb, edges), block[X.root]), block};
    return q;
}

}  // namespace

Relation largest_bisimulation(const Graph& X, const Graph& Y) {
    auto block = refine(disjoint_union(X, Y));
    Relation R(X.size(), std::vector<char>(Y.size(), 0));
    for (int x = 0; x < X.size(); ++x)
        for (int y = 0; y < Y.size(); ++y) R[x][y] = block[x] == block[X.size() + y];
    return R;
}

bool is_bisimulation(const Graph& X, const Graph& Y, const Relation& R) {
    for (int x = 0; x < X.size(); ++x)
        for (int y = 0; y < Y.size(); ++y) {
            if (!R[x][y]) continue;
            for (int xc : X.kids[x])
                if (std::none_of(Y.kids[y].begin(), Y.kids[y].end(), [&](int yc) { return R[xc][yc] != 0; }))
                    return false;
            for (int yc : Y.kids[y])
                if (std::none_of(X.kids[x].begin(), X.kids[x].end(), [&](int xc) { return R[xc][yc] != 0; }))
                    return false;
        }
    return true;
}

bool is_simulation(const Graph& X, const Graph& Y, const std::vector<int>& f) {
    if (static_cast<int>(f.size()) != X.size()) return false;
    for (int x = 0; x < X.size(); ++x) {
        for (int c : X.kids[x])
            if (!Y.has_edge(f[c], f[x])) return false;
        for (int yc : Y.kids[f[x]])
            if (std::none_of(X.kids[x].begin(), X.kids[x].end(), [&](int c) { return f[c] == yc; })) return false;
    }
    return true;
}

Quotient extensional_quotient(const Apg& X) {
    if (!is_wellfounded(X.graph)) throw MatError("graph is not well-founded");
    Quotient q = quotient_by(X, refine(X.graph));
    if (!is_simulation(X.graph, q.apg.graph, q.map)) throw std::logic_error("quotient map is not a simulation");
    return q;
}

Apg slash(const Apg& X, int x, std::vector<int>* old) {
    if (x < 0 || x >= X.size()) throw MatError("node out of range");
    auto keep = below(X.graph, x);
    std::vector<int> index(X.size(), -1), back;
    for (int v = 0; v < X.size(); ++v)
        if (keep[v]) {
            index[v] = static_cast<int>(back.size());
            back.push_back(v);
        }
    Graph g;
    g.kids.resize(back.size());
    for (size_t i = 0; i < back.size(); ++i)
        for (int c : X.graph.kids[back[i]]) g.kids[i].push_back(index[c]);
    if (old) *old = back;
    return Apg{std::move(g), index[x]};
}

std::vector<int> slashslash(const Apg& X, int x) {
    if (x < 0 || x >= X.size()) throw MatError("node out of range");
    auto keep = below(X.graph, x);
    // x itself is dropped unless it lies on a cycle through itself
    bool cyclic = false;
    for (int v = 0; v < X.size(); ++v)
        if (keep[v] && X.graph.has_edge(x, v)) cyclic = true;
    std::vector<int> out;
    for (int v = 0; v < X.size(); ++v)
        if (keep[v] && (v != x || cyclic)) out.push_back(v);
    return out;
}

std::optional<std::vector<int>> find_isomorphism(const Apg& X, const Apg& Y) {
    const int n = X.size();
    if (n != Y.size() || X.graph.edges().size() != Y.graph.edges().size()) return std::nullopt;
    std::vector<int> xin(n, 0), yin(n, 0);
    for (auto [c, p] : X.graph.edges()) xin[c]++;
    for (auto [c, p] : Y.graph.edges()) yin[c]++;
    std::vector<int> f(n, -1);
    std::vector<char> used(n, 0);
    // assign nodes in breadth-first order from the root
    std::vector<int> order{X.root};
    std::vector<char> queued(n, 0);
    queued[X.root] = 1;
    for (size_t i = 0; i < order.size(); ++i)
        for (int c : X.graph.kids[order[i]])
            if (!queued[c]) {
                queued[c] = 1;
                order.push_back(c);
            }
    for (int v = 0; v < n; ++v)
        if (!queued[v]) order.push_back(v);
    std::function<bool(size_t)> go = [&](size_t i) {
        if (i == order.size()) return true;
        int x = order[i];
        for (int y = 0; y < n; ++y) {
            if (used[y] || xin[x] != yin[y] || X.graph.kids[x].size() != Y.graph.kids[y].size()) continue;
            if ((x == X.root) != (y == Y.root)) continue;
            bool ok = true;
            for (size_t j = 0; j < i && ok; ++j) {
                int u = order[j];
                if (X.graph.has_edge(u, x) != Y.graph.has_edge(f[u], y)) ok = false;
                if (X.graph.has_edge(x, u) != Y.graph.has_edge(y, f[u])) ok = false;
            }
            if (X.graph.has_edge(x, x) != Y.graph.has_edge(y, y)) ok = false;
            if (!ok) continue;
            f[x] = y;
            used[y] = 1;
            if (go(i + 1)) return true;
            used[y] = 0;
            f[x] = -1;
        }
        return false;
    };
    if (!go(0)) return std::nullopt;
    return f;
}

Quotient staged_quotient(const Apg& X, int n) {
    if (!is_wellfounded(X.graph)) throw MatError("graph is not well-founded");
    Quotient acc{X, {}};
    for (int v = 0; v < X.size(); ++v) acc.map.push_back(v);
    for (int round = 0; round < n; ++round) {
        const Apg& cur = acc.apg;
        const int m = cur.size();
        std::vector<Apg> parts;
        for (int v = 0; v < m; ++v) parts.push_back(slash(cur, v));
        std::vector<int> block(m, -1);
        int nb = 0;
        for (int v = 0; v < m; ++v) {
            if (block[v] >= 0) continue;
            block[v] = nb;
            for (int w = v + 1; w < m; ++w)
                if (block[w] < 0 && find_isomorphism(parts[v], parts[w])) block[w] = nb;
            ++nb;
        }
        Quotient q = quotient_by(cur, block);
        for (int& t : acc.map) t = q.map[t];
        acc.apg = std::move(q.apg);
    }
    return acc;
}

bool staged_hypothesis(const Apg& X, int n) {
    std::vector<char> level(X.size(), 0);
    level[X.root] = 1;
    for (int k = 0; k < n; ++k) {
        std::vector<char> next(X.size(), 0);
        for (int v = 0; v < X.size(); ++v)
            if (level[v])
                for (int c : X.graph.kids[v]) next[c] = 1;
        level = std::move(next);
    }
    for (int v = 0; v < X.size(); ++v)
        if (level[v] && !is_extensional(slash(X, v).graph)) return false;
    return true;
}

// ------------------------------------------------------------------- codes

namespace {

struct Store {
    std::mutex mu;
    std::map<std::vector<std::uint64_t>, std::shared_ptr<const void>> table;
    std::uint64_t next = 1;
};

Store& store() {
    static Store s;
    return s;
}

}  // namespace

Hf::Hf() {
    static const std::shared_ptr<const Node> empty_node = std::make_shared<Node>(Node{0, {}});
    node_ = empty_node;
}

bool operator<(const Hf& a, const Hf& b) {
    if (a == b) return false;
    const auto& am = a.members();
    const auto& bm = b.members();
    auto i = am.rbegin();
    auto j = bm.rbegin();
    for (; i != am.rend() && j != bm.rend(); ++i, ++j)
        if (*i != *j) return *i < *j;
    return i == am.rend();
}

Hf Hf::set(std::vector<Hf> members) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.empty()) return Hf();
    std::vector<std::uint64_t> key;
    for (const auto& m : members) key.push_back(m.id());
    Store& s = store();
    std::lock_guard<std::mutex> lock(s.mu);
    auto it = s.table.find(key);
    if (it != s.table.end()) return Hf(std::static_pointer_cast<const Node>(it->second));
    auto node = std::make_shared<const Node>(Node{s.next++, std::move(members)});
    s.table.emplace(std::move(key), node);
    return Hf(node);
}

bool Hf::contains(const Hf& x) const {
    const auto& m = members();
    return std::binary_search(m.begin(), m.end(), x);
}

std::string Hf::str() const {
    std::string out = "{";
    for (size_t i = 0; i < members().size(); ++i) {
        if (i) out += ",";
        out += members()[i].str();
    }
    return out + "}";
}

namespace {

boost::multiprecision::cpp_int ackermann_value(const Hf& x) {
    boost::multiprecision::cpp_int v = 0;
    for (const auto& m : x.members()) {
        auto e = ackermann_value(m);
        if (e > 1 << 20) throw MatError("Ackermann code too large to print");
        boost::multiprecision::cpp_int one = 1;
        v += one << static_cast<unsigned>(e);
    }
    return v;
}

}  // namespace

std::string Hf::ackermann() const { return ackermann_value(*this).str(); }

Hf parse_hf(const std::string& text) {
    size_t i = 0;
    auto skip = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    std::function<Hf()> one = [&]() -> Hf {
        skip();
        if (i >= text.size() || text[i] != '{') throw MatError("expected '{' at " + std::to_string(i));
        ++i;
        std::vector<Hf> ms;
        skip();
        if (i < text.size() && text[i] == '}') {
            ++i;
            return Hf();
        }
        while (true) {
            ms.push_back(one());
            skip();
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            if (i < text.size() && text[i] == '}') {
                ++i;
                return Hf::set(std::move(ms));
            }
            throw MatError("expected ',' or '}' at " + std::to_string(i));
        }
    };
    Hf r = one();
    skip();
    if (i != text.size()) throw MatError("trailing input at " + std::to_string(i));
    return r;
}

int rank(const Hf& x) {
    int r = 0;
    for (const auto& m : x.members()) r = std::max(r, rank(m) + 1);
    return r;
}

std::vector<Hf> transitive_closure(const Hf& x) {
    std::set<Hf> seen;
    std::vector<Hf> stack(x.members().begin(), x.members().end());
    while (!stack.empty()) {
        Hf v = stack.back();
        stack.pop_back();
        if (!seen.insert(v).second) continue;
        for (const auto& m : v.members()) stack.push_back(m);
    }
    return {seen.begin(), seen.end()};
}

int tc_size(const Hf& x) { return static_cast<int>(transitive_closure(x).size()); }

Hf von_neumann_code(int n) {
    std::vector<Hf> ms;
    for (int k = 0; k < n; ++k) ms.push_back(Hf::set(ms));
    return Hf::set(ms);
}

Hf kuratowski(const Hf& a, const Hf& b) { return Hf::set({Hf::set({a}), Hf::set({a, b})}); }

std::vector<Hf> hf_upto_rank(int r) {
    std::vector<Hf> level;
    for (int k = 0; k < r; ++k) {
        if (level.size() > 20) throw MatError("rank budget too large to enumerate");
        std::vector<Hf> next;
        const size_t n = level.size();
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
            std::vector<Hf> ms;
            for (size_t i = 0; i < n; ++i)
                if (mask >> i & 1) ms.push_back(level[i]);
            next.push_back(Hf::set(std::move(ms)));
        }
        std::sort(next.begin(), next.end());
        level = std::move(next);
    }
    return level;
}

std::vector<Hf> hf_upto_tc(int b) {
    if (b < 0) return {};
    if (b == 0) return {Hf()};
    auto cands = hf_upto_tc(b - 1);
    std::vector<std::vector<std::uint64_t>> closure;  // TC({c}) ids, sorted
    for (const auto& c : cands) {
        std::vector<std::uint64_t> ids;
        for (const auto& t : transitive_closure(c)) ids.push_back(t.id());
        ids.push_back(c.id());
        std::sort(ids.begin(), ids.end());
        closure.push_back(std::move(ids));
    }
    std::vector<Hf> out;
    std::vector<Hf> chosen;
    std::function<void(size_t, const std::vector<std::uint64_t>&)> go = [&](size_t i,
                                                                            const std::vector<std::uint64_t>& acc) {
        if (i == cands.size()) {
            out.push_back(Hf::set(chosen));
            return;
        }
        go(i + 1, acc);
        std::vector<std::uint64_t> merged;
        std::set_union(acc.begin(), acc.end(), closure[i].begin(), closure[i].end(), std::back_inserter(merged));
        if (static_cast<int>(merged.size()) > b) return;
        chosen.push_back(cands[i]);
        go(i + 1, merged);
        chosen.pop_back();
    };
    go(0, {});
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Hf code(const Apg& X) {
    if (!is_wellfounded(X.graph)) throw MatError("graph is not well-founded (cycle detected)");
    if (!is_extensional(X.graph)) return code(extensional_quotient(X).apg);
    std::vector<std::optional<Hf>> memo(X.size());
    std::function<Hf(int)> go = [&](int v) -> Hf {
        if (memo[v]) return *memo[v];
        std::vector<Hf> ms;
        for (int c : X.graph.kids[v]) ms.push_back(go(c));
        memo[v] = Hf::set(std::move(ms));
        return *memo[v];
    };
    return go(X.root);
}

Apg decode(const Hf& c) {
    auto nodes = transitive_closure(c);
    nodes.push_back(c);
    std::map<Hf, int> index;
    for (size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = static_cast<int>(i);
    Graph g;
    g.kids.resize(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i)
        for (const auto& m : nodes[i].members()) g.kids[i].push_back(index.at(m));
    for (auto& k : g.kids) std::sort(k.begin(), k.end());
    return Apg{std::move(g), static_cast<int>(nodes.size()) - 1};
}

bool apg_eq(const Apg& X, const Apg& Y) { return code(X) == code(Y); }

bool apg_mem(const Apg& X, const Apg& Y) { return code(Y).contains(code(X)); }

namespace {

bool bi_entire_between(const Apg& X, int x, const Apg& Y, int y, const Relation& R) {
    if (!R[x][y]) return false;
    auto bx = below(X.graph, x);
    auto by = below(Y.graph, y);
    // restricted to X/x and Y/y the relation must be total on both sides
    for (int a = 0; a < X.size(); ++a) {
        if (!bx[a]) continue;
        bool hit = false;
        for (int b = 0; b < Y.size() && !hit; ++b) hit = by[b] && R[a][b];
        if (!hit) return false;
    }
    for (int b = 0; b < Y.size(); ++b) {
        if (!by[b]) continue;
        bool hit = false;
        for (int a = 0; a < X.size() && !hit; ++a) hit = bx[a] && R[a][b];
        if (!hit) return false;
    }
    return true;
}

void require_wf_ext(const Apg& X) {
    if (!is_wellfounded(X.graph) || !is_extensional(X.graph))
        throw MatError("expected a well-founded extensional graph");
}

}  // namespace

bool apg_eq_bisim(const Apg& X, const Apg& Y) {
    require_wf_ext(X);
    require_wf_ext(Y);
    auto R = largest_bisimulation(X.graph, Y.graph);
    return bi_entire_between(X, X.root, Y, Y.root, R);
}

bool apg_mem_bisim(const Apg& X, const Apg& Y) {
    require_wf_ext(X);
    require_wf_ext(Y);
    auto R = largest_bisimulation(X.graph, Y.graph);
    for (int y : Y.members())
        if (bi_entire_between(X, X.root, Y, y, R)) return true;
    return false;
}

Hf mostowski(const Graph& G, int node) {
    if (node < 0 || node >= G.size()) throw MatError("node out of range");
    if (!is_wellfounded(G)) throw MatError("graph is not well-founded");
    if (!is_extensional(G)) throw MatError("graph is not extensional");
    return code(slash(Apg{G, node}, node));
}

// ----------------------------------------------------------- constructions

namespace {

struct Builder {
    std::vector<std::vector<int>> kids;

    int add() {
        kids.emplace_back();
        return static_cast<int>(kids.size()) - 1;
    }
    void edge(int child, int parent) { kids[parent].push_back(child); }

    /// Copy of the nodes selected by keep, with induced edges; returns old -> new (-1 elsewhere).
    std::vector<int> copy(const Apg& X, const std::vector<char>& keep) {
        std::vector<int> idx(X.size(), -1);
        for (int v = 0; v < X.size(); ++v)
            if (keep[v]) idx[v] = add();
        for (int v = 0; v < X.size(); ++v)
            if (keep[v])
                for (int c : X.graph.kids[v])
                    if (keep[c]) edge(idx[c], idx[v]);
        return idx;
    }
    std::vector<int> copy_all(const Apg& X) { return copy(X, std::vector<char>(X.size(), 1)); }
    /// X with the root removed.
    std::vector<int> copy_below_root(const Apg& X) {
        std::vector<char> keep(X.size(), 1);
        keep[X.root] = 0;
        return copy(X, keep);
    }

    /// Accessible part below root; `renumber` receives old -> new (-1 for dropped nodes).
    Apg finish(int root, std::vector<int>* renumber = nullptr) {
        Graph g;
        g.kids = std::move(kids);
        for (auto& k : g.kids) {
            std::sort(k.begin(), k.end());
            k.erase(std::unique(k.begin(), k.end()), k.end());
        }
        const int n = g.size();
        std::vector<int> old;
        Apg a = slash(Apg{std::move(g), root}, root, &old);
        if (renumber) {
            renumber->assign(n, -1);
            for (size_t i = 0; i < old.size(); ++i) (*renumber)[old[i]] = static_cast<int>(i);
        }
        return a;
    }
};

Apg quotient(const Apg& carrier) { return extensional_quotient(carrier).apg; }

Apg normal(const Apg& X) { return is_extensional(X.graph) && is_wellfounded(X.graph) ? X : quotient(X); }

}  // namespace

Apg pair_carrier(const Apg& X, const Apg& Y) {
    require_wf_ext(X);
    require_wf_ext(Y);
    Builder b;
    auto ix = b.copy_all(X);
    auto iy = b.copy_all(Y);
    int star = b.add();
    b.edge(ix[X.root], star);
    b.edge(iy[Y.root], star);
    return b.finish(star);
}

Apg union_carrier(const Apg& X) {
    require_wf_ext(X);
    std::vector<char> inner(X.size(), 0);  // ||X||
    for (int y : X.members())
        for (int x : X.graph.kids[y]) inner[x] = 1;
    std::vector<char> keep(X.size(), 0);
    for (int v = 0; v < X.size(); ++v)
        if (inner[v]) {
            auto bv = below(X.graph, v);
            for (int w = 0; w < X.size(); ++w)
                if (bv[w]) keep[w] = 1;
        }
    Builder b;
    auto idx = b.copy(X, keep);
    int star = b.add();
    for (int v = 0; v < X.size(); ++v)
        if (inner[v]) b.edge(idx[v], star);
    return b.finish(star);
}

Apg product_carrier(const Apg& X, const Apg& Y, std::map<std::pair<int, int>, int>* pairs) {
    require_wf_ext(X);
    require_wf_ext(Y);
    Builder b;
    auto ix = b.copy_below_root(X);
    auto iy = b.copy_below_root(Y);
    std::map<int, int> single;  // x -> x'
    for (int x : X.members()) {
        single[x] = b.add();
        b.edge(ix[x], single[x]);
    }
    std::map<std::pair<int, int>, int> unordered, kpair;
    for (int x : X.members())
        for (int y : Y.members()) {
            int u = b.add();
            b.edge(ix[x], u);
            b.edge(iy[y], u);
            unordered[{x, y}] = u;
        }
    for (int x : X.members())
        for (int y : Y.members()) {
            int k = b.add();
            b.edge(single[x], k);
            b.edge(unordered[{x, y}], k);
            kpair[{x, y}] = k;
        }
    int star = b.add();
    for (const auto& [xy, k] : kpair) b.edge(k, star);
    std::vector<int> renumber;
    Apg carrier = b.finish(star, &renumber);
    if (pairs) {
        pairs->clear();
        for (const auto& [xy, k] : kpair) (*pairs)[xy] = renumber[k];
    }
    return carrier;
}

Apg function_set_carrier(const Apg& X, const Apg& Y) {
    require_wf_ext(X);
    require_wf_ext(Y);
    std::map<std::pair<int, int>, int> pairs;
    Quotient Z = extensional_quotient(product_carrier(X, Y, &pairs));
    Builder b;
    auto iz = b.copy_below_root(Z.apg);
    const auto& xs = X.members();
    const auto& ys = Y.members();
    std::vector<int> fs;
    std::vector<int> table(xs.size(), 0);
    const bool any = xs.empty() || !ys.empty();
    while (any) {
        int f = b.add();
        for (size_t i = 0; i < xs.size(); ++i) b.edge(iz[Z.map[pairs.at({xs[i], ys[table[i]]})]], f);
        fs.push_back(f);
        size_t k = 0;
        while (k < table.size() && ++table[k] == static_cast<int>(ys.size())) table[k++] = 0;
        if (k == table.size()) break;
    }
    int star = b.add();
    for (int f : fs) b.edge(f, star);
    return b.finish(star);
}

Apg power_carrier(const Apg& X) {
    require_wf_ext(X);
    const auto& xs = X.members();
    if (xs.size() > 20) throw MatError("power set too large");
    Builder b;
    auto ix = b.copy_below_root(X);
    std::vector<int> subsets;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << xs.size()); ++mask) {
        int A = b.add();
        for (size_t i = 0; i < xs.size(); ++i)
            if (mask >> i & 1) b.edge(ix[xs[i]], A);
        subsets.push_back(A);
    }
    int star = b.add();
    for (int A : subsets) b.edge(A, star);
    return b.finish(star);
}

Apg tc_carrier(const Apg& X) {
    require_wf_ext(X);
    Builder b;
    auto ix = b.copy_below_root(X);
    int star = b.add();
    for (int v = 0; v < X.size(); ++v)
        if (ix[v] >= 0) b.edge(ix[v], star);
    return b.finish(star);
}

Apg empty() { return Apg{Graph{{{}}}, 0}; }

Apg pair(const Apg& X, const Apg& Y) { return quotient(pair_carrier(normal(X), normal(Y))); }
Apg union_of(const Apg& X) { return quotient(union_carrier(normal(X))); }
Apg product(const Apg& X, const Apg& Y) { return quotient(product_carrier(normal(X), normal(Y))); }
Apg function_set(const Apg& X, const Apg& Y) { return quotient(function_set_carrier(normal(X), normal(Y))); }
Apg power(const Apg& X) { return quotient(power_carrier(normal(X))); }
Apg transitive_closure(const Apg& X) { return quotient(tc_carrier(normal(X))); }

Apg von_neumann(int n) {
    if (n < 0) throw MatError("negative numeral");
    Builder b;
    for (int k = 0; k < n; ++k) b.add();
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < k; ++j) b.edge(j, k);
    int star = b.add();
    for (int k = 0; k < n; ++k) b.edge(k, star);
    return quotient(b.finish(star));
}

Apg choice_fn(const Apg& input) {
    Apg X = normal(input);
    Apg U = union_of(X);
    std::map<Hf, int> member_of_union;
    for (int u : U.members()) member_of_union[code(slash(U, u))] = u;
    std::map<std::pair<int, int>, int> pairs;
    Apg P = product_carrier(X, U, &pairs);
    std::vector<char> keep(P.size(), 0);
    for (int x : X.members()) {
        if (X.graph.kids[x].empty()) throw MatError("choice function needs inhabited members");
        std::optional<Hf> least;
        for (int c : X.graph.kids[x]) {
            Hf h = code(slash(X, c));
            if (!least || h < *least) least = h;
        }
        keep[pairs.at({x, member_of_union.at(*least)})] = 1;
    }
    return separate(P, keep);
}

Apg separate(const Apg& X, const std::vector<char>& keep_member) {
    std::vector<char> keep(X.size(), 0);
    keep[X.root] = 1;
    for (int m : X.members())
        if (keep_member.at(m)) {
            auto bm = below(X.graph, m);
            for (int v = 0; v < X.size(); ++v)
                if (bm[v]) keep[v] = 1;
        }
    Builder b;
    auto idx = b.copy(X, keep);
    // the root keeps only the selected members
    b.kids[idx[X.root]].clear();
    for (int m : X.members())
        if (keep_member.at(m)) b.edge(idx[m], idx[X.root]);
    return quotient(b.finish(idx[X.root]));
}

// -------------------------------------------------------------- formulas

namespace {

struct MTok {
    enum Kind { Ident, Sym, End } kind;
    std::string text;
    int pos;
};

std::vector<MTok> mlex(const std::string& s) {
    std::vector<MTok> out;
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        int pos = static_cast<int>(i);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '\''))
                ++j;
            out.push_back({MTok::Ident, s.substr(i, j - i), pos});
            i = j;
            continue;
        }
        for (const char* sym : {"<=>", "=>", "(", ")", ".", "=", ","}) {
            std::string t(sym);
            if (s.compare(i, t.size(), t) == 0) {
                out.push_back({MTok::Sym, t, pos});
                i += t.size();
                goto next;
            }
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos);
    next:;
    }
    out.push_back({MTok::End, "", static_cast<int>(s.size())});
    return out;
}

bool keyword(const std::string& s) {
    static const std::set<std::string> kw{"forall", "exists", "and", "or", "not", "true", "false", "in"};
    return kw.count(s) > 0;
}

class MParser {
public:
    explicit MParser(const std::string& s) : toks_(mlex(s)) {}

    MFormulaPtr parse() {
        auto f = iff();
        if (peek().kind != MTok::End) fail("unexpected '" + peek().text + "'");
        return f;
    }

private:
    std::vector<MTok> toks_;
    size_t i_ = 0;

    const MTok& peek() const { return toks_[i_]; }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().pos); }
    bool is(const std::string& t) const { return peek().text == t && peek().kind != MTok::End; }
    void expect(const std::string& t) {
        if (!is(t)) fail("expected '" + t + "'");
        ++i_;
    }
    std::string ident() {
        if (peek().kind != MTok::Ident || keyword(peek().text)) fail("expected a variable");
        return toks_[i_++].text;
    }
    static MFormulaPtr node(MKind k, int pos, MFormulaPtr a = nullptr, MFormulaPtr b = nullptr) {
        auto f = std::make_shared<MFormula>();
        f->kind = k;
        f->pos = pos;
        f->a = std::move(a);
        f->b = std::move(b);
        return f;
    }

    MFormulaPtr iff() {
        auto l = implies();
        if (is("<=>")) {
            int pos = peek().pos;
            ++i_;
            auto r = implies();
            return node(MKind::And, pos, node(MKind::Implies, pos, l, r), node(MKind::Implies, pos, r, l));
        }
        return l;
    }
    MFormulaPtr implies() {
        auto l = disj();
        if (is("=>")) {
            int pos = peek().pos;
            ++i_;
            return node(MKind::Implies, pos, l, implies());
        }
        return l;
    }
    MFormulaPtr disj() {
        auto l = conj();
        while (is("or")) {
            int pos = peek().pos;
            ++i_;
            l = node(MKind::Or, pos, l, conj());
        }
        return l;
    }
    MFormulaPtr conj() {
        auto l = unary();
        while (is("and")) {
            int pos = peek().pos;
            ++i_;
            l = node(MKind::And, pos, l, unary());
        }
        return l;
    }
    MFormulaPtr unary() {
        int pos = peek().pos;
        if (is("not")) {
            ++i_;
            return node(MKind::Not, pos, unary());
        }
        if (is("forall") || is("exists")) {
            bool all = is("forall");
            ++i_;
            std::vector<std::string> vars{ident()};
            while (is(",")) {
                ++i_;
                vars.push_back(ident());
            }
            std::string bound;
            if (is("in")) {
                ++i_;
                bound = ident();
            }
            expect(".");
            auto body = iff();
            for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
                MKind k = bound.empty() ? (all ? MKind::Forall : MKind::Exists)
                                        : (all ? MKind::ForallIn : MKind::ExistsIn);
                auto q = node(k, pos, body);
                std::const_pointer_cast<MFormula>(q)->x = *it;
                std::const_pointer_cast<MFormula>(q)->y = bound;
                body = q;
            }
            return body;
        }
        return atom();
    }
    MFormulaPtr atom() {
        int pos = peek().pos;
        if (is("true") || is("false")) {
            bool t = is("true");
            ++i_;
            return node(t ? MKind::True : MKind::False, pos);
        }
        if (is("(")) {
            ++i_;
            auto f = iff();
            expect(")");
            return f;
        }
        auto f = std::make_shared<MFormula>();
        f->pos = pos;
        f->x = ident();
        if (is("=")) {
            f->kind = MKind::Eq;
        } else if (is("in")) {
            f->kind = MKind::Mem;
        } else {
            fail("expected '=' or 'in'");
        }
        ++i_;
        f->y = ident();
        return f;
    }
};

int mprec(const MFormula& f) {
    switch (f.kind) {
        case MKind::Implies: return 1;
        case MKind::Or: return 2;
        case MKind::And: return 3;
        default: return 4;
    }
}

bool is_quant(MKind k) {
    return k == MKind::ExistsIn || k == MKind::ForallIn || k == MKind::Exists || k == MKind::Forall;
}

void mprint(std::ostream& os, const MFormula& f, int min_prec, bool tail) {
    bool paren = mprec(f) < min_prec || ((is_quant(f.kind)) && !tail);
    if (paren) {
        os << '(';
        tail = true;
    }
    switch (f.kind) {
        case MKind::True: os << "true"; break;
        case MKind::False: os << "false"; break;
        case MKind::Eq: os << f.x << " = " << f.y; break;
        case MKind::Mem: os << f.x << " in " << f.y; break;
        case MKind::And:
            mprint(os, *f.a, 3, false);
            os << " and ";
            mprint(os, *f.b, 4, tail);
            break;
        case MKind::Or:
            mprint(os, *f.a, 2, false);
            os << " or ";
            mprint(os, *f.b, 3, tail);
            break;
        case MKind::Implies:
            mprint(os, *f.a, 2, false);
            os << " => ";
            mprint(os, *f.b, 1, tail);
            break;
        case MKind::Not:
            os << "not ";
            mprint(os, *f.a, 4, tail);
            break;
        default:
            os << (f.kind == MKind::ForallIn || f.kind == MKind::Forall ? "forall " : "exists ") << f.x;
            if (!f.y.empty()) os << " in " << f.y;
            os << ". ";
            mprint(os, *f.a, 0, true);
    }
    if (paren) os << ')';
}

void collect_free(const MFormula& f, std::set<std::string>& bound, std::set<std::string>& out) {
    auto use = [&](const std::string& v) {
        if (!v.empty() && !bound.count(v)) out.insert(v);
    };
    switch (f.kind) {
        case MKind::Eq:
        case MKind::Mem:
            use(f.x);
            use(f.y);
            return;
        case MKind::True:
        case MKind::False: return;
        case MKind::And:
        case MKind::Or:
        case MKind::Implies:
            collect_free(*f.a, bound, out);
            collect_free(*f.b, bound, out);
            return;
        case MKind::Not: collect_free(*f.a, bound, out); return;
        default: {
            use(f.y);
            bool fresh = bound.insert(f.x).second;
            collect_free(*f.a, bound, out);
            if (fresh) bound.erase(f.x);
        }
    }
}

}  // namespace

MFormulaPtr parse_material(const std::string& text) { return MParser(text).parse(); }

std::string print(const MFormulaPtr& f) {
    std::ostringstream os;
    mprint(os, *f, 0, true);
    return os.str();
}

bool is_delta0(const MFormulaPtr& f) {
    switch (f->kind) {
        case MKind::Exists:
        case MKind::Forall: return false;
        case MKind::And:
        case MKind::Or:
        case MKind::Implies: return is_delta0(f->a) && is_delta0(f->b);
        case MKind::Not:
        case MKind::ExistsIn:
        case MKind::ForallIn: return is_delta0(f->a);
        default: return true;
    }
}

std::vector<std::string> free_vars(const MFormulaPtr& f) {
    std::set<std::string> bound, out;
    collect_free(*f, bound, out);
    return {out.begin(), out.end()};
}

namespace {

struct Val {
    bool value;
    bool exact;
    EvidencePtr ev;
};

EvidencePtr mev(const std::string& rule, const Val& v, std::string note = {}, std::vector<EvidencePtr> kids = {}) {
    auto e = std::make_shared<Evidence>();
    e->rule = rule;
    e->polarity = v.value ? Polarity::Forced : Polarity::Refuted;
    e->exactness = v.exact ? Exactness::Exact : Exactness::AtBudget;
    e->note = std::move(note);
    e->children = std::move(kids);
    return e;
}

Val finish(const std::string& rule, bool value, bool exact, std::string note = {}, std::vector<EvidencePtr> kids = {}) {
    Val v{value, exact, nullptr};
    v.ev = mev(rule, v, std::move(note), std::move(kids));
    return v;
}

Val connective(MKind k, const Val& a, const std::function<Val()>& rhs) {
    switch (k) {
        case MKind::And: {
            if (!a.value && a.exact) return finish("and", false, true, "left", {a.ev, nullptr});
            Val b = rhs();
            if (!b.value && b.exact) return finish("and", false, true, "right", {nullptr, b.ev});
            return finish("and", a.value && b.value, a.exact && b.exact, "", {a.ev, b.ev});
        }
        case MKind::Or: {
            if (a.value && a.exact) return finish("or", true, true, "left", {a.ev, nullptr});
            Val b = rhs();
            if (b.value && b.exact) return finish("or", true, true, "right", {nullptr, b.ev});
            return finish("or", a.value || b.value, a.exact && b.exact, "", {a.ev, b.ev});
        }
        default: {
            if (!a.value && a.exact) return finish("implies", true, true, "premise refuted", {a.ev, nullptr});
            Val b = rhs();
            if (b.value && b.exact) return finish("implies", true, true, "conclusion holds", {nullptr, b.ev});
            if (a.value && a.exact && !b.value && b.exact)
                return finish("implies", false, true, "counterexample", {a.ev, b.ev});
            return finish("implies", !a.value || b.value, false, "", {a.ev, b.ev});
        }
    }
}

/// Quantifier over a list of candidates; universal or existential, exact ranges or budgeted.
template <class Item, class Body, class Name>
Val quantify(const std::string& rule, bool universal, bool exact_range, const std::vector<Item>& items, Body&& body,
             Name&& name) {
    bool all_exact = true;
    std::optional<Val> weak;
    for (const auto& it : items) {
        Val v = body(it);
        if (universal && !v.value && v.exact) return finish(rule, false, true, "counterexample " + name(it), {v.ev});
        if (!universal && v.value && v.exact) return finish(rule, true, true, "witness " + name(it), {v.ev});
        if (universal != v.value && !weak) weak = v;
        all_exact = all_exact && v.exact;
    }
    if (weak)
        return finish(rule, !universal, false, std::string(universal ? "counterexample" : "witness") + " at budget",
                      {weak->ev});
    return finish(rule, universal, all_exact && exact_range, std::to_string(items.size()) + " candidates");
}

class DirectEval {
public:
    explicit DirectEval(int budget) : budget_(budget) {}

    Val eval(const MFormula& f, std::map<std::string, Hf>& env) {
        switch (f.kind) {
            case MKind::True: return finish("true", true, true);
            case MKind::False: return finish("false", false, true);
            case MKind::Eq: return finish("atom", env.at(f.x) == env.at(f.y), true, f.x + " = " + f.y);
            case MKind::Mem: return finish("atom", env.at(f.y).contains(env.at(f.x)), true, f.x + " in " + f.y);
            case MKind::And:
            case MKind::Or:
            case MKind::Implies: {
                Val a = eval(*f.a, env);
                return connective(f.kind, a, [&] { return eval(*f.b, env); });
            }
            case MKind::Not: {
                Val a = eval(*f.a, env);
                return finish("not", !a.value, a.exact, "", {a.ev});
            }
            default: break;
        }
        const bool universal = f.kind == MKind::ForallIn || f.kind == MKind::Forall;
        const bool bounded = f.kind == MKind::ForallIn || f.kind == MKind::ExistsIn;
        const std::vector<Hf>& items = bounded ? env.at(f.y).members() : universe();
        std::optional<Hf> saved;
        if (auto it = env.find(f.x); it != env.end()) saved = it->second;
        auto body = [&](const Hf& h) {
            env[f.x] = h;
            return eval(*f.a, env);
        };
        Val v = quantify(bounded ? "bounded" : "unbounded", universal, bounded, items, body,
                         [&](const Hf& h) { return f.x + " = " + h.str(); });
        if (saved)
            env[f.x] = *saved;
        else
            env.erase(f.x);
        return v;
    }

private:
    int budget_;
    std::optional<std::vector<Hf>> universe_;

    const std::vector<Hf>& universe() {
        if (!universe_) universe_ = hf_upto_tc(budget_);
        return *universe_;
    }
};

class AmalgamEval {
public:
    AmalgamEval(const std::vector<std::string>& params, const std::map<std::string, Hf>& env) {
        Builder b;
        std::vector<int> roots;
        for (const auto& p : params) {
            Apg A = decode(env.at(p));
            auto idx = b.copy_all(A);
            roots.push_back(idx[A.root]);
        }
        int star = b.add();
        for (int r : roots) b.edge(r, star);
        Quotient q = extensional_quotient(b.finish(star));
        T_ = q.apg.graph;
        for (size_t i = 0; i < params.size(); ++i) nodes_[params[i]] = q.map[roots[i]];
    }

    Val eval(const MFormula& f) {
        switch (f.kind) {
            case MKind::True: return finish("true", true, true);
            case MKind::False: return finish("false", false, true);
            case MKind::Eq: return finish("atom", nodes_.at(f.x) == nodes_.at(f.y), true, f.x + " = " + f.y);
            case MKind::Mem: return finish("atom", T_.has_edge(nodes_.at(f.x), nodes_.at(f.y)), true, f.x + " in " + f.y);
            case MKind::And:
            case MKind::Or:
            case MKind::Implies: {
                Val a = eval(*f.a);
                return connective(f.kind, a, [&] { return eval(*f.b); });
            }
            case MKind::Not: {
                Val a = eval(*f.a);
                return finish("not", !a.value, a.exact, "", {a.ev});
            }
            case MKind::ExistsIn:
            case MKind::ForallIn: {
                // x ranges over all nodes of T below y
                std::vector<int> items;
                for (int t = 0; t < T_.size(); ++t)
                    if (T_.has_edge(t, nodes_.at(f.y))) items.push_back(t);
                std::optional<int> saved;
                if (auto it = nodes_.find(f.x); it != nodes_.end()) saved = it->second;
                auto body = [&](int t) {
                    nodes_[f.x] = t;
                    return eval(*f.a);
                };
                Val v = quantify("bounded", f.kind == MKind::ForallIn, true, items, body,
                                 [&](int t) { return f.x + " = node " + std::to_string(t); });
                if (saved)
                    nodes_[f.x] = *saved;
                else
                    nodes_.erase(f.x);
                return v;
            }
            default: throw std::logic_error("unbounded quantifier in the amalgam route");
        }
    }

private:
    Graph T_;
    std::map<std::string, int> nodes_;
};

}  // namespace

Verdict eval_material(const MFormulaPtr& f, const std::map<std::string, Hf>& env, int tc_budget, Route route) {
    if (tc_budget < 1) throw std::invalid_argument("budget must be at least 1");
    auto fv = free_vars(f);
    for (const auto& v : fv)
        if (!env.count(v)) throw MatError("unbound variable '" + v + "'");
    Val v;
    if (route == Route::Amalgam && is_delta0(f)) {
        v = AmalgamEval(fv, env).eval(*f);
    } else {
        auto scope = env;
        v = DirectEval(tc_budget).eval(*f, scope);
    }
    return Verdict{v.value ? Polarity::Forced : Polarity::Refuted, v.exact ? Exactness::Exact : Exactness::AtBudget,
                   v.ev};
}

// ------------------------------------------------------------------ HF category

HfCategory::HfCategory() : finset_(Topos::finset()) {}

HfCategory hf_category() { return HfCategory(); }

std::vector<Hf> HfCategory::hom(const Hf& X, const Hf& Y) const {
    const auto& xs = X.members();
    const auto& ys = Y.members();
    std::vector<Hf> out;
    if (!xs.empty() && ys.empty()) return out;
    std::vector<size_t> t(xs.size(), 0);
    while (true) {
        std::vector<Hf> ps;
        for (size_t i = 0; i < xs.size(); ++i) ps.push_back(kuratowski(xs[i], ys[t[i]]));
        out.push_back(Hf::set(std::move(ps)));
        size_t k = 0;
        while (k < t.size() && ++t[k] == ys.size()) t[k++] = 0;
        if (k == t.size()) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::optional<std::pair<Hf, Hf>> unpair(const Hf& q) {
    const auto& ms = q.members();
    if (ms.size() == 1 && ms[0].card() == 1) return std::make_pair(ms[0].members()[0], ms[0].members()[0]);
    if (ms.size() != 2) return std::nullopt;
    const Hf* single = nullptr;
    const Hf* both = nullptr;
    for (const auto& m : ms) {
        if (m.card() == 1)
            single = &m;
        else if (m.card() == 2)
            both = &m;
    }
    if (!single || !both) return std::nullopt;
    const Hf& a = single->members()[0];
    if (!both->contains(a)) return std::nullopt;
    const Hf& b = both->members()[0] == a ? both->members()[1] : both->members()[0];
    return std::make_pair(a, b);
}

}  // namespace

bool HfCategory::is_function(const Hf& f, const Hf& X, const Hf& Y) const {
    std::set<Hf> dom;
    for (const auto& q : f.members()) {
        auto p = unpair(q);
        if (!p || !X.contains(p->first) || !Y.contains(p->second)) return false;
        if (!dom.insert(p->first).second) return false;
    }
    return static_cast<int>(dom.size()) == X.card();
}

Hf HfCategory::apply(const Hf& f, const Hf& x) const {
    for (const auto& q : f.members()) {
        auto p = unpair(q);
        if (p && p->first == x) return p->second;
    }
    throw MatError("argument outside the domain");
}

Hf HfCategory::compose(const Hf& g, const Hf& f) const {
    std::vector<Hf> ps;
    for (const auto& q : f.members()) {
        auto p = unpair(q);
        if (!p) throw MatError("not a function");
        ps.push_back(kuratowski(p->first, apply(g, p->second)));
    }
    return Hf::set(std::move(ps));
}

Hf HfCategory::identity(const Hf& X) const {
    std::vector<Hf> ps;
    for (const auto& x : X.members()) ps.push_back(kuratowski(x, x));
    return Hf::set(std::move(ps));
}

Obj HfCategory::to_finset(const Hf& X) const {
    std::vector<int> id(X.card());
    for (int i = 0; i < X.card(); ++i) id[i] = i;
    return Obj({X.card()}, {id});
}

Mor HfCategory::to_finset(const Hf& f, const Hf& X, const Hf& Y) const {
    if (!is_function(f, X, Y)) throw MatError("not a function between the given sets");
    std::vector<int> table;
    for (const auto& x : X.members()) {
        Hf y = apply(f, x);
        table.push_back(static_cast<int>(std::lower_bound(Y.members().begin(), Y.members().end(), y) -
                                         Y.members().begin()));
    }
    return Mor{to_finset(X), to_finset(Y), {table}};
}

Apg embed(const Hf& x) {
    // carrier TC(x) as a set, membership as a material relation on it
    Hf carrier = Hf::set(transitive_closure(x));
    std::vector<Hf> rel;
    for (const auto& b : carrier.members())
        for (const auto& a : b.members()) rel.push_back(kuratowski(a, b));
    Hf E = Hf::set(std::move(rel));
    const auto& nodes = carrier.members();
    const int n = static_cast<int>(nodes.size());
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (E.contains(kuratowski(nodes[i], nodes[j]))) edges.emplace_back(i, j);
    for (int i = 0; i < n; ++i)
        if (x.contains(nodes[i])) edges.emplace_back(i, n);
    return make_apg(Graph::from_edges(n + 1, edges), n);
}

RoundtripReport roundtrip_check(int bound) {
    RoundtripReport rep;
    rep.bound = bound;
    auto all = hf_upto_tc(bound);
    std::vector<Apg> embedded;
    for (const auto& x : all) {
        Apg Y = embed(x);
        ++rep.checked;
        if (!is_wellfounded(Y.graph) || !is_extensional(Y.graph))
            rep.failures.push_back(x.str() + ": embedding is not well-founded and extensional");
        else if (code(Y) != x)
            rep.failures.push_back(x.str() + ": comes back as " + code(Y).str());
        embedded.push_back(std::move(Y));
    }
    // membership and equality are preserved and reflected
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = 0; j < all.size(); ++j) {
            ++rep.checked;
            if (apg_mem_bisim(embedded[i], embedded[j]) != all[j].contains(all[i]))
                rep.failures.push_back(all[i].str() + " in " + all[j].str() + ": membership not preserved");
            if (apg_eq_bisim(embedded[i], embedded[j]) != (i == j))
                rep.failures.push_back(all[i].str() + " = " + all[j].str() + ": equality not preserved");
        }
    return rep;
}

// ----------------------------------------------------------------- suites

bool AxiomReport::ok() const {
    return std::all_of(results.begin(), results.end(), [](const AxiomResult& r) { return r.violations == 0; });
}

namespace {

class Axioms {
public:
    explicit Axioms(int rank_budget) : budget_(rank_budget), U_(hf_upto_rank(rank_budget)) {
        for (const auto& x : U_) apgs_.push_back(decode(x));
    }

    AxiomReport run() {
        AxiomReport rep;
        rep.rank_budget = budget_;
        rep.universe = static_cast<int>(U_.size());
        rep.results.push_back(extensionality());
        rep.results.push_back(empty_set());
        rep.results.push_back(pairing());
        rep.results.push_back(union_axiom());
        rep.results.push_back(separation());
        rep.results.push_back(exponentiation());
        rep.results.push_back(power_set());
        rep.results.push_back(foundation());
        rep.results.push_back(closures());
        rep.results.push_back(mostowski_principle());
        return rep;
    }

private:
    int budget_;
    std::vector<Hf> U_;
    std::vector<Apg> apgs_;
    std::map<std::string, MFormulaPtr> cache_;
    HfCategory cat_;

    const MFormulaPtr& formula(const std::string& text) {
        auto it = cache_.find(text);
        if (it == cache_.end()) it = cache_.emplace(text, parse_material(text)).first;
        return it->second;
    }

    bool holds(const std::string& text, const std::map<std::string, Hf>& env) {
        Verdict v = eval_material(formula(text), env, std::max(1, budget_));
        return v.forced_exact();
    }

    static void check(AxiomResult& r, bool ok, const std::string& what) {
        ++r.instances;
        if (ok) return;
        ++r.violations;
        if (r.details.size() < 5) r.details.push_back(what);
    }

    AxiomResult extensionality() {
        AxiomResult r{"extensionality", 0, 0, {}};
        for (size_t i = 0; i < U_.size(); ++i)
            for (size_t j = 0; j < U_.size(); ++j) {
                std::map<std::string, Hf> env{{"a", U_[i]}, {"b", U_[j]}};
                bool ok = holds("(forall z in a. z in b) and (forall z in b. z in a) => a = b", env);
                ok = ok && apg_eq_bisim(apgs_[i], apgs_[j]) == (i == j);
                check(r, ok, U_[i].str() + " vs " + U_[j].str());
            }
        return r;
    }

    AxiomResult empty_set() {
        AxiomResult r{"empty-set", 0, 0, {}};
        Apg e = empty();
        check(r, holds("forall z in e. false", {{"e", code(e)}}), "empty() has members");
        for (size_t i = 0; i < U_.size(); ++i) check(r, !apg_mem_bisim(apgs_[i], e), U_[i].str() + " in empty()");
        return r;
    }

    AxiomResult pairing() {
        AxiomResult r{"pairing", 0, 0, {}};
        for (size_t i = 0; i < U_.size(); ++i)
            for (size_t j = 0; j < U_.size(); ++j) {
                Hf p = code(pair(apgs_[i], apgs_[j]));
                check(r, holds("a in p and b in p and (forall z in p. z = a or z = b)", {{"a", U_[i]}, {"b", U_[j]}, {"p", p}}),
                      "pair of " + U_[i].str() + " and " + U_[j].str());
            }
        return r;
    }

    AxiomResult union_axiom() {
        AxiomResult r{"union", 0, 0, {}};
        for (size_t i = 0; i < U_.size(); ++i) {
            Hf u = code(union_of(apgs_[i]));
            check(r,
                  holds("(forall y in a. forall z in y. z in u) and (forall z in u. exists y in a. z in y)",
                        {{"a", U_[i]}, {"u", u}}),
                  "union of " + U_[i].str());
        }
        return r;
    }

    static std::string instantiate(const std::string& tmpl, const std::string& var) {
        std::string out;
        for (char c : tmpl) {
            if (c == '#')
                out += var;
            else
                out += c;
        }
        return out;
    }

    AxiomResult separation() {
        AxiomResult r{"delta0-separation", 0, 0, {}};
        const std::vector<std::string> phis = {"exists w in # . w = p", "forall w in # . w in p", "not # = p",
                                               "# in p or p in #", "exists w in # . exists v in w . true"};
        for (const auto& tmpl : phis) {
            auto phi = formula(instantiate(tmpl, "z"));
            for (size_t i = 0; i < U_.size(); ++i)
                for (size_t j = 0; j < U_.size(); ++j) {
                    const Apg& A = apgs_[i];
                    std::vector<char> keep(A.size(), 0);
                    for (int m : A.members()) {
                        Hf z = code(slash(A, m));
                        keep[m] = eval_material(phi, {{"z", z}, {"p", U_[j]}}, budget_).forced();
                    }
                    Hf s = code(separate(A, keep));
                    std::string P = instantiate(tmpl, "z");
                    check(r,
                          holds("(forall z in s. z in a and (" + P + ")) and (forall z in a. (" + P + ") => z in s)",
                                {{"s", s}, {"a", U_[i]}, {"p", U_[j]}}),
                          tmpl + " on " + U_[i].str());
                }
        }
        return r;
    }

    AxiomResult exponentiation() {
        AxiomResult r{"exponentiation", 0, 0, {}};
        for (size_t i = 0; i < U_.size(); ++i)
            for (size_t j = 0; j < U_.size(); ++j) {
                Hf F = code(function_set(apgs_[i], apgs_[j]));
                auto homs = cat_.hom(U_[i], U_[j]);
                bool ok = F.members() == homs;
                for (const auto& f : F.members()) ok = ok && cat_.is_function(f, U_[i], U_[j]);
                check(r, ok, U_[j].str() + "^" + U_[i].str());
            }
        return r;
    }

    AxiomResult power_set() {
        AxiomResult r{"power-set", 0, 0, {}};
        for (size_t i = 0; i < U_.size(); ++i) {
            Hf P = code(power(apgs_[i]));
            bool ok = holds("forall z in P. forall w in z. w in a", {{"P", P}, {"a", U_[i]}});
            ok = ok && P.card() == (1 << U_[i].card());
            for (const auto& z : U_) {
                bool sub = std::all_of(z.members().begin(), z.members().end(),
                                       [&](const Hf& w) { return U_[i].contains(w); });
                ok = ok && sub == P.contains(z);
            }
            check(r, ok, "power of " + U_[i].str());
        }
        return r;
    }

    AxiomResult foundation() {
        AxiomResult r{"foundation", 0, 0, {}};
        const std::vector<std::string> phis = {"exists w in # . w = p", "not # in p", "forall w in # . w in p"};
        for (size_t i = 0; i < U_.size(); ++i) {
            if (U_[i].card() > 0)
                check(r, holds("exists y in a. forall z in y. not z in a", {{"a", U_[i]}}),
                      "no minimal member in " + U_[i].str());
            Hf t = code(transitive_closure(apgs_[i]));
            for (const auto& tmpl : phis)
                for (const auto& p : U_) {
                    std::string text = "(forall x in t. (forall y in x. " + instantiate(tmpl, "y") + ") => " +
                                       instantiate(tmpl, "x") + ") => forall x in t. " + instantiate(tmpl, "x");
                    check(r, holds(text, {{"t", t}, {"p", p}}), "set induction for " + tmpl);
                }
        }
        return r;
    }

    AxiomResult closures() {
        AxiomResult r{"transitive-closure", 0, 0, {}};
        for (size_t i = 0; i < U_.size(); ++i) {
            Hf t = code(transitive_closure(apgs_[i]));
            check(r,
                  holds("(forall z in a. z in t) and (forall y in t. forall z in y. z in t)", {{"a", U_[i]}, {"t", t}}),
                  "closure of " + U_[i].str());
            for (const auto& s : U_)
                check(r,
                      holds("(forall z in a. z in s) and (forall y in s. forall z in y. z in s) => forall z in t. z in s",
                            {{"a", U_[i]}, {"t", t}, {"s", s}}),
                      "closure of " + U_[i].str() + " is not least");
        }
        return r;
    }

    AxiomResult mostowski_principle() {
        AxiomResult r{"mostowski", 0, 0, {}};
        // every well-founded extensional graph on at most 4 nodes collapses onto a transitive set
        for (int n = 0; n <= 4; ++n) {
            const int slots = n * n;
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots); ++mask) {
                std::vector<std::pair<int, int>> edges;
                for (int s = 0; s < slots; ++s)
                    if (mask >> s & 1) edges.emplace_back(s / n, s % n);
                Graph g = Graph::from_edges(n, edges);
                if (!is_wellfounded(g) || !is_extensional(g)) continue;
                std::vector<Hf> img;
                for (int v = 0; v < n; ++v) img.push_back(mostowski(g, v));
                std::set<Hf> M(img.begin(), img.end());
                bool ok = static_cast<int>(M.size()) == n;
                for (const auto& m : M)
                    for (const auto& z : m.members()) ok = ok && M.count(z);
                for (int x = 0; x < n; ++x)
                    for (int y = 0; y < n; ++y) ok = ok && g.has_edge(x, y) == img[y].contains(img[x]);
                check(r, ok, "graph mask " + std::to_string(mask) + " on " + std::to_string(n) + " nodes");
            }
        }
        for (const auto& x : U_) check(r, code(embed(x)) == x, x.str() + " is not its own collapse");
        return r;
    }
};

}  // namespace

AxiomReport axiom_suite(int rank_budget) {
    if (rank_budget < 1) throw std::invalid_argument("rank budget must be at least 1");
    return Axioms(rank_budget).run();
}

// ------------------------------------------------------------- expressions

namespace {

class ExprParser {
public:
    explicit ExprParser(std::string s) : s_(std::move(s)) {}

    Apg parse() {
        Apg r = expr();
        skip();
        if (i_ != s_.size()) fail("unexpected input");
        return r;
    }

private:
    std::string s_;
    size_t i_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, static_cast<int>(i_)); }
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    void expect(char c) {
        skip();
        if (i_ >= s_.size() || s_[i_] != c) fail(std::string("expected '") + c + "'");
        ++i_;
    }

    Apg expr() {
        skip();
        if (i_ < s_.size() && s_[i_] == '{') {
            size_t start = i_;
            int depth = 0;
            do {
                if (s_[i_] == '{') ++depth;
                if (s_[i_] == '}') --depth;
                ++i_;
            } while (i_ < s_.size() && depth > 0);
            if (depth != 0) fail("unbalanced braces");
            try {
                return decode(parse_hf(s_.substr(start, i_ - start)));
            } catch (const MatError& e) {
                throw ParseError(e.what(), static_cast<int>(start));
            }
        }
        size_t start = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
        std::string name = s_.substr(start, i_ - start);
        if (name.empty()) fail("expected an expression");
        if (name == "empty") return empty();
        if (name == "vn") {
            expect('(');
            skip();
            size_t d = i_;
            while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
            if (d == i_) fail("expected a number");
            int n = std::stoi(s_.substr(d, i_ - d));
            expect(')');
            return von_neumann(n);
        }
        static const std::map<std::string, int> arity{{"pair", 2},  {"union", 1}, {"product", 2}, {"funcs", 2},
                                                      {"power", 1}, {"tc", 1},    {"choice", 1}};
        auto it = arity.find(name);
        if (it == arity.end()) {
            i_ = start;
            fail("unknown operation '" + name + "'");
        }
        expect('(');
        std::vector<Apg> args{expr()};
        for (int k = 1; k < it->second; ++k) {
            expect(',');
            args.push_back(expr());
        }
        expect(')');
        if (name == "pair") return pair(args[0], args[1]);
        if (name == "union") return union_of(args[0]);
        if (name == "product") return product(args[0], args[1]);
        if (name == "funcs") return function_set(args[0], args[1]);
        if (name == "power") return power(args[0]);
        if (name == "tc") return transitive_closure(args[0]);
        return choice_fn(args[0]);
    }
};

}  // namespace

Apg eval_expr(const std::string& text) { return ExprParser(text).parse(); }

std::string apg_json(const Apg& X) {
    nlohmann::ordered_json j;
    j["n"] = X.size();
    j["edges"] = nlohmann::json::array();
    for (auto [c, p] : X.graph.edges()) j["edges"].push_back({c, p});
    j["root"] = X.root;
    return j.dump();
}

Apg apg_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw MatError(std::string("invalid APG JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("n") || !j.contains("edges") || !j.contains("root"))
        throw MatError("APG JSON needs n, edges and root");
    try {
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw MatError("edges are [child, parent] pairs");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        return make_apg(Graph::from_edges(j.at("n").get<int>(), edges), j.at("root").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw MatError(std::string("invalid APG JSON: ") + e.what());
    }
}

}  // namespace stacksem::mat

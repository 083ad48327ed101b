#include "stacksem/catkit.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace stacksem {

namespace {

std::atomic<std::uint64_t> next_topos_id{1};

std::string join_ints(const std::vector<int>& v, char sep = ',') {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(v[i]);
    }
    return s;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw CatError(msg);
}

}  // namespace

// ---------------------------------------------------------------- FinCat

void FinCat::finish() {
    out_.assign(objects.size(), {});
    for (int m = 0; m < n_mor(); ++m) out_[arrows[m].dom].push_back(m);
}

void FinCat::validate() const {
    const int n = n_mor();
    require(static_cast<int>(identity.size()) == n_obj(), "identity list has wrong length");
    require(table.size() == static_cast<size_t>(n) * n, "composition table has wrong size");
    for (const auto& a : arrows)
        require(a.dom >= 0 && a.dom < n_obj() && a.cod >= 0 && a.cod < n_obj(),
                "arrow " + a.name + " has an unknown endpoint");
    for (int c = 0; c < n_obj(); ++c) {
        int i = identity[c];
        require(i >= 0 && i < n && dom(i) == c && cod(i) == c, "bad identity for object " + objects[c]);
    }
    for (int g = 0; g < n; ++g)
        for (int f = 0; f < n; ++f) {
            int h = comp(g, f);
            if (cod(f) != dom(g)) {
                require(h == -1, "composite given for non-composable pair " + arrows[g].name + "," + arrows[f].name);
                continue;
            }
            require(h >= 0 && h < n, "missing composite " + arrows[g].name + " o " + arrows[f].name);
            require(dom(h) == dom(f) && cod(h) == cod(g),
                    "composite " + arrows[g].name + " o " + arrows[f].name + " has wrong type");
        }
    for (int f = 0; f < n; ++f) {
        require(comp(identity[cod(f)], f) == f, "left identity law fails for " + arrows[f].name);
        require(comp(f, identity[dom(f)]) == f, "right identity law fails for " + arrows[f].name);
    }
    for (int h = 0; h < n; ++h)
        for (int g = 0; g < n; ++g) {
            if (cod(g) != dom(h)) continue;
            int hg = comp(h, g);
            for (int f = 0; f < n; ++f) {
                if (cod(f) != dom(g)) continue;
                require(comp(hg, f) == comp(h, comp(g, f)), "associativity fails at " + arrows[h].name + "," +
                                                                 arrows[g].name + "," + arrows[f].name);
            }
        }
}

FinCat FinCat::terminal() {
    FinCat c;
    c.objects = {"*"};
    c.arrows = {{"id", 0, 0}};
    c.identity = {0};
    c.table = {0};
    c.finish();
    return c;
}

FinCat FinCat::z2() {
    FinCat c;
    c.objects = {"*"};
    c.arrows = {{"e", 0, 0}, {"s", 0, 0}};
    c.identity = {0};
    c.table = {0, 1, 1, 0};
    c.finish();
    return c;
}

FinCat FinCat::arrow() {
    FinCat c;
    c.objects = {"0", "1"};
    c.arrows = {{"id0", 0, 0}, {"id1", 1, 1}, {"a", 0, 1}};
    c.identity = {0, 1};
    c.table.assign(9, -1);
    auto set = [&](int g, int f, int h) { c.table[g * 3 + f] = h; };
    set(0, 0, 0);
    set(1, 1, 1);
    set(2, 0, 2);
    set(1, 2, 2);
    c.finish();
    return c;
}

FinCat FinCat::empty() {
    FinCat c;
    c.finish();
    return c;
}

// ---------------------------------------------------------------- Obj / Mor / Sub

Obj::Obj() : rep_(std::make_shared<const Rep>()) {}

Obj::Obj(std::vector<int> card, std::vector<std::vector<int>> act) {
    Rep r;
    r.card = std::move(card);
    r.act = std::move(act);
    r.offset.resize(r.card.size());
    int t = 0;
    for (size_t c = 0; c < r.card.size(); ++c) {
        r.offset[c] = t;
        t += r.card[c];
    }
    r.total = t;
    rep_ = std::make_shared<const Rep>(std::move(r));
}

std::string Obj::key() const {
    std::string s = join_ints(rep_->card);
    for (const auto& a : rep_->act) {
        s += '|';
        s += join_ints(a);
    }
    return s;
}

bool operator==(const Obj& a, const Obj& b) {
    if (a.rep_ == b.rep_) return true;
    return a.rep_->card == b.rep_->card && a.rep_->act == b.rep_->act;
}

bool operator<(const Obj& a, const Obj& b) {
    if (a.total() != b.total()) return a.total() < b.total();
    if (a.cards() != b.cards()) return a.cards() < b.cards();
    return a.acts() < b.acts();
}

std::string Mor::key() const {
    std::string s;
    for (size_t c = 0; c < comp.size(); ++c) {
        if (c) s += '|';
        s += join_ints(comp[c]);
    }
    return s;
}

int Sub::count() const { return static_cast<int>(std::count(bits.begin(), bits.end(), 1)); }

std::string Sub::key() const {
    std::string s;
    for (char b : bits) s += b ? '1' : '0';
    return s;
}

bool mask_less(const std::vector<char>& a, const std::vector<char>& b) {
    for (size_t i = a.size(); i-- > 0;)
        if (a[i] != b[i]) return a[i] < b[i];
    return false;
}

// ---------------------------------------------------------------- elements

FinCat elements(const FinCat& C, const Obj& U) {
    FinCat E;
    for (int c = 0; c < C.n_obj(); ++c)
        for (int u = 0; u < U.card(c); ++u) E.objects.push_back(C.objects[c] + "." + std::to_string(u));
    std::vector<int> moff(C.n_mor() + 1, 0);
    for (int m = 0; m < C.n_mor(); ++m) moff[m + 1] = moff[m] + U.card(C.dom(m));
    for (int m = 0; m < C.n_mor(); ++m) {
        int d = C.dom(m), e = C.cod(m);
        for (int u = 0; u < U.card(d); ++u)
            E.arrows.push_back({C.arrows[m].name + "." + std::to_string(u), U.offset(d) + u,
                                U.offset(e) + U.act(m, u)});
    }
    E.identity.resize(E.objects.size());
    for (int c = 0; c < C.n_obj(); ++c)
        for (int u = 0; u < U.card(c); ++u) E.identity[U.offset(c) + u] = moff[C.identity[c]] + u;
    const int n = E.n_mor();
    E.table.assign(static_cast<size_t>(n) * n, -1);
    for (int g = 0; g < C.n_mor(); ++g)
        for (int f = 0; f < C.n_mor(); ++f) {
            int h = C.comp(g, f);
            if (h < 0) continue;
            for (int u = 0; u < U.card(C.dom(f)); ++u) {
                int fu = moff[f] + u;
                int gu = moff[g] + U.act(f, u);
                E.table[static_cast<size_t>(gu) * n + fu] = moff[h] + u;
            }
        }
    E.finish();
    return E;
}

int element_arrow(const FinCat& C, const Obj& U, int m, int u) {
    int off = 0;
    for (int k = 0; k < m; ++k) off += U.card(C.dom(k));
    return off + u;
}

Functor elements_functor(const FinCat& C, const Mor& p) {
    const Obj& V = p.dom;
    const Obj& U = p.cod;
    Functor F;
    F.obj.resize(V.total());
    for (int c = 0; c < C.n_obj(); ++c)
        for (int v = 0; v < V.card(c); ++v) F.obj[V.offset(c) + v] = U.offset(c) + p(c, v);
    std::vector<int> uoff(C.n_mor() + 1, 0);
    for (int m = 0; m < C.n_mor(); ++m) uoff[m + 1] = uoff[m] + U.card(C.dom(m));
    for (int m = 0; m < C.n_mor(); ++m)
        for (int v = 0; v < V.card(C.dom(m)); ++v) F.mor.push_back(uoff[m] + p(C.dom(m), v));
    return F;
}

Functor elements_projection(const FinCat& C, const Obj& U) {
    Functor F;
    for (int c = 0; c < C.n_obj(); ++c)
        for (int u = 0; u < U.card(c); ++u) F.obj.push_back(c);
    for (int m = 0; m < C.n_mor(); ++m)
        for (int u = 0; u < U.card(C.dom(m)); ++u) F.mor.push_back(m);
    return F;
}

Obj reindex(const Obj& A, const Functor& F, const FinCat& D) {
    std::vector<int> card(D.n_obj());
    std::vector<std::vector<int>> act(D.n_mor());
    for (int d = 0; d < D.n_obj(); ++d) card[d] = A.card(F.obj[d]);
    for (int m = 0; m < D.n_mor(); ++m) act[m] = A.act(F.mor[m]);
    return Obj(std::move(card), std::move(act));
}

Mor reindex(const Mor& f, const Functor& F, const FinCat& D) {
    Mor r{reindex(f.dom, F, D), reindex(f.cod, F, D), {}};
    r.comp.resize(D.n_obj());
    for (int d = 0; d < D.n_obj(); ++d) r.comp[d] = f.comp[F.obj[d]];
    return r;
}

// ---------------------------------------------------------------- Topos basics

Topos::Topos(Kind kind, FinCat C, std::string name)
    : kind_(kind), cat_(std::move(C)), name_(std::move(name)), id_(next_topos_id++) {}

Handle Topos::finset() {
    static const Handle h = std::make_shared<const Topos>(Kind::FinSet, FinCat::terminal(), "finset");
    return h;
}

Handle Topos::presheaf(FinCat C, std::string name) {
    C.finish();
    C.validate();
    return std::make_shared<const Topos>(Kind::Presheaf, std::move(C), std::move(name));
}

Handle Topos::slice(const Obj& U) const {
    check_object(U);
    const std::string k = U.key();
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = slices_.find(k);
    if (it != slices_.end())
        if (auto h = it->second.lock()) return h;
    auto t = std::make_shared<Topos>(Kind::Slice, elements(cat_, U), name_ + "/[" + k + "]");
    t->parent_ = shared_from_this();
    t->base_ = U;
    Handle h = t;
    slices_[k] = h;
    return h;
}

std::pair<Obj, Mor> Topos::sigma(const Obj& A) const {
    require(kind_ == Kind::Slice, "sigma needs a slice handle");
    const FinCat& C = parent_->cat_;
    const Obj& U = base_;
    std::vector<std::vector<int>> start(C.n_obj());
    std::vector<int> card(C.n_obj(), 0);
    for (int c = 0; c < C.n_obj(); ++c) {
        start[c].resize(U.card(c));
        for (int u = 0; u < U.card(c); ++u) {
            start[c][u] = card[c];
            card[c] += A.card(U.offset(c) + u);
        }
    }
    std::vector<std::vector<int>> act(C.n_mor());
    std::vector<std::vector<int>> pc(C.n_obj());
    for (int c = 0; c < C.n_obj(); ++c) {
        pc[c].resize(card[c]);
        for (int u = 0; u < U.card(c); ++u)
            for (int a = 0; a < A.card(U.offset(c) + u); ++a) pc[c][start[c][u] + a] = u;
    }
    for (int m = 0; m < C.n_mor(); ++m) {
        int d = C.dom(m), e = C.cod(m);
        act[m].resize(card[d]);
        for (int u = 0; u < U.card(d); ++u) {
            int mu = element_arrow(C, U, m, u);
            int u2 = U.act(m, u);
            for (int a = 0; a < A.card(U.offset(d) + u); ++a)
                act[m][start[d][u] + a] = start[e][u2] + A.act(mu, a);
        }
    }
    Obj X(card, std::move(act));
    return {X, Mor{X, U, std::move(pc)}};
}

Mor Topos::sigma(const Mor& f) const {
    auto [X, px] = sigma(f.dom);
    auto [Y, py] = sigma(f.cod);
    const FinCat& C = parent_->cat_;
    const Obj& U = base_;
    Mor r{X, Y, {}};
    r.comp.resize(C.n_obj());
    for (int c = 0; c < C.n_obj(); ++c) {
        r.comp[c].resize(X.card(c));
        int sx = 0, sy = 0;
        for (int u = 0; u < U.card(c); ++u) {
            int e = U.offset(c) + u;
            for (int a = 0; a < f.dom.card(e); ++a) r.comp[c][sx + a] = sy + f(e, a);
            sx += f.dom.card(e);
            sy += f.cod.card(e);
        }
    }
    return r;
}

namespace {

// position of each element inside its fiber
std::vector<std::vector<int>> fiber_positions(const FinCat& C, const Mor& f) {
    std::vector<std::vector<int>> pos(C.n_obj());
    for (int c = 0; c < C.n_obj(); ++c) {
        std::vector<int> cnt(f.cod.card(c), 0);
        pos[c].resize(f.dom.card(c));
        for (int x = 0; x < f.dom.card(c); ++x) pos[c][x] = cnt[f(c, x)]++;
    }
    return pos;
}

}  // namespace

Obj Topos::over(const Mor& f) const {
    require(kind_ == Kind::Slice, "over needs a slice handle");
    require(f.cod == base_, "map does not land in the slice base");
    const FinCat& C = parent_->cat_;
    const Obj& U = base_;
    const Obj& X = f.dom;
    auto pos = fiber_positions(C, f);
    std::vector<int> card(U.total(), 0);
    std::vector<std::vector<int>> members(U.total());
    for (int c = 0; c < C.n_obj(); ++c)
        for (int x = 0; x < X.card(c); ++x) {
            int e = U.offset(c) + f(c, x);
            card[e]++;
            members[e].push_back(x);
        }
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < C.n_mor(); ++m)
        for (int u = 0; u < U.card(C.dom(m)); ++u) {
            int mu = element_arrow(C, U, m, u);
            const auto& mem = members[U.offset(C.dom(m)) + u];
            act[mu].resize(mem.size());
            for (size_t i = 0; i < mem.size(); ++i) act[mu][i] = pos[C.cod(m)][X.act(m, mem[i])];
        }
    return Obj(std::move(card), std::move(act));
}

Mor Topos::over(const Mor& g, const Mor& fa, const Mor& fb) const {
    require(parent_->compose(fb, g) == fa, "triangle does not commute");
    const FinCat& C = parent_->cat_;
    const Obj& U = base_;
    auto posb = fiber_positions(C, fb);
    Mor r{over(fa), over(fb), {}};
    r.comp.assign(U.total(), {});
    for (int c = 0; c < C.n_obj(); ++c)
        for (int x = 0; x < g.dom.card(c); ++x) {
            int e = U.offset(c) + fa(c, x);
            r.comp[e].push_back(posb[c][g(c, x)]);
        }
    return r;
}

Obj Topos::pull(const Mor& p, const Obj& A) const {
    require(kind_ == Kind::Slice, "pull needs a slice handle");
    require(p.cod == base_, "pullback map does not land in the slice base");
    Handle sv = parent_->slice(p.dom);
    return reindex(A, elements_functor(parent_->cat_, p), sv->cat_);
}

Mor Topos::pull(const Mor& p, const Mor& f) const {
    require(kind_ == Kind::Slice, "pull needs a slice handle");
    require(p.cod == base_, "pullback map does not land in the slice base");
    Handle sv = parent_->slice(p.dom);
    return reindex(f, elements_functor(parent_->cat_, p), sv->cat_);
}

bool Topos::is_object(const Obj& A) const {
    if (A.n_comp() != cat_.n_obj() || A.n_act() != cat_.n_mor()) return false;
    for (int c = 0; c < cat_.n_obj(); ++c)
        if (A.card(c) < 0) return false;
    for (int m = 0; m < cat_.n_mor(); ++m) {
        const auto& t = A.act(m);
        if (static_cast<int>(t.size()) != A.card(cat_.dom(m))) return false;
        for (int v : t)
            if (v < 0 || v >= A.card(cat_.cod(m))) return false;
        if (cat_.is_identity(m))
            for (int x = 0; x < static_cast<int>(t.size()); ++x)
                if (t[x] != x) return false;
    }
    for (int g = 0; g < cat_.n_mor(); ++g)
        for (int f = 0; f < cat_.n_mor(); ++f) {
            int h = cat_.comp(g, f);
            if (h < 0) continue;
            for (int x = 0; x < A.card(cat_.dom(f)); ++x)
                if (A.act(h, x) != A.act(g, A.act(f, x))) return false;
        }
    return true;
}

bool Topos::is_morphism(const Mor& f) const {
    if (!is_object(f.dom) || !is_object(f.cod)) return false;
    if (static_cast<int>(f.comp.size()) != cat_.n_obj()) return false;
    for (int c = 0; c < cat_.n_obj(); ++c) {
        if (static_cast<int>(f.comp[c].size()) != f.dom.card(c)) return false;
        for (int v : f.comp[c])
            if (v < 0 || v >= f.cod.card(c)) return false;
    }
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int x = 0; x < f.dom.card(d); ++x)
            if (f(e, f.dom.act(m, x)) != f.cod.act(m, f(d, x))) return false;
    }
    return true;
}

void Topos::check_object(const Obj& A) const {
    require(is_object(A), "object does not belong to " + name_);
}

Obj Topos::terminal() const {
    std::vector<std::vector<int>> act(cat_.n_mor(), std::vector<int>{0});
    return Obj(std::vector<int>(cat_.n_obj(), 1), std::move(act));
}

Obj Topos::initial() const {
    return Obj(std::vector<int>(cat_.n_obj(), 0), std::vector<std::vector<int>>(cat_.n_mor()));
}

Obj Topos::representable(int c) const {
    // y(c)(d) = arrows c -> d, in arrow order
    std::vector<int> pos(cat_.n_mor(), -1);
    std::vector<int> card(cat_.n_obj(), 0);
    for (int h : cat_.out(c)) pos[h] = card[cat_.cod(h)]++;
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        act[m].resize(card[cat_.dom(m)]);
        for (int h : cat_.out(c))
            if (cat_.cod(h) == cat_.dom(m)) act[m][pos[h]] = pos[cat_.comp(m, h)];
    }
    return Obj(std::move(card), std::move(act));
}

Mor Topos::element_map(int c, int x, const Obj& X) const {
    Obj Y = representable(c);
    Mor r{Y, X, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int h : cat_.out(c)) r.comp[cat_.cod(h)].push_back(X.act(h, x));
    return r;
}

Mor Topos::identity(const Obj& A) const {
    Mor r{A, A, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) {
        r.comp[c].resize(A.card(c));
        std::iota(r.comp[c].begin(), r.comp[c].end(), 0);
    }
    return r;
}

Mor Topos::compose(const Mor& g, const Mor& f) const {
    require(f.cod == g.dom, "typing error: composite of non-composable arrows");
    Mor r{f.dom, g.cod, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) {
        r.comp[c].resize(f.dom.card(c));
        for (int x = 0; x < f.dom.card(c); ++x) r.comp[c][x] = g(c, f(c, x));
    }
    return r;
}

Mor Topos::to_terminal(const Obj& A) const {
    Mor r{A, terminal(), std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) r.comp[c].assign(A.card(c), 0);
    return r;
}

Mor Topos::from_initial(const Obj& A) const {
    return Mor{initial(), A, std::vector<std::vector<int>>(cat_.n_obj())};
}

Topos::Span Topos::pullback(const Mor& f, const Mor& g) const {
    require(f.cod == g.cod, "pullback of maps with different codomains");
    const Obj& X = f.dom;
    const Obj& Y = g.dom;
    std::vector<int> card(cat_.n_obj(), 0);
    std::vector<std::vector<int>> idx(cat_.n_obj());
    std::vector<std::vector<int>> p1(cat_.n_obj()), p2(cat_.n_obj());
    for (int c = 0; c < cat_.n_obj(); ++c) {
        idx[c].assign(static_cast<size_t>(X.card(c)) * Y.card(c), -1);
        for (int x = 0; x < X.card(c); ++x)
            for (int y = 0; y < Y.card(c); ++y)
                if (f(c, x) == g(c, y)) {
                    idx[c][x * Y.card(c) + y] = card[c]++;
                    p1[c].push_back(x);
                    p2[c].push_back(y);
                }
    }
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int d = cat_.dom(m), e = cat_.cod(m);
        act[m].resize(card[d]);
        for (int i = 0; i < card[d]; ++i) {
            int x = X.act(m, p1[d][i]), y = Y.act(m, p2[d][i]);
            act[m][i] = idx[e][x * Y.card(e) + y];
        }
    }
    Obj P(std::move(card), std::move(act));
    return {P, Mor{P, X, std::move(p1)}, Mor{P, Y, std::move(p2)}};
}

Topos::Span Topos::product(const Obj& A, const Obj& B) const {
    return pullback(to_terminal(A), to_terminal(B));
}

Mor Topos::pairing(const Span& prod, const Mor& f, const Mor& g) const {
    require(f.dom == g.dom && f.cod == prod.p1.cod && g.cod == prod.p2.cod, "pairing of mistyped arrows");
    Mor r{f.dom, prod.obj, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) {
        std::unordered_map<long long, int> at;
        const int w = prod.p2.cod.card(c) + 1;
        for (int i = 0; i < prod.obj.card(c); ++i)
            at[static_cast<long long>(prod.p1(c, i)) * w + prod.p2(c, i)] = i;
        r.comp[c].resize(f.dom.card(c));
        for (int z = 0; z < f.dom.card(c); ++z) {
            auto it = at.find(static_cast<long long>(f(c, z)) * w + g(c, z));
            require(it != at.end(), "pairing does not factor through the limit");
            r.comp[c][z] = it->second;
        }
    }
    return r;
}

Topos::Cospan Topos::coproduct(const Obj& A, const Obj& B) const {
    std::vector<int> card(cat_.n_obj());
    for (int c = 0; c < cat_.n_obj(); ++c) card[c] = A.card(c) + B.card(c);
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int x = 0; x < A.card(d); ++x) act[m].push_back(A.act(m, x));
        for (int y = 0; y < B.card(d); ++y) act[m].push_back(A.card(e) + B.act(m, y));
    }
    Obj S(card, std::move(act));
    Mor i1{A, S, std::vector<std::vector<int>>(cat_.n_obj())};
    Mor i2{B, S, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) {
        i1.comp[c].resize(A.card(c));
        std::iota(i1.comp[c].begin(), i1.comp[c].end(), 0);
        i2.comp[c].resize(B.card(c));
        std::iota(i2.comp[c].begin(), i2.comp[c].end(), A.card(c));
    }
    return {S, std::move(i1), std::move(i2)};
}

Mor Topos::copairing(const Cospan& sum, const Mor& f, const Mor& g) const {
    require(f.cod == g.cod && f.dom == sum.i1.dom && g.dom == sum.i2.dom, "copairing of mistyped arrows");
    Mor r{sum.obj, f.cod, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) {
        r.comp[c] = f.comp[c];
        r.comp[c].insert(r.comp[c].end(), g.comp[c].begin(), g.comp[c].end());
    }
    return r;
}

// ---------------------------------------------------------------- subobjects

Sub Topos::top(const Obj& X) const { return Sub{X, std::vector<char>(X.total(), 1)}; }

Sub Topos::bottom(const Obj& X) const { return Sub{X, std::vector<char>(X.total(), 0)}; }

Sub Topos::meet(const Sub& a, const Sub& b) const {
    require(a.target == b.target, "target mismatch");
    Sub r = a;
    for (size_t i = 0; i < r.bits.size(); ++i) r.bits[i] = a.bits[i] && b.bits[i];
    return r;
}

Sub Topos::join(const Sub& a, const Sub& b) const {
    require(a.target == b.target, "target mismatch");
    Sub r = a;
    for (size_t i = 0; i < r.bits.size(); ++i) r.bits[i] = a.bits[i] || b.bits[i];
    return r;
}

Sub Topos::implies(const Sub& a, const Sub& b) const {
    require(a.target == b.target, "target mismatch");
    const Obj& X = a.target;
    Sub r = bottom(X);
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int x = 0; x < X.card(c); ++x) {
            bool ok = true;
            for (int m : cat_.out(c)) {
                int e = cat_.cod(m), y = X.act(m, x);
                if (a.has(e, y) && !b.has(e, y)) {
                    ok = false;
                    break;
                }
            }
            r.bits[X.offset(c) + x] = ok;
        }
    return r;
}

bool Topos::leq(const Sub& a, const Sub& b) const {
    require(a.target == b.target, "target mismatch");
    for (size_t i = 0; i < a.bits.size(); ++i)
        if (a.bits[i] && !b.bits[i]) return false;
    return true;
}

bool Topos::is_closed(const Sub& s) const {
    const Obj& X = s.target;
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int x = 0; x < X.card(d); ++x)
            if (s.has(d, x) && !s.has(e, X.act(m, x))) return false;
    }
    return true;
}

Sub Topos::pullback_sub(const Mor& f, const Sub& s) const {
    require(f.cod == s.target, "target mismatch");
    Sub r = bottom(f.dom);
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int x = 0; x < f.dom.card(c); ++x) r.bits[f.dom.offset(c) + x] = s.has(c, f(c, x));
    return r;
}

Sub Topos::image_sub(const Mor& f, const Sub& s) const {
    require(f.dom == s.target, "target mismatch");
    Sub r = bottom(f.cod);
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int x = 0; x < f.dom.card(c); ++x)
            if (s.has(c, x)) r.bits[f.cod.offset(c) + f(c, x)] = 1;
    return r;
}

Sub Topos::dual_image(const Mor& f, const Sub& s) const {
    require(f.dom == s.target, "target mismatch");
    const Obj& X = f.dom;
    const Obj& Y = f.cod;
    // preimage lists per component
    std::vector<std::vector<std::vector<int>>> pre(cat_.n_obj());
    for (int c = 0; c < cat_.n_obj(); ++c) {
        pre[c].resize(Y.card(c));
        for (int x = 0; x < X.card(c); ++x) pre[c][f(c, x)].push_back(x);
    }
    Sub r = bottom(Y);
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int y = 0; y < Y.card(c); ++y) {
            bool ok = true;
            for (int m : cat_.out(c)) {
                int e = cat_.cod(m);
                for (int x : pre[e][Y.act(m, y)])
                    if (!s.has(e, x)) {
                        ok = false;
                        break;
                    }
                if (!ok) break;
            }
            r.bits[Y.offset(c) + y] = ok;
        }
    return r;
}

Sub Topos::equalizer(const Mor& f, const Mor& g) const {
    require(f.dom == g.dom && f.cod == g.cod, "equalizer of non-parallel arrows");
    Sub r = bottom(f.dom);
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int x = 0; x < f.dom.card(c); ++x) r.bits[f.dom.offset(c) + x] = f(c, x) == g(c, x);
    return r;
}

std::pair<Obj, Mor> Topos::sub_object(const Sub& s) const {
    const Obj& X = s.target;
    std::vector<int> card(cat_.n_obj(), 0);
    std::vector<std::vector<int>> pos(cat_.n_obj()), incl(cat_.n_obj());
    for (int c = 0; c < cat_.n_obj(); ++c) {
        pos[c].assign(X.card(c), -1);
        for (int x = 0; x < X.card(c); ++x)
            if (s.has(c, x)) {
                pos[c][x] = card[c]++;
                incl[c].push_back(x);
            }
    }
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int x : incl[d]) {
            int y = pos[e][X.act(m, x)];
            require(y >= 0, "subobject mask is not closed");
            act[m].push_back(y);
        }
    }
    Obj S(std::move(card), std::move(act));
    return {S, Mor{S, X, std::move(incl)}};
}

Topos::Image Topos::image_factor(const Mor& f) const {
    Sub m = image_sub(f, top(f.dom));
    auto [I, incl] = sub_object(m);
    std::vector<std::vector<int>> pos(cat_.n_obj());
    for (int c = 0; c < cat_.n_obj(); ++c) {
        pos[c].assign(f.cod.card(c), -1);
        for (int i = 0; i < I.card(c); ++i) pos[c][incl(c, i)] = i;
    }
    Mor e{f.dom, I, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int x = 0; x < f.dom.card(c); ++x) e.comp[c].push_back(pos[c][f(c, x)]);
    return {std::move(e), std::move(m), std::move(incl)};
}

bool Topos::factors_through(const Mor& p, const Sub& s) const {
    require(p.cod == s.target, "target mismatch");
    for (int c = 0; c < cat_.n_obj(); ++c)
        for (int x = 0; x < p.dom.card(c); ++x)
            if (!s.has(c, p(c, x))) return false;
    return true;
}

bool Topos::is_mono(const Mor& f) const {
    for (int c = 0; c < cat_.n_obj(); ++c) {
        std::vector<char> seen(f.cod.card(c), 0);
        for (int x = 0; x < f.dom.card(c); ++x) {
            if (seen[f(c, x)]) return false;
            seen[f(c, x)] = 1;
        }
    }
    return true;
}

bool Topos::is_epi(const Mor& f) const {
    for (int c = 0; c < cat_.n_obj(); ++c) {
        std::vector<char> seen(f.cod.card(c), 0);
        for (int x = 0; x < f.dom.card(c); ++x) seen[f(c, x)] = 1;
        if (std::count(seen.begin(), seen.end(), 0)) return false;
    }
    return true;
}

bool Topos::is_iso(const Mor& f) const { return is_mono(f) && is_epi(f); }

std::optional<Mor> Topos::inverse(const Mor& f) const {
    if (!is_iso(f)) return std::nullopt;
    Mor r{f.cod, f.dom, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) {
        r.comp[c].resize(f.cod.card(c));
        for (int x = 0; x < f.dom.card(c); ++x) r.comp[c][f(c, x)] = x;
    }
    return r;
}

Topos::Quotient Topos::quotient(const Obj& X, const Sub& R) const {
    Span sq = product(X, X);
    require(R.target == sq.obj, "relation is not a subobject of X x X");
    require(is_closed(R), "relation is not a subobject");
    for (int c = 0; c < cat_.n_obj(); ++c) {
        const int n = X.card(c);
        auto rel = [&](int a, int b) { return R.has(c, a * n + b); };
        for (int a = 0; a < n; ++a) {
            require(rel(a, a), "relation is not reflexive");
            for (int b = 0; b < n; ++b) {
                if (!rel(a, b)) continue;
                require(rel(b, a), "relation is not symmetric");
                for (int d = 0; d < n; ++d)
                    if (rel(b, d)) require(rel(a, d), "relation is not transitive");
            }
        }
    }
    std::vector<int> card(cat_.n_obj(), 0);
    std::vector<std::vector<int>> cls(cat_.n_obj()), rep(cat_.n_obj());
    for (int c = 0; c < cat_.n_obj(); ++c) {
        const int n = X.card(c);
        cls[c].assign(n, -1);
        for (int a = 0; a < n; ++a) {
            if (cls[c][a] >= 0) continue;
            rep[c].push_back(a);
            for (int b = a; b < n; ++b)
                if (R.has(c, a * n + b)) cls[c][b] = card[c];
            card[c]++;
        }
    }
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int r : rep[d]) act[m].push_back(cls[e][X.act(m, r)]);
    }
    Obj Q(std::move(card), std::move(act));
    return {Q, Mor{X, Q, std::move(cls)}};
}

namespace {

// index of each family by key
struct Lookup {
    std::unordered_map<std::string, int> at;
    explicit Lookup(const std::vector<Mor>& v) {
        for (size_t i = 0; i < v.size(); ++i) at.emplace(v[i].key(), static_cast<int>(i));
    }
    int operator()(const Mor& m) const {
        auto it = at.find(m.key());
        require(it != at.end(), "internal error: family not found");
        return it->second;
    }
};

}  // namespace

Topos::Exponential Topos::exponential(const Obj& A, const Obj& B) const {
    const int n = cat_.n_obj();
    Exponential E;
    E.stage.reserve(n);
    E.families.resize(n);
    std::vector<Obj> reps;
    for (int c = 0; c < n; ++c) {
        reps.push_back(representable(c));
        E.stage.push_back(product(reps[c], A));
        E.families[c] = morphisms(E.stage[c].obj, B);
    }
    std::vector<Lookup> look;
    for (int c = 0; c < n; ++c) look.emplace_back(E.families[c]);
    std::vector<int> card(n);
    for (int c = 0; c < n; ++c) card[c] = static_cast<int>(E.families[c].size());
    // position of arrow h inside y(dom h)
    std::vector<int> hpos(cat_.n_mor());
    for (int c = 0; c < n; ++c) {
        std::vector<int> cnt(n, 0);
        for (int h : cat_.out(c)) hpos[h] = cnt[cat_.cod(h)]++;
    }
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int c = cat_.dom(m), c2 = cat_.cod(m);
        // k: y(c2) x A -> y(c) x A, (h, a) |-> (h o m, a)
        const Span& P2 = E.stage[c2];
        const Span& P = E.stage[c];
        Mor yk{reps[c2], reps[c], std::vector<std::vector<int>>(n)};
        for (int d = 0; d < n; ++d) yk.comp[d].resize(reps[c2].card(d));
        for (int h : cat_.out(c2)) yk.comp[cat_.cod(h)][hpos[h]] = hpos[cat_.comp(h, m)];
        Mor k = pairing(P, compose(yk, P2.p1), P2.p2);
        for (const Mor& th : E.families[c]) act[m].push_back(look[c2](compose(th, k)));
    }
    E.obj = Obj(card, std::move(act));
    E.prod = product(E.obj, A);
    E.eval = Mor{E.prod.obj, B, std::vector<std::vector<int>>(n)};
    for (int c = 0; c < n; ++c) {
        const Span& P = E.stage[c];
        const int idc = hpos[cat_.identity[c]];
        std::vector<int> at(static_cast<size_t>(reps[c].card(c)) * A.card(c), -1);
        for (int i = 0; i < P.obj.card(c); ++i) at[P.p1(c, i) * A.card(c) + P.p2(c, i)] = i;
        for (int i = 0; i < E.prod.obj.card(c); ++i) {
            int th = E.prod.p1(c, i), a = E.prod.p2(c, i);
            E.eval.comp[c].push_back(E.families[c][th](c, at[idc * A.card(c) + a]));
        }
    }
    return E;
}

Mor Topos::curry(const Exponential& e, const Span& ca, const Mor& g) const {
    const int n = cat_.n_obj();
    const Obj& C = ca.p1.cod;
    Mor r{C, e.obj, std::vector<std::vector<int>>(n)};
    std::vector<int> hpos(cat_.n_mor());
    for (int c = 0; c < n; ++c) {
        std::vector<int> cnt(n, 0);
        for (int h : cat_.out(c)) hpos[h] = cnt[cat_.cod(h)]++;
    }
    for (int c = 0; c < n; ++c) {
        Lookup look(e.families[c]);
        const Span& P = e.stage[c];
        std::vector<std::vector<int>> hs(n);
        for (int h : cat_.out(c)) hs[cat_.cod(h)].push_back(h);
        for (int z = 0; z < C.card(c); ++z) {
            // theta_d(h, a) = g_d(C(h) z, a)
            Mor th{P.obj, g.cod, std::vector<std::vector<int>>(n)};
            for (int d = 0; d < n; ++d) {
                std::vector<int> at(static_cast<size_t>(C.card(d)) * ca.p2.cod.card(d) + 1, -1);
                for (int i = 0; i < ca.obj.card(d); ++i) at[ca.p1(d, i) * ca.p2.cod.card(d) + ca.p2(d, i)] = i;
                for (int i = 0; i < P.obj.card(d); ++i) {
                    int h = hs[d][P.p1(d, i)];
                    int a = P.p2(d, i);
                    th.comp[d].push_back(g(d, at[C.act(h, z) * ca.p2.cod.card(d) + a]));
                }
            }
            r.comp[c].push_back(look(th));
        }
    }
    return r;
}

Topos::Power Topos::power_object(const Obj& A) const {
    const int n = cat_.n_obj();
    std::vector<Obj> reps;
    std::vector<Span> stage;
    std::vector<std::vector<Sub>> subs(n);
    for (int c = 0; c < n; ++c) {
        reps.push_back(representable(c));
        stage.push_back(product(reps[c], A));
        subs[c] = subobjects(stage[c].obj);
    }
    std::vector<std::unordered_map<std::string, int>> look(n);
    for (int c = 0; c < n; ++c)
        for (size_t i = 0; i < subs[c].size(); ++i) look[c].emplace(subs[c][i].key(), static_cast<int>(i));
    std::vector<int> hpos(cat_.n_mor());
    for (int c = 0; c < n; ++c) {
        std::vector<int> cnt(n, 0);
        for (int h : cat_.out(c)) hpos[h] = cnt[cat_.cod(h)]++;
    }
    std::vector<int> card(n);
    for (int c = 0; c < n; ++c) card[c] = static_cast<int>(subs[c].size());
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int c = cat_.dom(m), c2 = cat_.cod(m);
        Mor yk{reps[c2], reps[c], std::vector<std::vector<int>>(n)};
        for (int d = 0; d < n; ++d) yk.comp[d].resize(reps[c2].card(d));
        for (int h : cat_.out(c2)) yk.comp[cat_.cod(h)][hpos[h]] = hpos[cat_.comp(h, m)];
        Mor k = pairing(stage[c], compose(yk, stage[c2].p1), stage[c2].p2);
        for (const Sub& S : subs[c]) act[m].push_back(look[c2].at(pullback_sub(k, S).key()));
    }
    Power P;
    P.obj = Obj(card, std::move(act));
    P.prod = product(A, P.obj);
    P.member = bottom(P.prod.obj);
    for (int c = 0; c < n; ++c) {
        const Span& St = stage[c];
        const int idc = hpos[cat_.identity[c]];
        std::vector<int> at(static_cast<size_t>(reps[c].card(c)) * A.card(c), -1);
        for (int i = 0; i < St.obj.card(c); ++i) at[St.p1(c, i) * A.card(c) + St.p2(c, i)] = i;
        for (int i = 0; i < P.prod.obj.card(c); ++i) {
            int a = P.prod.p1(c, i), s = P.prod.p2(c, i);
            P.member.bits[P.prod.obj.offset(c) + i] = subs[c][s].has(c, at[idc * A.card(c) + a]);
        }
    }
    return P;
}

Obj Topos::omega() const { return power_object(terminal()).obj; }

Mor Topos::truth() const {
    Obj W = omega();
    Obj T = terminal();
    // the maximal sieve is the last subobject in mask order
    Mor r{T, W, std::vector<std::vector<int>>(cat_.n_obj())};
    for (int c = 0; c < cat_.n_obj(); ++c) r.comp[c] = {W.card(c) - 1};
    return r;
}

Mor Topos::character(const Sub& s) const {
    const Obj& X = s.target;
    const int n = cat_.n_obj();
    Obj W = omega();
    std::vector<std::unordered_map<std::string, int>> look(n);
    std::vector<Obj> reps;
    for (int c = 0; c < n; ++c) {
        reps.push_back(representable(c));
        Span st = product(reps[c], terminal());
        auto subs = subobjects(st.obj);
        for (size_t i = 0; i < subs.size(); ++i) look[c].emplace(subs[i].key(), static_cast<int>(i));
    }
    std::vector<int> hpos(cat_.n_mor());
    for (int c = 0; c < n; ++c) {
        std::vector<int> cnt(n, 0);
        for (int h : cat_.out(c)) hpos[h] = cnt[cat_.cod(h)]++;
    }
    Mor r{X, W, std::vector<std::vector<int>>(n)};
    for (int c = 0; c < n; ++c)
        for (int x = 0; x < X.card(c); ++x) {
            Sub sieve = bottom(reps[c]);
            for (int h : cat_.out(c))
                if (s.has(cat_.cod(h), X.act(h, x))) sieve.bits[reps[c].offset(cat_.cod(h)) + hpos[h]] = 1;
            // y(c) x 1 has the element order of y(c)
            Sub key{Obj(), sieve.bits};
            r.comp[c].push_back(look[c].at(key.key()));
        }
    return r;
}

Topos::Dependent Topos::pi(const Mor& f, const Mor& g) const {
    require(g.cod == f.dom, "dependent product: g must land in the domain of f");
    const Obj& Y = f.cod;
    const Obj& A = g.dom;
    const int n = cat_.n_obj();
    std::vector<int> hpos(cat_.n_mor());
    for (int c = 0; c < n; ++c) {
        std::vector<int> cnt(n, 0);
        for (int h : cat_.out(c)) hpos[h] = cnt[cat_.cod(h)]++;
    }
    // sections over each element y of Y(c)
    std::vector<std::vector<Span>> fib(n);
    std::vector<std::vector<std::vector<Mor>>> secs(n);
    std::vector<std::vector<Lookup>> looks(n);
    std::vector<int> card(n, 0);
    std::vector<std::vector<int>> first(n);
    for (int c = 0; c < n; ++c)
        for (int y = 0; y < Y.card(c); ++y) {
            Span P = pullback(element_map(c, y, Y), f);
            std::vector<Mor> ok;
            for (auto& s : morphisms(P.obj, A))
                if (compose(g, s) == P.p2) ok.push_back(std::move(s));
            first[c].push_back(card[c]);
            card[c] += static_cast<int>(ok.size());
            fib[c].push_back(std::move(P));
            looks[c].emplace_back(ok);
            secs[c].push_back(std::move(ok));
        }
    std::vector<std::vector<int>> act(cat_.n_mor());
    for (int m = 0; m < cat_.n_mor(); ++m) {
        int c = cat_.dom(m), c2 = cat_.cod(m);
        Obj yc = representable(c), yc2 = representable(c2);
        Mor yk{yc2, yc, std::vector<std::vector<int>>(n)};
        for (int d = 0; d < n; ++d) yk.comp[d].resize(yc2.card(d));
        for (int h : cat_.out(c2)) yk.comp[cat_.cod(h)][hpos[h]] = hpos[cat_.comp(h, m)];
        for (int y = 0; y < Y.card(c); ++y) {
            int y2 = Y.act(m, y);
            const Span& P = fib[c][y];
            const Span& P2 = fib[c2][y2];
            Mor k = pairing(P, compose(yk, P2.p1), P2.p2);
            for (const Mor& s : secs[c][y]) act[m].push_back(first[c2][y2] + looks[c2][y2](compose(s, k)));
        }
    }
    Obj D(card, std::move(act));
    Mor proj{D, Y, std::vector<std::vector<int>>(n)};
    for (int c = 0; c < n; ++c)
        for (int y = 0; y < Y.card(c); ++y) proj.comp[c].insert(proj.comp[c].end(), secs[c][y].size(), y);
    return {D, proj};
}

// ---------------------------------------------------------------- enumeration

namespace {

struct Triple {
    int g, f, h;
};


// lexicographically least relabelling over all per-component permutations
std::vector<std::vector<int>> least_tables(const FinCat& C, const Obj& A) {
    const int n = C.n_obj();
    std::vector<std::vector<int>> perm(n);
    for (int c = 0; c < n; ++c) {
        perm[c].resize(A.card(c));
        std::iota(perm[c].begin(), perm[c].end(), 0);
    }
    std::vector<std::vector<int>> best = A.acts();
    std::vector<std::vector<int>> cur(C.n_mor());
    std::function<void(int)> rec = [&](int c) {
        if (c == n) {
            for (int m = 0; m < C.n_mor(); ++m) {
                int d = C.dom(m), e = C.cod(m);
                cur[m].resize(A.card(d));
                for (int x = 0; x < A.card(d); ++x) cur[m][perm[d][x]] = perm[e][A.act(m, x)];
            }
            if (cur < best) best = cur;
            return;
        }
        std::sort(perm[c].begin(), perm[c].end());
        do {
            rec(c + 1);
        } while (std::next_permutation(perm[c].begin(), perm[c].end()));
    };
    rec(0);
    return best;
}

void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (parts == 0) {
        if (total == 0) out.push_back(cur);
        return;
    }
    if (parts == 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int k = 0; k <= total; ++k) {
        cur.push_back(k);
        compositions(total - k, parts - 1, cur, out);
        cur.pop_back();
    }
}

std::vector<Obj> presheaves_of_size(const FinCat& C, int total) {
    std::vector<Obj> out;
    const int n = C.n_obj();
    if (n == 0) {
        if (total == 0) out.push_back(Obj({}, {}));
        return out;
    }
    std::vector<std::vector<int>> cards;
    std::vector<int> cur;
    compositions(total, n, cur, cards);
    std::sort(cards.begin(), cards.end());
    std::vector<int> free_arrows;
    for (int m = 0; m < C.n_mor(); ++m)
        if (!C.is_identity(m)) free_arrows.push_back(m);
    std::vector<int> order(C.n_mor(), -1);
    for (size_t i = 0; i < free_arrows.size(); ++i) order[free_arrows[i]] = static_cast<int>(i);
    // composition constraints, checked once all three tables are known
    std::vector<std::vector<Triple>> checks(free_arrows.size());
    for (int g : free_arrows)
        for (int f : free_arrows) {
            int h = C.comp(g, f);
            if (h < 0) continue;
            int when = std::max(order[g], order[f]);
            if (!C.is_identity(h)) when = std::max(when, order[h]);
            checks[when].push_back({g, f, h});
        }
    for (const auto& card : cards) {
        std::vector<std::vector<int>> act(C.n_mor());
        bool empty_hom = false;
        for (int m = 0; m < C.n_mor(); ++m) {
            int d = C.dom(m);
            if (C.is_identity(m)) {
                act[m].resize(card[d]);
                std::iota(act[m].begin(), act[m].end(), 0);
            } else if (card[d] > 0 && card[C.cod(m)] == 0) {
                empty_hom = true;
            }
        }
        if (empty_hom) continue;
        std::function<void(size_t)> rec = [&](size_t i) {
            if (i == free_arrows.size()) {
                Obj A(card, act);
                if (least_tables(C, A) == A.acts()) out.push_back(std::move(A));
                return;
            }
            int m = free_arrows[i];
            int sd = card[C.dom(m)], se = card[C.cod(m)];
            std::vector<int>& t = act[m];
            t.assign(sd, 0);
            while (true) {
                bool ok = true;
                for (const auto& tr : checks[i]) {
                    const auto& tg = act[tr.g];
                    const auto& tf = act[tr.f];
                    const auto& th = act[tr.h];
                    for (int x = 0; x < card[C.dom(tr.f)]; ++x)
                        if (th[x] != tg[tf[x]]) {
                            ok = false;
                            break;
                        }
                    if (!ok) break;
                }
                if (ok) rec(i + 1);
                int k = sd - 1;
                while (k >= 0 && t[k] == se - 1) t[k--] = 0;
                if (k < 0) break;
                t[k]++;
            }
            t.clear();
        };
        rec(0);
    }
    return out;
}

}  // namespace

Obj Topos::canonical(const Obj& A) const {
    check_object(A);
    return Obj(A.cards(), least_tables(cat_, A));
}

const std::vector<Obj>& Topos::objects_up_to(int bound) const {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = objects_.find(bound);
    if (it != objects_.end()) return it->second;
    std::vector<Obj> all;
    for (int t = 0; t <= bound; ++t) {
        auto jt = by_size_.find(t);
        if (jt == by_size_.end())
            jt = by_size_.emplace(t, std::make_shared<const std::vector<Obj>>(presheaves_of_size(cat_, t))).first;
        all.insert(all.end(), jt->second->begin(), jt->second->end());
    }
    return objects_.emplace(bound, std::move(all)).first->second;
}

std::vector<Mor> Topos::morphisms(const Obj& A, const Obj& B) const {
    const int n = cat_.n_obj();
    std::vector<Mor> out;
    const int N = A.total();
    std::vector<int> comp_of(N), elem_of(N);
    for (int c = 0; c < n; ++c)
        for (int x = 0; x < A.card(c); ++x) {
            comp_of[A.offset(c) + x] = c;
            elem_of[A.offset(c) + x] = x;
        }
    for (int c = 0; c < n; ++c)
        if (A.card(c) > 0 && B.card(c) == 0) return out;
    struct Check {
        int m, src, tgt;  // f(tgt) == B.act(m, f(src))
    };
    std::vector<std::vector<Check>> checks(N);
    for (int m = 0; m < cat_.n_mor(); ++m) {
        if (cat_.is_identity(m)) continue;
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int x = 0; x < A.card(d); ++x) {
            int src = A.offset(d) + x, tgt = A.offset(e) + A.act(m, x);
            checks[std::max(src, tgt)].push_back({m, src, tgt});
        }
    }
    std::vector<int> val(N, 0);
    std::function<void(int)> rec = [&](int p) {
        if (p == N) {
            Mor f{A, B, std::vector<std::vector<int>>(n)};
            for (int c = 0; c < n; ++c) f.comp[c].assign(val.begin() + A.offset(c), val.begin() + A.offset(c) + A.card(c));
            out.push_back(std::move(f));
            return;
        }
        int c = comp_of[p];
        for (int y = 0; y < B.card(c); ++y) {
            val[p] = y;
            bool ok = true;
            for (const auto& ch : checks[p])
                if (val[ch.tgt] != B.act(ch.m, val[ch.src])) {
                    ok = false;
                    break;
                }
            if (ok) rec(p + 1);
        }
    };
    rec(0);
    return out;
}

std::vector<Mor> Topos::regular_epis_onto(const Obj& U, int bound) const {
    Handle s = slice(U);
    std::vector<Mor> out;
    for (const Obj& A : s->objects_up_to(bound)) {
        bool full = true;
        for (int c = 0; c < A.n_comp(); ++c)
            if (A.card(c) == 0) full = false;
        if (full) out.push_back(s->sigma(A).second);
    }
    return out;
}

std::vector<Sub> Topos::subobjects(const Obj& X) const {
    const int N = X.total();
    std::vector<std::vector<int>> succ(N);
    for (int m = 0; m < cat_.n_mor(); ++m) {
        if (cat_.is_identity(m)) continue;
        int d = cat_.dom(m), e = cat_.cod(m);
        for (int x = 0; x < X.card(d); ++x) {
            int a = X.offset(d) + x, b = X.offset(e) + X.act(m, x);
            if (a != b) succ[a].push_back(b);
        }
    }
    std::vector<Sub> out;
    std::vector<signed char> state(N, -1);  // -1 unknown, 0 out, 1 in
    std::function<void(int)> rec = [&](int p) {
        if (p == N) {
            Sub s{X, std::vector<char>(N)};
            for (int i = 0; i < N; ++i) s.bits[i] = state[i] == 1;
            out.push_back(std::move(s));
            return;
        }
        if (state[p] != -1) {
            rec(p + 1);
            return;
        }
        state[p] = 0;
        rec(p + 1);
        // include p and its closure
        std::vector<int> changed;
        std::vector<int> stack{p};
        bool ok = true;
        while (!stack.empty() && ok) {
            int a = stack.back();
            stack.pop_back();
            if (state[a] == 1) continue;
            if (state[a] == 0 && a != p) {
                ok = false;
                break;
            }
            state[a] = 1;
            changed.push_back(a);
            for (int b : succ[a]) stack.push_back(b);
        }
        if (ok) rec(p + 1);
        for (int a : changed) state[a] = -1;
        state[p] = -1;
    };
    rec(0);
    std::sort(out.begin(), out.end(), [](const Sub& a, const Sub& b) { return mask_less(a.bits, b.bits); });
    return out;
}

std::vector<Mor> Topos::global_elements(const Obj& X) const { return morphisms(terminal(), X); }

// ---------------------------------------------------------------- well-pointedness

std::string describe(const FinCat& C, const Obj& A) {
    std::ostringstream os;
    os << "(";
    for (int c = 0; c < C.n_obj(); ++c) os << (c ? "," : "") << C.objects[c] << ":" << A.card(c);
    for (int m = 0; m < C.n_mor(); ++m) {
        if (C.is_identity(m) || A.act(m).empty()) continue;
        os << "; " << C.arrows[m].name << "=[" << join_ints(A.act(m)) << "]";
    }
    os << ")";
    return os.str();
}

WellPointedReport check_wellpointed(const Handle& h, int bound) {
    WellPointedReport r;
    r.bound = bound;
    r.strong_generator = {"strong_generator", true, ""};
    r.projective = {"projective", true, ""};
    r.indecomposable = {"indecomposable", true, ""};
    r.nonempty = {"nonempty", true, ""};
    const FinCat& C = h->index();
    const auto& objs = h->objects_up_to(bound);
    for (const Obj& X : objs) {
        if (!r.strong_generator.verified) break;
        auto pts = h->global_elements(X);
        for (const Sub& S : h->subobjects(X)) {
            if (S == h->top(X)) continue;
            bool all = true;
            for (const Mor& x : pts)
                if (!h->factors_through(x, S)) {
                    all = false;
                    break;
                }
            if (all) {
                auto [A, m] = h->sub_object(S);
                r.strong_generator.verified = false;
                r.strong_generator.witness = describe(C, A) + " >-> " + describe(C, X) +
                                             " is bijective on global elements but not invertible";
                break;
            }
        }
    }
    for (const Obj& X : objs) {
        if (!h->is_epi(h->to_terminal(X))) continue;
        if (h->global_elements(X).empty()) {
            r.projective.verified = false;
            r.projective.witness = describe(C, X) + " ->> 1 has no section";
            break;
        }
    }
    const Obj one = h->terminal();
    const auto subs = h->subobjects(one);
    const Sub t = h->top(one);
    for (const Sub& a : subs) {
        for (const Sub& b : subs)
            if (h->join(a, b) == t && a != t && b != t) {
                r.indecomposable.verified = false;
                r.indecomposable.witness = "1 = " + a.key() + " u " + b.key();
                break;
            }
        if (!r.indecomposable.verified) break;
    }
    if (!h->morphisms(one, h->initial()).empty()) {
        r.nonempty.verified = false;
        r.nonempty.witness = "1 -> 0 exists";
    }
    return r;
}

}  // namespace stacksem

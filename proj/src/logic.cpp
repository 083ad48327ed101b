#include "stacksem/logic.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>

namespace stacksem {

// ------------------------------------------------------------------ builders

namespace fm {
namespace {
FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
FormulaPtr binary(FKind k, FormulaPtr a, FormulaPtr b) {
    Formula f;
    f.kind = k;
    f.a = std::move(a);
    f.b = std::move(b);
    return make(std::move(f));
}
FormulaPtr binder(FKind k, std::string v, ObjTerm dom, ObjTerm cod, FormulaPtr body) {
    Formula f;
    f.kind = k;
    f.var = std::move(v);
    f.dom = std::move(dom);
    f.cod = std::move(cod);
    f.a = std::move(body);
    return make(std::move(f));
}
}  // namespace

FormulaPtr top() { return make(Formula{}); }
FormulaPtr bot() {
    Formula f;
    f.kind = FKind::False;
    return make(std::move(f));
}
FormulaPtr eq(ArrTerm l, ArrTerm r) {
    Formula f;
    f.kind = FKind::Eq;
    f.lhs = std::move(l);
    f.rhs = std::move(r);
    return make(std::move(f));
}
FormulaPtr conj(FormulaPtr a, FormulaPtr b) { return binary(FKind::And, std::move(a), std::move(b)); }
FormulaPtr disj(FormulaPtr a, FormulaPtr b) { return binary(FKind::Or, std::move(a), std::move(b)); }
FormulaPtr implies(FormulaPtr a, FormulaPtr b) { return binary(FKind::Implies, std::move(a), std::move(b)); }
FormulaPtr neg(FormulaPtr a) { return binary(FKind::Not, std::move(a), nullptr); }
FormulaPtr exists_obj(std::string v, FormulaPtr body) {
    return binder(FKind::ExistsObj, std::move(v), {}, {}, std::move(body));
}
FormulaPtr forall_obj(std::string v, FormulaPtr body) {
    return binder(FKind::ForallObj, std::move(v), {}, {}, std::move(body));
}
FormulaPtr exists_arr(std::string v, ObjTerm dom, ObjTerm cod, FormulaPtr body) {
    return binder(FKind::ExistsArr, std::move(v), std::move(dom), std::move(cod), std::move(body));
}
FormulaPtr forall_arr(std::string v, ObjTerm dom, ObjTerm cod, FormulaPtr body) {
    return binder(FKind::ForallArr, std::move(v), std::move(dom), std::move(cod), std::move(body));
}
ArrTerm term(std::initializer_list<std::string> names) {
    ArrTerm t;
    for (const auto& n : names) t.factors.push_back(Factor{false, n, {}, -1});
    return t;
}
}  // namespace fm

bool same_formula(const FormulaPtr& x, const FormulaPtr& y) {
    if (!x || !y) return !x && !y;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
        case FKind::True:
        case FKind::False: return true;
        case FKind::Eq: return x->lhs == y->lhs && x->rhs == y->rhs;
        case FKind::And:
        case FKind::Or:
        case FKind::Implies: return same_formula(x->a, y->a) && same_formula(x->b, y->b);
        case FKind::Not: return same_formula(x->a, y->a);
        default:
            return x->var == y->var && x->dom == y->dom && x->cod == y->cod && same_formula(x->a, y->a);
    }
}

bool Signature::has_object(const std::string& n) const {
    return std::find(objects.begin(), objects.end(), n) != objects.end();
}

const Signature::ArrowSig* Signature::arrow(const std::string& n) const {
    for (const auto& a : arrows)
        if (a.name == n) return &a;
    return nullptr;
}

// ------------------------------------------------------------------- lexing

namespace {

const std::set<std::string>& keywords() {
    static const std::set<std::string> k{"forall", "exists", "and", "or", "not", "true", "false", "o", "id"};
    return k;
}

enum class Tok { Ident, One, LParen, RParen, Dot, Comma, Colon, Arrow, Eq, Implies, Iff, LBrack, RBrack, End };

struct Token {
    Tok kind;
    std::string text;
    int pos;
};

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < s.size()) {
        unsigned char ch = static_cast<unsigned char>(s[i]);
        int pos = static_cast<int>(i);
        if (std::isspace(ch)) {
            ++i;
            continue;
        }
        if (std::isalpha(ch) || ch == '_') {
            size_t j = i;
            while (j < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '\''))
                ++j;
            out.push_back({Tok::Ident, s.substr(i, j - i), pos});
            i = j;
            continue;
        }
        auto starts = [&](const char* p) { return s.compare(i, std::char_traits<char>::length(p), p) == 0; };
        if (starts("<=>")) {
            out.push_back({Tok::Iff, "<=>", pos});
            i += 3;
        } else if (starts("=>")) {
            out.push_back({Tok::Implies, "=>", pos});
            i += 2;
        } else if (starts("->")) {
            out.push_back({Tok::Arrow, "->", pos});
            i += 2;
        } else {
            Tok k;
            switch (ch) {
                case '1': k = Tok::One; break;
                case '(': k = Tok::LParen; break;
                case ')': k = Tok::RParen; break;
                case '.': k = Tok::Dot; break;
                case ',': k = Tok::Comma; break;
                case ':': k = Tok::Colon; break;
                case '=': k = Tok::Eq; break;
                case '[': k = Tok::LBrack; break;
                case ']': k = Tok::RBrack; break;
                default: throw ParseError(std::string("unexpected character '") + s[i] + "'", pos);
            }
            if (k == Tok::One && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))
                throw ParseError("only the numeral 1 is an object term", pos);
            out.push_back({k, std::string(1, s[i]), pos});
            ++i;
        }
    }
    out.push_back({Tok::End, "", static_cast<int>(s.size())});
    return out;
}

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(lex(text)) {}

    FormulaPtr run() {
        auto f = formula();
        if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
        return f;
    }

private:
    std::vector<Token> toks_;
    size_t at_ = 0;

    const Token& peek() const { return toks_[at_]; }
    bool is_kw(const char* w) const { return peek().kind == Tok::Ident && peek().text == w; }
    Token take() { return toks_[at_++]; }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, peek().pos);
    }
    void expect(Tok k, const char* what) {
        if (peek().kind != k) fail(std::string("expected ") + what);
        ++at_;
    }
    std::string name(const char* what) {
        if (peek().kind != Tok::Ident || keywords().count(peek().text)) fail(std::string("expected ") + what);
        return take().text;
    }

    FormulaPtr with_pos(FormulaPtr f, int pos) {
        auto g = std::make_shared<Formula>(*f);
        g->pos = pos;
        return g;
    }

    FormulaPtr formula() {
        int pos = peek().pos;
        auto a = implication();
        if (peek().kind == Tok::Iff) {
            ++at_;
            auto b = implication();
            return with_pos(fm::conj(fm::implies(a, b), fm::implies(b, a)), pos);
        }
        return a;
    }

    FormulaPtr implication() {
        int pos = peek().pos;
        auto a = disjunction();
        if (peek().kind == Tok::Implies) {
            ++at_;
            return with_pos(fm::implies(a, implication()), pos);
        }
        return a;
    }

    FormulaPtr disjunction() {
        int pos = peek().pos;
        auto a = conjunction();
        while (is_kw("or")) {
            ++at_;
            a = with_pos(fm::disj(a, conjunction()), pos);
        }
        return a;
    }

    FormulaPtr conjunction() {
        int pos = peek().pos;
        auto a = unary();
        while (is_kw("and")) {
            ++at_;
            a = with_pos(fm::conj(a, unary()), pos);
        }
        return a;
    }

    FormulaPtr unary() {
        int pos = peek().pos;
        if (is_kw("not")) {
            ++at_;
            return with_pos(fm::neg(unary()), pos);
        }
        if (is_kw("forall") || is_kw("exists")) return quantifier();
        return atom();
    }

    FormulaPtr quantifier() {
        int pos = peek().pos;
        bool all = take().text == "forall";
        std::vector<std::pair<std::string, int>> vars;
        do {
            int vp = peek().pos;
            vars.emplace_back(name("variable"), vp);
        } while (peek().kind == Tok::Comma && (++at_, true));
        bool arrow = false;
        ObjTerm dom, cod;
        if (peek().kind == Tok::Colon) {
            ++at_;
            arrow = true;
            dom = objterm();
            expect(Tok::Arrow, "'->'");
            cod = objterm();
        }
        expect(Tok::Dot, "'.'");
        auto body = formula();
        for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
            FormulaPtr f = arrow ? (all ? fm::forall_arr(it->first, dom, cod, body)
                                        : fm::exists_arr(it->first, dom, cod, body))
                                 : (all ? fm::forall_obj(it->first, body) : fm::exists_obj(it->first, body));
            body = with_pos(f, it == vars.rend() - 1 ? pos : it->second);
        }
        return body;
    }

    ObjTerm objterm() {
        if (peek().kind == Tok::One) {
            ++at_;
            return ObjTerm::terminal();
        }
        return ObjTerm::named(name("object term"));
    }

    bool starts_factor() const {
        return peek().kind == Tok::Ident && (is_kw("id") || !keywords().count(peek().text));
    }

    Factor factor() {
        int pos = peek().pos;
        if (is_kw("id")) {
            ++at_;
            expect(Tok::LBrack, "'['");
            ObjTerm o = objterm();
            expect(Tok::RBrack, "']'");
            return Factor{true, "", o, pos};
        }
        return Factor{false, name("arrow term"), {}, pos};
    }

    ArrTerm arrterm() {
        ArrTerm t;
        if (!starts_factor()) fail("expected formula");
        t.factors.push_back(factor());
        while (true) {
            if (is_kw("o")) {
                ++at_;
                t.factors.push_back(factor());
            } else if (starts_factor()) {
                t.factors.push_back(factor());
            } else {
                break;
            }
        }
        return t;
    }

    FormulaPtr atom() {
        int pos = peek().pos;
        if (is_kw("true")) {
            ++at_;
            return with_pos(fm::top(), pos);
        }
        if (is_kw("false")) {
            ++at_;
            return with_pos(fm::bot(), pos);
        }
        if (peek().kind == Tok::LParen) {
            ++at_;
            auto f = formula();
            expect(Tok::RParen, "')'");
            return f;
        }
        if (peek().kind == Tok::One) fail("objects cannot be compared for equality");
        auto l = arrterm();
        expect(Tok::Eq, "'='");
        if (peek().kind == Tok::One) fail("objects cannot be compared for equality");
        auto r = arrterm();
        return with_pos(fm::eq(std::move(l), std::move(r)), pos);
    }
};

// ------------------------------------------------------------------ typing

struct Binding {
    bool obj = true;
    ObjTerm dom, cod;
};

using Scope = std::map<std::string, Binding>;

Scope scope_of(const Signature& sig) {
    Scope s;
    for (const auto& o : sig.objects) s[o] = Binding{};
    for (const auto& a : sig.arrows) s[a.name] = Binding{false, a.dom, a.cod};
    return s;
}

void check_obj(const ObjTerm& t, const Scope& sc, int pos) {
    if (t.one) return;
    auto it = sc.find(t.name);
    if (it == sc.end()) throw TypeError("unbound object '" + t.name + "'", pos);
    if (!it->second.obj) throw TypeError("'" + t.name + "' is an arrow, not an object", pos);
}

std::pair<ObjTerm, ObjTerm> type_of(const ArrTerm& t, const Scope& sc) {
    std::optional<std::pair<ObjTerm, ObjTerm>> acc;
    for (auto it = t.factors.rbegin(); it != t.factors.rend(); ++it) {
        std::pair<ObjTerm, ObjTerm> ft;
        if (it->is_id) {
            check_obj(it->obj, sc, it->pos);
            ft = {it->obj, it->obj};
        } else {
            auto b = sc.find(it->name);
            if (b == sc.end()) throw TypeError("unbound variable '" + it->name + "'", it->pos);
            if (b->second.obj)
                throw TypeError("'" + it->name + "' is an object; objects cannot be compared for equality", it->pos);
            ft = {b->second.dom, b->second.cod};
        }
        if (acc) {
            if (ft.first != acc->second)
                throw TypeError("cannot compose " + ft.first.str() + " -> " + ft.second.str() + " after " +
                                    acc->first.str() + " -> " + acc->second.str(),
                                it->pos);
            acc->second = ft.second;
        } else {
            acc = ft;
        }
    }
    return *acc;
}

void check(const Formula& f, Scope& sc) {
    switch (f.kind) {
        case FKind::True:
        case FKind::False: return;
        case FKind::Eq: {
            auto l = type_of(f.lhs, sc);
            auto r = type_of(f.rhs, sc);
            if (l != r)
                throw TypeError("equality between non-parallel arrows " + l.first.str() + " -> " + l.second.str() +
                                    " and " + r.first.str() + " -> " + r.second.str(),
                                f.pos);
            return;
        }
        case FKind::And:
        case FKind::Or:
        case FKind::Implies:
            check(*f.a, sc);
            check(*f.b, sc);
            return;
        case FKind::Not: check(*f.a, sc); return;
        default: {
            if (sc.count(f.var)) throw TypeError("variable '" + f.var + "' shadows an existing name", f.pos);
            Binding b;
            if (f.kind == FKind::ExistsArr || f.kind == FKind::ForallArr) {
                check_obj(f.dom, sc, f.pos);
                check_obj(f.cod, sc, f.pos);
                b = Binding{false, f.dom, f.cod};
            }
            sc[f.var] = b;
            check(*f.a, sc);
            sc.erase(f.var);
        }
    }
}

// ---------------------------------------------------------------- printing

int prec(FKind k) {
    switch (k) {
        case FKind::Implies: return 1;
        case FKind::Or: return 2;
        case FKind::And: return 3;
        case FKind::Not: return 4;
        case FKind::True:
        case FKind::False:
        case FKind::Eq: return 5;
        default: return 0;
    }
}

void print_to(std::ostream& os, const Formula& f, int min_prec, bool tail) {
    bool paren = f.is_quantifier() ? !tail : prec(f.kind) < min_prec;
    if (paren) {
        os << '(';
        print_to(os, f, 0, true);
        os << ')';
        return;
    }
    switch (f.kind) {
        case FKind::True: os << "true"; break;
        case FKind::False: os << "false"; break;
        case FKind::Eq: os << print(f.lhs) << " = " << print(f.rhs); break;
        case FKind::And:
            print_to(os, *f.a, 3, false);
            os << " and ";
            print_to(os, *f.b, 4, tail);
            break;
        case FKind::Or:
            print_to(os, *f.a, 2, false);
            os << " or ";
            print_to(os, *f.b, 3, tail);
            break;
        case FKind::Implies:
            print_to(os, *f.a, 2, false);
            os << " => ";
            print_to(os, *f.b, 1, tail);
            break;
        case FKind::Not:
            os << "not ";
            print_to(os, *f.a, 4, tail);
            break;
        default: {
            bool all = f.kind == FKind::ForallObj || f.kind == FKind::ForallArr;
            os << (all ? "forall " : "exists ") << f.var;
            if (f.kind == FKind::ExistsArr || f.kind == FKind::ForallArr)
                os << ": " << f.dom.str() << " -> " << f.cod.str();
            os << ". ";
            print_to(os, *f.a, 0, true);
        }
    }
}

}  // namespace

FormulaPtr parse_raw(const std::string& text) { return Parser(text).run(); }

FormulaPtr parse(const std::string& text, const Signature& sig) {
    auto f = parse_raw(text);
    typecheck(f, sig);
    return f;
}

void typecheck(const FormulaPtr& phi, const Signature& sig) {
    Scope sc = scope_of(sig);
    check(*phi, sc);
}

std::string print(const ArrTerm& t) {
    std::string s;
    for (size_t i = 0; i < t.factors.size(); ++i) {
        if (i) s += " o ";
        const auto& f = t.factors[i];
        s += f.is_id ? "id[" + f.obj.str() + "]" : f.name;
    }
    return s;
}

std::string print(const FormulaPtr& phi) {
    std::ostringstream os;
    print_to(os, *phi, 0, true);
    return os.str();
}

FormulaPtr substitute(const FormulaPtr& phi, const std::map<std::string, std::string>& renaming) {
    std::set<std::string> targets;
    for (const auto& [from, to] : renaming) targets.insert(to);
    std::function<FormulaPtr(const FormulaPtr&, std::set<std::string>&)> rec =
        [&](const FormulaPtr& f, std::set<std::string>& bound) -> FormulaPtr {
        auto rename = [&](const std::string& n) {
            auto it = renaming.find(n);
            return it == renaming.end() || bound.count(n) ? n : it->second;
        };
        auto obj = [&](ObjTerm o) {
            if (!o.one) o.name = rename(o.name);
            return o;
        };
        auto term = [&](ArrTerm t) {
            for (auto& fac : t.factors) {
                if (fac.is_id)
                    fac.obj = obj(fac.obj);
                else
                    fac.name = rename(fac.name);
            }
            return t;
        };
        auto g = std::make_shared<Formula>(*f);
        switch (f->kind) {
            case FKind::True:
            case FKind::False: return f;
            case FKind::Eq:
                g->lhs = term(f->lhs);
                g->rhs = term(f->rhs);
                return g;
            case FKind::And:
            case FKind::Or:
            case FKind::Implies:
                g->a = rec(f->a, bound);
                g->b = rec(f->b, bound);
                return g;
            case FKind::Not: g->a = rec(f->a, bound); return g;
            default: {
                if (targets.count(f->var)) throw TypeError("substitution would capture '" + f->var + "'", f->pos);
                g->dom = obj(f->dom);
                g->cod = obj(f->cod);
                bool fresh = bound.insert(f->var).second;
                g->a = rec(f->a, bound);
                if (fresh) bound.erase(f->var);
                return g;
            }
        }
    };
    std::set<std::string> bound;
    return rec(phi, bound);
}

// --------------------------------------------------------------- environment

const Env::Entry* Env::find(const std::string& n) const {
    for (const auto& e : entries)
        if (e.name == n) return &e;
    return nullptr;
}

Env Env::with_obj(const std::string& n, Obj o) const {
    Env e = *this;
    e.entries.push_back(Entry{n, true, std::move(o), {}, {}, {}});
    return e;
}

Env Env::with_arr(const std::string& n, Mor m, ObjTerm dom, ObjTerm cod) const {
    Env e = *this;
    e.entries.push_back(Entry{n, false, {}, std::move(m), std::move(dom), std::move(cod)});
    return e;
}

Signature Env::signature() const {
    Signature s;
    for (const auto& e : entries) {
        if (e.is_obj)
            s.objects.push_back(e.name);
        else
            s.arrows.push_back({e.name, e.dom, e.cod});
    }
    return s;
}

Obj Env::resolve(const ObjTerm& t) const {
    if (t.one) return h->terminal();
    const Entry* e = find(t.name);
    if (!e || !e->is_obj) throw TypeError("unbound object '" + t.name + "'", -1);
    return e->obj;
}

Mor Env::eval(const ArrTerm& t) const {
    auto value = [&](const Factor& f) -> Mor {
        if (f.is_id) return h->identity(resolve(f.obj));
        const Entry* e = find(f.name);
        if (!e || e->is_obj) throw TypeError("unbound arrow '" + f.name + "'", f.pos);
        return e->mor;
    };
    Mor acc = value(t.factors.back());
    for (int i = static_cast<int>(t.factors.size()) - 2; i >= 0; --i) acc = h->compose(value(t.factors[i]), acc);
    return acc;
}

std::string Env::key() const {
    std::string k;
    for (const auto& e : entries) {
        k += e.name;
        k += e.is_obj ? '=' : ':';
        k += e.is_obj ? e.obj.key() : e.mor.key();
        k += ';';
    }
    return k;
}

void Env::check() const {
    for (const auto& e : entries) {
        if (e.is_obj) {
            if (!h->is_object(e.obj)) throw TypeError("value of '" + e.name + "' is not an object", -1);
            continue;
        }
        if (e.mor.dom != resolve(e.dom) || e.mor.cod != resolve(e.cod) || !h->is_morphism(e.mor))
            throw TypeError("value of '" + e.name + "' is not an arrow " + e.dom.str() + " -> " + e.cod.str(), -1);
    }
}

namespace {

Env reindex_env(const Env& env, const Functor& F, const Handle& target) {
    Env out;
    out.h = target;
    for (const auto& e : env.entries) {
        Env::Entry n = e;
        if (e.is_obj)
            n.obj = reindex(e.obj, F, target->index());
        else
            n.mor = reindex(e.mor, F, target->index());
        out.entries.push_back(std::move(n));
    }
    return out;
}

}  // namespace

Sentence over(const Handle& base, const Obj& U, FormulaPtr phi, const Env& base_env) {
    base_env.check();
    typecheck(phi, base_env.signature());
    Handle T = base->slice(U);
    Env env = reindex_env(base_env, elements_projection(base->index(), U), T);
    return Sentence{base, U, std::move(phi), std::move(env)};
}

Env pull_env(const Handle& base, const Mor& p, const Env& env) {
    return reindex_env(env, elements_functor(base->index(), p), base->slice(p.dom));
}

Sentence pullback_formula(const Mor& p, const Sentence& s) {
    if (p.cod != s.U) throw CatError("pullback map does not land in the base of the sentence");
    if (!s.base->is_morphism(p)) throw CatError("pullback map is not a morphism of the handle");
    return Sentence{s.base, p.dom, s.phi, pull_env(s.base, p, s.env)};
}

Sentence isomorph(const Sentence& s, const std::map<std::string, Mor>& isos) {
    const Handle& T = s.env.h;
    std::map<std::string, Mor> inv;
    for (const auto& [name, iso] : isos) {
        const Env::Entry* e = s.env.find(name);
        if (!e || !e->is_obj) throw TypeError("'" + name + "' is not an object parameter", -1);
        if (iso.dom != e->obj) throw TypeError("iso for '" + name + "' has the wrong domain", -1);
        auto j = T->inverse(iso);
        if (!j) throw CatError("map supplied for '" + name + "' is not an isomorphism");
        inv.emplace(name, *j);
    }
    Sentence out = s;
    auto forward = [&](const ObjTerm& o, const Mor& f) {
        if (o.one || !isos.count(o.name)) return f;
        return T->compose(isos.at(o.name), f);
    };
    auto backward = [&](const ObjTerm& o, const Mor& f) {
        if (o.one || !inv.count(o.name)) return f;
        return T->compose(f, inv.at(o.name));
    };
    for (auto& e : out.env.entries) {
        if (e.is_obj) {
            if (isos.count(e.name)) e.obj = isos.at(e.name).cod;
        } else {
            e.mor = backward(e.dom, forward(e.cod, e.mor));
        }
    }
    return out;
}

// ----------------------------------------------------------------------- Δ0

bool is_delta0(const FormulaPtr& phi, const Signature& sig) {
    Scope sc = scope_of(sig);
    std::function<bool(const Formula&)> rec = [&](const Formula& f) -> bool {
        switch (f.kind) {
            case FKind::True:
            case FKind::False: return true;
            case FKind::Eq: return type_of(f.lhs, sc).first.one;
            case FKind::And:
            case FKind::Or:
            case FKind::Implies: return rec(*f.a) && rec(*f.b);
            case FKind::Not: return rec(*f.a);
            case FKind::ExistsArr:
            case FKind::ForallArr: {
                if (!f.dom.one) return false;
                sc[f.var] = Binding{false, f.dom, f.cod};
                bool r = rec(*f.a);
                sc.erase(f.var);
                return r;
            }
            default: return false;
        }
    };
    return rec(*phi);
}

namespace {

struct Context {
    Obj P;
    std::map<std::string, Mor> proj;
};

Mor term_map(const ArrTerm& t, const Context& ctx, const Env& env) {
    const Handle& h = env.h;
    std::optional<Mor> cur;
    for (auto it = t.factors.rbegin(); it != t.factors.rend(); ++it) {
        if (it->is_id) {
            if (!cur) cur = h->to_terminal(ctx.P);
            continue;
        }
        auto v = ctx.proj.find(it->name);
        if (v != ctx.proj.end()) {
            cur = v->second;
            continue;
        }
        const Env::Entry* e = env.find(it->name);
        if (!e || e->is_obj) throw TypeError("unbound arrow '" + it->name + "'", it->pos);
        cur = h->compose(e->mor, cur ? *cur : h->to_terminal(ctx.P));
    }
    return *cur;
}

Sub classify_rec(const Formula& f, const Context& ctx, const Env& env) {
    const Handle& h = env.h;
    switch (f.kind) {
        case FKind::True: return h->top(ctx.P);
        case FKind::False: return h->bottom(ctx.P);
        case FKind::Eq: return h->equalizer(term_map(f.lhs, ctx, env), term_map(f.rhs, ctx, env));
        case FKind::And: return h->meet(classify_rec(*f.a, ctx, env), classify_rec(*f.b, ctx, env));
        case FKind::Or: return h->join(classify_rec(*f.a, ctx, env), classify_rec(*f.b, ctx, env));
        case FKind::Implies: return h->implies(classify_rec(*f.a, ctx, env), classify_rec(*f.b, ctx, env));
        case FKind::Not: return h->implies(classify_rec(*f.a, ctx, env), h->bottom(ctx.P));
        case FKind::ExistsArr:
        case FKind::ForallArr: {
            auto span = h->product(ctx.P, env.resolve(f.cod));
            Context inner{span.obj, {}};
            for (const auto& [n, m] : ctx.proj) inner.proj.emplace(n, h->compose(m, span.p1));
            inner.proj.emplace(f.var, span.p2);
            Sub body = classify_rec(*f.a, inner, env);
            return f.kind == FKind::ExistsArr ? h->image_sub(span.p1, body) : h->dual_image(span.p1, body);
        }
        default: throw TypeError("object quantifier in a Delta0 formula", f.pos);
    }
}

}  // namespace

Sub classify_in(const Env& env, const FormulaPtr& phi) {
    if (!is_delta0(phi, env.signature())) throw TypeError("formula is not Delta0", phi->pos);
    Context ctx{env.h->terminal(), {}};
    return classify_rec(*phi, ctx, env);
}

Sub classify_delta0(const Sentence& s) {
    Sub r = classify_in(s.env, s.phi);
    return Sub{s.U, r.bits};
}

namespace {

// Kripke-Joyal at representable stages of a presheaf topos; variables are elements.
class KJ {
public:
    explicit KJ(const Env& env) : env_(env), D_(env.h->index()) {}

    bool holds(const Formula& f, int d, const std::map<std::string, int>& asg) const {
        switch (f.kind) {
            case FKind::True: return true;
            case FKind::False: return false;
            case FKind::Eq: return value(f.lhs, d, asg) == value(f.rhs, d, asg);
            case FKind::And: return holds(*f.a, d, asg) && holds(*f.b, d, asg);
            case FKind::Or: return holds(*f.a, d, asg) || holds(*f.b, d, asg);
            case FKind::Implies:
            case FKind::Not:
                for (int m : D_.out(d)) {
                    auto moved = push(asg, m);
                    int e = D_.cod(m);
                    if (holds(*f.a, e, moved) && (f.kind == FKind::Not || !holds(*f.b, e, moved))) return false;
                }
                return true;
            case FKind::ExistsArr: {
                Obj X = env_.resolve(f.cod);
                for (int x = 0; x < X.card(d); ++x) {
                    auto a = asg;
                    a[f.var] = x;
                    types_[f.var] = X;
                    if (holds(*f.a, d, a)) return true;
                }
                return false;
            }
            case FKind::ForallArr: {
                Obj X = env_.resolve(f.cod);
                types_[f.var] = X;
                for (int m : D_.out(d)) {
                    int e = D_.cod(m);
                    auto moved = push(asg, m);
                    for (int x = 0; x < X.card(e); ++x) {
                        auto a = moved;
                        a[f.var] = x;
                        if (!holds(*f.a, e, a)) return false;
                    }
                }
                return true;
            }
            default: throw TypeError("object quantifier in a Delta0 formula", f.pos);
        }
    }

private:
    const Env& env_;
    const FinCat& D_;
    mutable std::map<std::string, Obj> types_;

    std::map<std::string, int> push(const std::map<std::string, int>& asg, int m) const {
        std::map<std::string, int> out;
        for (const auto& [n, x] : asg) out[n] = types_.at(n).act(m, x);
        return out;
    }

    int value(const ArrTerm& t, int d, const std::map<std::string, int>& asg) const {
        int cur = 0;  // the unique element of 1 at d
        for (auto it = t.factors.rbegin(); it != t.factors.rend(); ++it) {
            if (it->is_id) continue;
            auto v = asg.find(it->name);
            if (v != asg.end()) {
                cur = v->second;
                continue;
            }
            cur = env_.find(it->name)->mor(d, cur);
        }
        return cur;
    }
};

}  // namespace

Sub kripke_joyal(const Sentence& s) {
    if (!is_delta0(s.phi, s.env.signature())) throw TypeError("formula is not Delta0", s.phi->pos);
    KJ kj(s.env);
    Sub out{s.U, std::vector<char>(s.U.total(), 0)};
    for (int d = 0; d < s.U.total(); ++d) out.bits[d] = kj.holds(*s.phi, d, {}) ? 1 : 0;
    return out;
}

// ---------------------------------------------------------- internal logic

namespace {

IFormulaPtr imake(IFormula f) { return std::make_shared<const IFormula>(std::move(f)); }

std::string print_term(const ITerm& t) {
    if (t.is_var) return t.name;
    std::string s = t.name;
    if (t.args.empty()) return s;
    s += '(';
    for (size_t i = 0; i < t.args.size(); ++i) {
        if (i) s += ", ";
        s += print_term(t.args[i]);
    }
    return s + ')';
}

void iprint(std::ostream& os, const IFormula& f) {
    using K = IFormula::Kind;
    switch (f.kind) {
        case K::True: os << "true"; break;
        case K::False: os << "false"; break;
        case K::Eq: os << print_term(f.l) << " = " << print_term(f.r); break;
        case K::Rel:
            os << f.rel << '(';
            for (size_t i = 0; i < f.args.size(); ++i) os << (i ? ", " : "") << print_term(f.args[i]);
            os << ')';
            break;
        case K::And:
        case K::Or:
        case K::Implies:
            os << '(';
            iprint(os, *f.a);
            os << (f.kind == K::And ? " and " : f.kind == K::Or ? " or " : " => ");
            iprint(os, *f.b);
            os << ')';
            break;
        case K::Not:
            os << "not ";
            iprint(os, *f.a);
            break;
        case K::Exists:
        case K::Forall:
            os << '(' << (f.kind == K::Exists ? "exists " : "forall ") << f.var << " in " << f.type << ". ";
            iprint(os, *f.a);
            os << ')';
    }
}

const char* kUnit = "!";

ITerm to_iterm(const ArrTerm& t, const std::set<std::string>& vars) {
    ITerm cur{false, kUnit, {}};
    for (auto it = t.factors.rbegin(); it != t.factors.rend(); ++it) {
        if (it->is_id) continue;
        if (vars.count(it->name)) {
            cur = ITerm{true, it->name, {}};
        } else if (!cur.is_var && cur.name == kUnit) {
            cur = ITerm{false, it->name, {}};
        } else {
            cur = ITerm{false, it->name, {std::move(cur)}};
        }
    }
    return cur;
}

IFormulaPtr to_internal_rec(const Formula& f, std::set<std::string>& vars) {
    using K = IFormula::Kind;
    IFormula o;
    switch (f.kind) {
        case FKind::True: o.kind = K::True; break;
        case FKind::False: o.kind = K::False; break;
        case FKind::Eq:
            o.kind = K::Eq;
            o.l = to_iterm(f.lhs, vars);
            o.r = to_iterm(f.rhs, vars);
            break;
        case FKind::And:
        case FKind::Or:
        case FKind::Implies:
            o.kind = f.kind == FKind::And ? K::And : f.kind == FKind::Or ? K::Or : K::Implies;
            o.a = to_internal_rec(*f.a, vars);
            o.b = to_internal_rec(*f.b, vars);
            break;
        case FKind::Not:
            o.kind = K::Not;
            o.a = to_internal_rec(*f.a, vars);
            break;
        case FKind::ExistsArr:
        case FKind::ForallArr:
            o.kind = f.kind == FKind::ExistsArr ? K::Exists : K::Forall;
            o.var = f.var;
            o.type = f.cod.str();
            vars.insert(f.var);
            o.a = to_internal_rec(*f.a, vars);
            vars.erase(f.var);
            break;
        default: throw TypeError("object quantifier in a Delta0 formula", f.pos);
    }
    return imake(std::move(o));
}

void collect_names(const IFormula& f, std::set<std::string>& out) {
    std::function<void(const ITerm&)> term = [&](const ITerm& t) {
        out.insert(t.name);
        for (const auto& a : t.args) term(a);
    };
    term(f.l);
    term(f.r);
    for (const auto& a : f.args) term(a);
    if (!f.var.empty()) out.insert(f.var);
    if (f.a) collect_names(*f.a, out);
    if (f.b) collect_names(*f.b, out);
}

class Externalizer {
public:
    Externalizer(const InternalSig& isig, const Signature& sig, std::set<std::string> used)
        : isig_(isig), sig_(sig), used_(std::move(used)) {
        for (const auto& o : sig.objects) used_.insert(o);
        for (const auto& a : sig.arrows) used_.insert(a.name);
    }

    FormulaPtr run(const IFormula& f) {
        using K = IFormula::Kind;
        switch (f.kind) {
            case K::True: return fm::top();
            case K::False: return fm::bot();
            case K::Eq: {
                Pending p;
                auto l = flatten(f.l, p);
                auto r = flatten(f.r, p);
                return close(p, fm::eq(std::move(l), std::move(r)));
            }
            case K::Rel: {
                auto it = isig_.relations.find(f.rel);
                if (it == isig_.relations.end()) throw TypeError("unknown relation '" + f.rel + "'", -1);
                const auto& rel = it->second;
                if (rel.args.size() != f.args.size()) throw TypeError("arity mismatch for '" + f.rel + "'", -1);
                Pending p;
                std::string z = fresh();
                p.vars.emplace_back(z, rel.carrier);
                for (size_t i = 0; i < f.args.size(); ++i) {
                    ArrTerm lhs;
                    lhs.factors = {Factor{false, rel.projections[i], {}, -1}, Factor{false, z, {}, -1}};
                    p.conds.push_back(fm::eq(std::move(lhs), flatten(f.args[i], p)));
                }
                return close(p, nullptr);
            }
            case K::And: return fm::conj(run(*f.a), run(*f.b));
            case K::Or: return fm::disj(run(*f.a), run(*f.b));
            case K::Implies: return fm::implies(run(*f.a), run(*f.b));
            case K::Not: return fm::neg(run(*f.a));
            case K::Exists:
            case K::Forall: {
                ObjTerm cod = f.type == "1" ? ObjTerm::terminal() : ObjTerm::named(f.type);
                auto body = run(*f.a);
                return f.kind == K::Exists ? fm::exists_arr(f.var, ObjTerm::terminal(), cod, body)
                                           : fm::forall_arr(f.var, ObjTerm::terminal(), cod, body);
            }
        }
        return nullptr;
    }

private:
    struct Pending {
        std::vector<std::pair<std::string, std::string>> vars;  // fresh variable, carrier
        std::vector<FormulaPtr> conds;
    };

    const InternalSig& isig_;
    const Signature& sig_;
    std::set<std::string> used_;
    int counter_ = 0;

    std::string fresh() {
        std::string n;
        do n = "z" + std::to_string(++counter_);
        while (used_.count(n));
        used_.insert(n);
        return n;
    }

    ArrTerm flatten(const ITerm& t, Pending& p) {
        ArrTerm out;
        if (t.is_var) {
            out.factors.push_back(Factor{false, t.name, {}, -1});
            return out;
        }
        if (t.name == kUnit) {
            out.factors.push_back(Factor{true, "", ObjTerm::terminal(), -1});
            return out;
        }
        auto fn = isig_.functions.find(t.name);
        if (fn != isig_.functions.end() && fn->second.args.size() >= 2) {
            const auto& decl = fn->second;
            if (decl.args.size() != t.args.size()) throw TypeError("arity mismatch for '" + t.name + "'", -1);
            std::string z = fresh();
            p.vars.emplace_back(z, decl.product);
            for (size_t i = 0; i < t.args.size(); ++i) {
                ArrTerm lhs;
                lhs.factors = {Factor{false, decl.projections[i], {}, -1}, Factor{false, z, {}, -1}};
                p.conds.push_back(fm::eq(std::move(lhs), flatten(t.args[i], p)));
            }
            out.factors = {Factor{false, t.name, {}, -1}, Factor{false, z, {}, -1}};
            return out;
        }
        if (t.args.size() > 1) throw TypeError("unknown function symbol '" + t.name + "'", -1);
        out.factors.push_back(Factor{false, t.name, {}, -1});
        if (t.args.size() == 1) {
            ArrTerm inner = flatten(t.args[0], p);
            out.factors.insert(out.factors.end(), inner.factors.begin(), inner.factors.end());
        }
        return out;
    }

    FormulaPtr close(const Pending& p, FormulaPtr atom) {
        FormulaPtr body;
        for (const auto& c : p.conds) body = body ? fm::conj(body, c) : c;
        if (atom) body = body ? fm::conj(body, atom) : atom;
        if (!body) body = fm::top();
        for (auto it = p.vars.rbegin(); it != p.vars.rend(); ++it)
            body = fm::exists_arr(it->first, ObjTerm::terminal(), ObjTerm::named(it->second), body);
        return body;
    }
};

// Elementwise interpretation on the index category of the handle; deliberately avoids the
// topos operations used by classify_in.
class Internal {
public:
    Internal(const InternalSig& isig, const Env& env) : isig_(isig), env_(env), D_(env.h->index()) {}

    struct Ctx {
        Obj P;
        std::map<std::string, Mor> proj;
    };

    Sub run(const IFormula& f, const Ctx& ctx) const {
        using K = IFormula::Kind;
        Sub out{ctx.P, std::vector<char>(ctx.P.total(), 0)};
        auto each = [&](auto pred) {
            for (int c = 0; c < D_.n_obj(); ++c)
                for (int z = 0; z < ctx.P.card(c); ++z) out.bits[ctx.P.offset(c) + z] = pred(c, z) ? 1 : 0;
        };
        switch (f.kind) {
            case K::True: each([](int, int) { return true; }); break;
            case K::False: break;
            case K::Eq: {
                Mor l = term(f.l, ctx), r = term(f.r, ctx);
                each([&](int c, int z) { return l(c, z) == r(c, z); });
                break;
            }
            case K::Rel: {
                const auto& rel = isig_.relations.at(f.rel);
                Obj R = obj(rel.carrier);
                std::vector<Mor> proj, args;
                for (const auto& p : rel.projections) proj.push_back(arrow(p));
                for (const auto& a : f.args) args.push_back(term(a, ctx));
                each([&](int c, int z) {
                    for (int r = 0; r < R.card(c); ++r) {
                        bool ok = true;
                        for (size_t i = 0; i < proj.size() && ok; ++i) ok = proj[i](c, r) == args[i](c, z);
                        if (ok) return true;
                    }
                    return false;
                });
                break;
            }
            case K::And:
            case K::Or: {
                Sub a = run(*f.a, ctx), b = run(*f.b, ctx);
                for (size_t i = 0; i < out.bits.size(); ++i)
                    out.bits[i] = f.kind == K::And ? (a.bits[i] && b.bits[i]) : (a.bits[i] || b.bits[i]);
                break;
            }
            case K::Implies:
            case K::Not: {
                Sub a = run(*f.a, ctx);
                std::optional<Sub> b;
                if (f.kind == K::Implies) b = run(*f.b, ctx);
                each([&](int c, int z) {
                    for (int m : D_.out(c)) {
                        int e = D_.cod(m), w = ctx.P.act(m, z);
                        if (a.has(e, w) && !(b && b->has(e, w))) return false;
                    }
                    return true;
                });
                break;
            }
            case K::Exists:
            case K::Forall: {
                Obj X = f.type == "1" ? env_.h->terminal() : obj(f.type);
                auto [Q, fst, snd] = product(ctx.P, X);
                Ctx inner{Q, {}};
                for (const auto& [n, m] : ctx.proj) inner.proj.emplace(n, after(m, fst));
                inner.proj.emplace(f.var, snd);
                Sub body = run(*f.a, inner);
                each([&](int c, int z) {
                    if (f.kind == K::Exists) {
                        for (int q = 0; q < Q.card(c); ++q)
                            if (fst(c, q) == z && body.has(c, q)) return true;
                        return false;
                    }
                    for (int m : D_.out(c)) {
                        int e = D_.cod(m), w = ctx.P.act(m, z);
                        for (int q = 0; q < Q.card(e); ++q)
                            if (fst(e, q) == w && !body.has(e, q)) return false;
                    }
                    return true;
                });
                break;
            }
        }
        return out;
    }

private:
    const InternalSig& isig_;
    const Env& env_;
    const FinCat& D_;

    Obj obj(const std::string& n) const { return env_.resolve(ObjTerm::named(n)); }
    Mor arrow(const std::string& n) const {
        const Env::Entry* e = env_.find(n);
        if (!e || e->is_obj) throw TypeError("unknown function symbol '" + n + "'", -1);
        return e->mor;
    }

    // pointwise product with lexicographic pairs
    std::tuple<Obj, Mor, Mor> product(const Obj& A, const Obj& B) const {
        std::vector<int> card(D_.n_obj());
        for (int c = 0; c < D_.n_obj(); ++c) card[c] = A.card(c) * B.card(c);
        std::vector<std::vector<int>> act(D_.n_mor());
        for (int m = 0; m < D_.n_mor(); ++m) {
            int d = D_.dom(m), e = D_.cod(m);
            for (int a = 0; a < A.card(d); ++a)
                for (int b = 0; b < B.card(d); ++b) act[m].push_back(A.act(m, a) * B.card(e) + B.act(m, b));
        }
        Obj Q(card, act);
        Mor p{Q, A, {}}, q{Q, B, {}};
        p.comp.resize(D_.n_obj());
        q.comp.resize(D_.n_obj());
        for (int c = 0; c < D_.n_obj(); ++c)
            for (int a = 0; a < A.card(c); ++a)
                for (int b = 0; b < B.card(c); ++b) {
                    p.comp[c].push_back(a);
                    q.comp[c].push_back(b);
                }
        return {Q, p, q};
    }

    Mor after(const Mor& g, const Mor& f) const {
        Mor r{f.dom, g.cod, f.comp};
        for (int c = 0; c < D_.n_obj(); ++c)
            for (auto& x : r.comp[c]) x = g(c, x);
        return r;
    }

    Mor term(const ITerm& t, const Ctx& ctx) const {
        if (t.is_var) return ctx.proj.at(t.name);
        Obj one = env_.h->terminal();
        Mor bang{ctx.P, one, {}};
        for (int c = 0; c < D_.n_obj(); ++c) bang.comp.push_back(std::vector<int>(ctx.P.card(c), 0));
        if (t.name == kUnit) return bang;
        Mor f = arrow(t.name);
        if (t.args.empty()) return after(f, bang);
        if (t.args.size() == 1) return after(f, term(t.args[0], ctx));
        const auto& decl = isig_.functions.at(t.name);
        Obj Prod = obj(decl.product);
        std::vector<Mor> proj, args;
        for (const auto& p : decl.projections) proj.push_back(arrow(p));
        for (const auto& a : t.args) args.push_back(term(a, ctx));
        Mor u{ctx.P, Prod, {}};
        u.comp.resize(D_.n_obj());
        for (int c = 0; c < D_.n_obj(); ++c)
            for (int z = 0; z < ctx.P.card(c); ++z) {
                int found = -1;
                for (int w = 0; w < Prod.card(c); ++w) {
                    bool ok = true;
                    for (size_t i = 0; i < proj.size() && ok; ++i) ok = proj[i](c, w) == args[i](c, z);
                    if (!ok) continue;
                    if (found >= 0) throw CatError("'" + decl.product + "' is not a product: tuple not unique");
                    found = w;
                }
                if (found < 0) throw CatError("'" + decl.product + "' is not a product: tuple missing");
                u.comp[c].push_back(found);
            }
        return after(f, u);
    }
};

}  // namespace

std::string print(const IFormulaPtr& phi) {
    std::ostringstream os;
    iprint(os, *phi);
    return os.str();
}

IFormulaPtr to_internal(const FormulaPtr& phi, const Signature& sig) {
    if (!is_delta0(phi, sig)) throw TypeError("formula is not Delta0", phi->pos);
    std::set<std::string> vars;
    return to_internal_rec(*phi, vars);
}

FormulaPtr from_internal(const IFormulaPtr& phi, const InternalSig& isig, const Signature& sig) {
    std::set<std::string> used;
    collect_names(*phi, used);
    return Externalizer(isig, sig, std::move(used)).run(*phi);
}

Sub classify_internal(const IFormulaPtr& phi, const InternalSig& isig, const Env& env) {
    Internal in(isig, env);
    Obj one = env.h->terminal();
    return in.run(*phi, Internal::Ctx{one, {}});
}

}  // namespace stacksem

#include "stacksem/forcing.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stacksem/builtins.hpp"
#include "stacksem/generate.hpp"

namespace stacksem {

void Budget::validate() const {
    if (max_obj_size < 1 || max_cover_size < 1 || max_depth < 1)
        throw std::invalid_argument("budget fields must be at least 1");
}

std::string Verdict::str() const {
    return std::string(forced() ? "Forced" : "Refuted") + "(" + (exact() ? "Exact" : "AtBudget") + ")";
}

namespace {

using Ev = Evidence;

Verdict make(Polarity p, Exactness e, std::string rule, std::string note = {}, std::vector<EvidencePtr> children = {},
             int stage = -1) {
    auto ev = std::make_shared<Ev>();
    ev->rule = std::move(rule);
    ev->polarity = p;
    ev->exactness = e;
    ev->note = std::move(note);
    ev->children = std::move(children);
    ev->stage = stage;
    return Verdict{p, e, ev};
}

Verdict forced_exact(std::string rule, std::string note = {}) {
    return make(Polarity::Forced, Exactness::Exact, std::move(rule), std::move(note));
}

/// A child stage or witness wrapped around the verdict(s) of the body.
struct Branch {
    std::optional<Mor> stage_map;
    int stage = -1;
    std::optional<Obj> witness_obj;
    std::optional<Mor> witness_arr;
    std::string note;
};

EvidencePtr wrap(const Branch& b, Polarity p, Exactness e, std::vector<EvidencePtr> children) {
    auto ev = std::make_shared<Ev>();
    ev->rule = "branch";
    ev->polarity = p;
    ev->exactness = e;
    ev->stage = b.stage;
    ev->stage_map = b.stage_map;
    ev->witness_obj = b.witness_obj;
    ev->witness_arr = b.witness_arr;
    ev->note = b.note;
    ev->children = std::move(children);
    return ev;
}

EvidencePtr wrap(const Branch& b, const Verdict& v) { return wrap(b, v.polarity, v.exactness, {v.evidence}); }

/// Outcome of one branch of a universal clause.
enum class Status { ExactOk, BudgetOk, BudgetFail, ExactFail };

struct Outcome {
    Status status;
    EvidencePtr evidence;
};

/// Run n branch thunks, sequentially with early exit or concurrently, and merge in order.
template <class Fn>
std::vector<Outcome> run_branches(int n, int threads, Fn&& fn, Status stop) {
    std::vector<Outcome> out;
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) {
            out.push_back(fn(i));
            if (out.back().status == stop) break;
        }
        return out;
    }
    std::vector<std::future<std::vector<Outcome>>> jobs;
    int chunk = (n + threads - 1) / threads;
    for (int start = 0; start < n; start += chunk) {
        int end = std::min(n, start + chunk);
        jobs.push_back(std::async(std::launch::async, [&fn, start, end] {
            std::vector<Outcome> part;
            for (int i = start; i < end; ++i) part.push_back(fn(i));
            return part;
        }));
    }
    for (auto& j : jobs)
        for (auto& o : j.get()) {
            out.push_back(std::move(o));
            if (out.back().status == stop) return out;
        }
    return out;
}

/// Universal merge: exact failure refutes exactly; all exact successes force exactly.
Verdict merge_universal(const std::string& rule, const std::vector<Outcome>& outs, int stage, bool may_be_exact) {
    std::vector<EvidencePtr> kids;
    const Outcome* fail = nullptr;
    bool all_exact = true;
    for (const auto& o : outs) {
        if (o.status == Status::ExactFail)
            return make(Polarity::Refuted, Exactness::Exact, rule, "counterexample", {o.evidence}, stage);
        if (o.status == Status::BudgetFail && !fail) fail = &o;
        if (o.status != Status::ExactOk) all_exact = false;
        kids.push_back(o.evidence);
    }
    if (fail) return make(Polarity::Refuted, Exactness::AtBudget, rule, "counterexample at budget", {fail->evidence}, stage);
    std::string note = std::to_string(outs.size()) + " instances";
    if (all_exact && may_be_exact) return make(Polarity::Forced, Exactness::Exact, rule, note, std::move(kids), stage);
    return make(Polarity::Forced, Exactness::AtBudget, rule, note, {}, stage);
}

/// Existential merge: exact witness forces exactly; all exact failures refute exactly.
Verdict merge_existential(const std::string& rule, const std::vector<Outcome>& outs, int stage, bool may_be_exact) {
    std::vector<EvidencePtr> kids;
    const Outcome* weak = nullptr;
    bool all_exact = true;
    for (const auto& o : outs) {
        if (o.status == Status::ExactOk)
            return make(Polarity::Forced, Exactness::Exact, rule, "witness", {o.evidence}, stage);
        if (o.status == Status::BudgetOk && !weak) weak = &o;
        if (o.status != Status::ExactFail) all_exact = false;
        kids.push_back(o.evidence);
    }
    if (weak) return make(Polarity::Forced, Exactness::AtBudget, rule, "witness at budget", {weak->evidence}, stage);
    std::string note = std::to_string(outs.size()) + " candidates";
    if (all_exact && may_be_exact) return make(Polarity::Refuted, Exactness::Exact, rule, note, std::move(kids), stage);
    return make(Polarity::Refuted, Exactness::AtBudget, rule, note, {}, stage);
}

Status status_of(const Verdict& v) {
    if (v.forced()) return v.exact() ? Status::ExactOk : Status::BudgetOk;
    return v.exact() ? Status::ExactFail : Status::BudgetFail;
}

Outcome implication_outcome(const Branch& b, const Verdict& a, const std::optional<Verdict>& c) {
    // c is empty for negation
    if (a.refuted_exact()) return {Status::ExactOk, wrap(b, Polarity::Forced, Exactness::Exact, {a.evidence, nullptr})};
    if (c && c->forced_exact())
        return {Status::ExactOk, wrap(b, Polarity::Forced, Exactness::Exact, {nullptr, c->evidence})};
    bool conclusion = c && c->forced();
    if (a.forced_exact() && (c ? c->refuted_exact() : true))
        return {Status::ExactFail,
                wrap(b, Polarity::Refuted, Exactness::Exact, {a.evidence, c ? c->evidence : nullptr})};
    if (a.forced() && !conclusion)
        return {Status::BudgetFail,
                wrap(b, Polarity::Refuted, Exactness::AtBudget, {a.evidence, c ? c->evidence : nullptr})};
    return {Status::BudgetOk, wrap(b, Polarity::Forced, Exactness::AtBudget, {a.evidence, c ? c->evidence : nullptr})};
}

bool is_universal(FKind k) {
    return k == FKind::Implies || k == FKind::Not || k == FKind::ForallArr || k == FKind::ForallObj;
}

std::string clause_name(FKind k) {
    switch (k) {
        case FKind::Implies: return "implies";
        case FKind::Not: return "not";
        case FKind::ForallArr: return "forall-arr";
        case FKind::ExistsArr: return "exists-arr";
        case FKind::ForallObj: return "forall-obj";
        case FKind::ExistsObj: return "exists-obj";
        case FKind::And: return "and";
        case FKind::Or: return "or";
        default: return "atom";
    }
}

/// Elements (d, x) of V, each as a representable stage y(d) -> V.
struct Element {
    int d;
    int x;
};

std::vector<Element> elements_of(const Obj& V) {
    std::vector<Element> out;
    for (int d = 0; d < V.n_comp(); ++d)
        for (int x = 0; x < V.card(d); ++x) out.push_back({d, x});
    return out;
}

std::string stage_note(const FinCat& C, int d, int x) { return "stage " + C.objects[d] + "#" + std::to_string(x); }

}  // namespace

// ------------------------------------------------------------------- Forcer

struct Forcer::Memo {
    std::mutex mu;
    std::map<std::string, Verdict> table;
    std::map<const Formula*, FormulaPtr> keep;
    std::map<std::pair<const Formula*, std::string>, bool> delta0;
};

Forcer::Forcer(Handle base, Budget budget, ForceOptions options)
    : base_(std::move(base)), budget_(budget), opt_(options), memo_(std::make_shared<Memo>()) {
    budget_.validate();
}

std::size_t Forcer::memo_size() const {
    std::lock_guard<std::mutex> lock(memo_->mu);
    return memo_->table.size();
}

Verdict Forcer::forces(const Sentence& s) {
    if (s.base != base_) throw CatError("sentence lives over a different handle");
    typecheck(s.phi, s.env.signature());
    if (s.env.h != base_->slice(s.U)) throw CatError("sentence parameters do not live over U");
    if (opt_.engine == Engine::Literal) return eval(s.U, s.env, s.phi, 0, -1);
    return over_stages(s.U, s.env, s.phi, 0);
}

Verdict Forcer::over_stages(const Obj& U, const Env& env, const FormulaPtr& f, int depth) {
    if (U.total() == 0) return forced_exact("initial", "U is initial");
    auto elems = elements_of(U);
    auto fn = [&](int i) {
        auto [d, x] = elems[i];
        Branch b{base_->element_map(d, x, U), d, {}, {}, stage_note(base_->index(), d, x)};
        Obj Y = base_->representable(d);
        Verdict v = eval(Y, pull_env(base_, *b.stage_map, env), f, depth, d);
        return Outcome{status_of(v), wrap(b, v)};
    };
    auto outs = run_branches(static_cast<int>(elems.size()), depth <= 1 ? opt_.threads : 1, fn, Status::ExactFail);
    return merge_universal("stages", outs, -1, true);
}

bool Forcer::delta0(const FormulaPtr& f, const Env& env) {
    std::string sig;
    for (const auto& e : env.entries) sig += e.name + (e.is_obj ? "," : ":" + e.dom.str() + ">" + e.cod.str() + ",");
    {
        std::lock_guard<std::mutex> lock(memo_->mu);
        auto it = memo_->delta0.find({f.get(), sig});
        if (it != memo_->delta0.end()) return it->second;
    }
    bool r = is_delta0(f, env.signature());
    std::lock_guard<std::mutex> lock(memo_->mu);
    memo_->keep.emplace(f.get(), f);
    memo_->delta0[{f.get(), sig}] = r;
    return r;
}

Verdict Forcer::eval(const Obj& V, const Env& env, const FormulaPtr& f, int depth, int stage) {
    std::ostringstream key;
    key << env.h->id() << '|' << stage << '|' << static_cast<const void*>(f.get()) << '|' << depth << '|' << V.key()
        << '|' << env.key();
    const std::string k = key.str();
    {
        std::lock_guard<std::mutex> lock(memo_->mu);
        auto it = memo_->table.find(k);
        if (it != memo_->table.end()) return it->second;
    }
    Verdict v = eval_uncached(V, env, f, depth, stage);
    std::lock_guard<std::mutex> lock(memo_->mu);
    memo_->keep.emplace(f.get(), f);
    memo_->table.emplace(k, v);
    return v;
}

Verdict Forcer::eval_uncached(const Obj& V, const Env& env, const FormulaPtr& f, int depth, int stage) {
    if (V.total() == 0) return forced_exact("initial", "stage is initial");
    switch (f->kind) {
        case FKind::True: return forced_exact("true");
        case FKind::False: return make(Polarity::Refuted, Exactness::Exact, "false", "stage is not initial");
        case FKind::Eq: {
            bool same = env.eval(f->lhs) == env.eval(f->rhs);
            return make(same ? Polarity::Forced : Polarity::Refuted, Exactness::Exact, "atom", print(f));
        }
        default: break;
    }
    if (opt_.delta0_shortcut && delta0(f, env)) {
        Sub k = classify_in(env, f);
        bool top = std::all_of(k.bits.begin(), k.bits.end(), [](char c) { return c != 0; });
        Verdict v = make(top ? Polarity::Forced : Polarity::Refuted, Exactness::Exact, "delta0");
        std::const_pointer_cast<Ev>(v.evidence)->mask = Sub{V, k.bits};
        return v;
    }
    if (f->is_quantifier() || f->kind == FKind::Implies || f->kind == FKind::Not) {
        if (depth >= budget_.max_depth) {
            bool universal = is_universal(f->kind);
            return make(universal ? Polarity::Forced : Polarity::Refuted, Exactness::AtBudget, "depth",
                        "depth budget exhausted");
        }
    }
    if (opt_.engine == Engine::Literal) return literal(V, env, f, depth);
    return stagewise(V, env, f, depth, stage);
}

Verdict Forcer::stagewise(const Obj& V, const Env& env, const FormulaPtr& f, int depth, int stage) {
    const FinCat& C = base_->index();
    const int threads = depth <= 1 ? opt_.threads : 1;
    switch (f->kind) {
        case FKind::And: {
            Verdict a = eval(V, env, f->a, depth, stage);
            if (a.refuted_exact())
                return make(Polarity::Refuted, Exactness::Exact, "and", "left", {a.evidence, nullptr}, stage);
            Verdict b = eval(V, env, f->b, depth, stage);
            if (b.refuted_exact())
                return make(Polarity::Refuted, Exactness::Exact, "and", "right", {nullptr, b.evidence}, stage);
            bool pol = a.forced() && b.forced();
            bool ex = pol && a.exact() && b.exact();
            return make(pol ? Polarity::Forced : Polarity::Refuted, ex ? Exactness::Exact : Exactness::AtBudget, "and",
                        "", {a.evidence, b.evidence}, stage);
        }
        case FKind::Or: {
            // at a representable stage any cover by two subobjects contains the whole stage
            Verdict a = eval(V, env, f->a, depth, stage);
            if (a.forced_exact())
                return make(Polarity::Forced, Exactness::Exact, "or", "left", {a.evidence, nullptr}, stage);
            Verdict b = eval(V, env, f->b, depth, stage);
            if (b.forced_exact())
                return make(Polarity::Forced, Exactness::Exact, "or", "right", {nullptr, b.evidence}, stage);
            bool pol = a.forced() || b.forced();
            bool ex = !pol && a.exact() && b.exact();
            return make(pol ? Polarity::Forced : Polarity::Refuted, ex ? Exactness::Exact : Exactness::AtBudget, "or",
                        "", {a.evidence, b.evidence}, stage);
        }
        case FKind::Implies:
        case FKind::Not: {
            auto elems = elements_of(V);
            auto fn = [&](int i) {
                auto [d, x] = elems[i];
                Branch b{base_->element_map(d, x, V), d, {}, {}, stage_note(C, d, x)};
                Obj Y = base_->representable(d);
                Env e2 = pull_env(base_, *b.stage_map, env);
                Verdict a = eval(Y, e2, f->a, depth + 1, d);
                std::optional<Verdict> c;
                if (f->kind == FKind::Implies && !a.refuted_exact()) c = eval(Y, e2, f->b, depth + 1, d);
                return implication_outcome(b, a, f->kind == FKind::Implies ? c : std::nullopt);
            };
            auto outs = run_branches(static_cast<int>(elems.size()), threads, fn, Status::ExactFail);
            return merge_universal(clause_name(f->kind), outs, stage, true);
        }
        case FKind::ForallArr:
        case FKind::ForallObj: {
            struct Item {
                Element el;
                std::optional<Mor> arr;
                std::optional<Obj> obj;
            };
            std::vector<Item> items;
            std::vector<Env> envs;
            std::vector<Mor> maps;
            auto elems = elements_of(V);
            for (size_t i = 0; i < elems.size(); ++i) {
                auto [d, x] = elems[i];
                maps.push_back(base_->element_map(d, x, V));
                envs.push_back(pull_env(base_, maps.back(), env));
                const Env& e2 = envs.back();
                if (f->kind == FKind::ForallArr) {
                    for (auto& g : e2.h->morphisms(e2.resolve(f->dom), e2.resolve(f->cod)))
                        items.push_back({elems[i], std::move(g), {}});
                } else {
                    for (const auto& A : e2.h->objects_up_to(budget_.max_obj_size)) items.push_back({elems[i], {}, A});
                }
            }
            auto index_of = [&](const Element& el) {
                for (size_t i = 0; i < elems.size(); ++i)
                    if (elems[i].d == el.d && elems[i].x == el.x) return i;
                return elems.size();
            };
            auto fn = [&](int i) {
                const Item& it = items[i];
                size_t k = index_of(it.el);
                Branch b{maps[k], it.el.d, it.obj, it.arr, stage_note(C, it.el.d, it.el.x)};
                Env e3 = it.arr ? envs[k].with_arr(f->var, *it.arr, f->dom, f->cod) : envs[k].with_obj(f->var, *it.obj);
                Verdict v = eval(base_->representable(it.el.d), e3, f->a, depth + 1, it.el.d);
                return Outcome{status_of(v), wrap(b, v)};
            };
            auto outs = run_branches(static_cast<int>(items.size()), threads, fn, Status::ExactFail);
            return merge_universal(clause_name(f->kind), outs, stage, f->kind == FKind::ForallArr);
        }
        case FKind::ExistsArr:
        case FKind::ExistsObj: {
            // representable stages are projective: witnesses over the stage itself suffice
            std::vector<Mor> arrs;
            std::vector<Obj> objs;
            if (f->kind == FKind::ExistsArr)
                arrs = env.h->morphisms(env.resolve(f->dom), env.resolve(f->cod));
            else
                objs = env.h->objects_up_to(budget_.max_obj_size);
            int n = static_cast<int>(f->kind == FKind::ExistsArr ? arrs.size() : objs.size());
            auto fn = [&](int i) {
                Branch b;
                b.stage = stage;
                Env e2 = env;
                if (f->kind == FKind::ExistsArr) {
                    b.witness_arr = arrs[i];
                    e2 = env.with_arr(f->var, arrs[i], f->dom, f->cod);
                } else {
                    b.witness_obj = objs[i];
                    e2 = env.with_obj(f->var, objs[i]);
                }
                Verdict v = eval(V, e2, f->a, depth + 1, stage);
                return Outcome{status_of(v), wrap(b, v)};
            };
            auto outs = run_branches(n, threads, fn, Status::ExactOk);
            return merge_existential(clause_name(f->kind), outs, stage, f->kind == FKind::ExistsArr);
        }
        default: throw std::logic_error("unhandled formula kind");
    }
}

Verdict Forcer::literal(const Obj& V, const Env& env, const FormulaPtr& f, int depth) {
    const int threads = depth <= 1 ? opt_.threads : 1;
    // maps V' -> V from enumerated objects
    auto stages = [&] {
        std::vector<Mor> out;
        for (const Obj& W : base_->objects_up_to(budget_.max_obj_size))
            for (auto& p : base_->morphisms(W, V)) out.push_back(std::move(p));
        return out;
    };
    switch (f->kind) {
        case FKind::And: {
            Verdict a = eval(V, env, f->a, depth, -1);
            if (a.refuted_exact())
                return make(Polarity::Refuted, Exactness::Exact, "and", "left", {a.evidence, nullptr});
            Verdict b = eval(V, env, f->b, depth, -1);
            if (b.refuted_exact())
                return make(Polarity::Refuted, Exactness::Exact, "and", "right", {nullptr, b.evidence});
            bool pol = a.forced() && b.forced();
            bool ex = pol && a.exact() && b.exact();
            return make(pol ? Polarity::Forced : Polarity::Refuted, ex ? Exactness::Exact : Exactness::AtBudget, "and",
                        "", {a.evidence, b.evidence});
        }
        case FKind::Or: {
            auto subs = base_->subobjects(V);
            const int n = static_cast<int>(subs.size());
            Sub top = base_->top(V);
            struct Pair {
                int i, j, overlap;
            };
            std::vector<Pair> pairs;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (base_->join(subs[i], subs[j]) == top)
                        pairs.push_back({i, j, base_->meet(subs[i], subs[j]).count()});
            std::stable_sort(pairs.begin(), pairs.end(),
                             [](const Pair& p, const Pair& q) { return p.overlap > q.overlap; });
            std::vector<std::optional<Verdict>> left(n), right(n);
            std::vector<std::optional<Mor>> incl(n);
            auto side = [&](int i, bool is_left) -> const Verdict& {
                auto& slot = is_left ? left[i] : right[i];
                if (!slot) {
                    if (!incl[i]) incl[i] = base_->sub_object(subs[i]).second;
                    slot = eval(incl[i]->dom, pull_env(base_, *incl[i], env), is_left ? f->a : f->b, depth, -1);
                }
                return *slot;
            };
            auto branch = [&](int i, bool is_left) {
                const Verdict& v = side(i, is_left);
                return wrap(Branch{incl[i], -1, {}, {}, is_left ? "left" : "right"}, v);
            };
            std::optional<Pair> weak;
            std::vector<EvidencePtr> refutations;
            bool all_exact = true;
            for (const auto& p : pairs) {
                const Verdict& a = side(p.i, true);
                const Verdict& b = side(p.j, false);
                if (a.forced_exact() && b.forced_exact())
                    return make(Polarity::Forced, Exactness::Exact, "or", "cover",
                                {branch(p.i, true), branch(p.j, false)});
                if (a.forced() && b.forced() && !weak) weak = p;
                if (a.refuted_exact())
                    refutations.push_back(branch(p.i, true));
                else if (b.refuted_exact())
                    refutations.push_back(branch(p.j, false));
                else
                    all_exact = false;
            }
            if (weak)
                return make(Polarity::Forced, Exactness::AtBudget, "or", "cover at budget",
                            {branch(weak->i, true), branch(weak->j, false)});
            if (all_exact)
                return make(Polarity::Refuted, Exactness::Exact, "or-pairs",
                            std::to_string(pairs.size()) + " covering pairs", std::move(refutations));
            return make(Polarity::Refuted, Exactness::AtBudget, "or", "no cover at budget");
        }
        case FKind::Implies:
        case FKind::Not: {
            auto maps = stages();
            auto fn = [&](int i) {
                Branch b{maps[i], -1, {}, {}, ""};
                Env e2 = pull_env(base_, maps[i], env);
                Verdict a = eval(maps[i].dom, e2, f->a, depth + 1, -1);
                std::optional<Verdict> c;
                if (f->kind == FKind::Implies && !a.refuted_exact()) c = eval(maps[i].dom, e2, f->b, depth + 1, -1);
                return implication_outcome(b, a, f->kind == FKind::Implies ? c : std::nullopt);
            };
            auto outs = run_branches(static_cast<int>(maps.size()), threads, fn, Status::ExactFail);
            return merge_universal(clause_name(f->kind), outs, -1, false);
        }
        case FKind::ForallArr:
        case FKind::ForallObj: {
            struct Item {
                int k;
                std::optional<Mor> arr;
                std::optional<Obj> obj;
            };
            auto maps = stages();
            std::vector<Env> envs;
            std::vector<Item> items;
            for (size_t k = 0; k < maps.size(); ++k) {
                envs.push_back(pull_env(base_, maps[k], env));
                const Env& e2 = envs.back();
                if (f->kind == FKind::ForallArr) {
                    for (auto& g : e2.h->morphisms(e2.resolve(f->dom), e2.resolve(f->cod)))
                        items.push_back({static_cast<int>(k), std::move(g), {}});
                } else {
                    for (const auto& A : e2.h->objects_up_to(budget_.max_obj_size))
                        items.push_back({static_cast<int>(k), {}, A});
                }
            }
            auto fn = [&](int i) {
                const Item& it = items[i];
                Branch b{maps[it.k], -1, it.obj, it.arr, ""};
                Env e3 = it.arr ? envs[it.k].with_arr(f->var, *it.arr, f->dom, f->cod)
                                : envs[it.k].with_obj(f->var, *it.obj);
                Verdict v = eval(maps[it.k].dom, e3, f->a, depth + 1, -1);
                return Outcome{status_of(v), wrap(b, v)};
            };
            auto outs = run_branches(static_cast<int>(items.size()), threads, fn, Status::ExactFail);
            return merge_universal(clause_name(f->kind), outs, -1, false);
        }
        case FKind::ExistsArr:
        case FKind::ExistsObj: {
            std::vector<Mor> covers{base_->identity(V)};
            for (auto& p : base_->regular_epis_onto(V, budget_.max_cover_size))
                if (!base_->is_iso(p)) covers.push_back(std::move(p));
            struct Item {
                int k;
                std::optional<Mor> arr;
                std::optional<Obj> obj;
            };
            std::vector<Env> envs;
            std::vector<Item> items;
            for (size_t k = 0; k < covers.size(); ++k) {
                envs.push_back(pull_env(base_, covers[k], env));
                const Env& e2 = envs.back();
                if (f->kind == FKind::ExistsArr) {
                    for (auto& g : e2.h->morphisms(e2.resolve(f->dom), e2.resolve(f->cod)))
                        items.push_back({static_cast<int>(k), std::move(g), {}});
                } else {
                    for (const auto& A : e2.h->objects_up_to(budget_.max_obj_size))
                        items.push_back({static_cast<int>(k), {}, A});
                }
            }
            auto fn = [&](int i) {
                const Item& it = items[i];
                Branch b{it.k == 0 ? std::nullopt : std::optional<Mor>(covers[it.k]), -1, it.obj, it.arr, ""};
                Env e3 = it.arr ? envs[it.k].with_arr(f->var, *it.arr, f->dom, f->cod)
                                : envs[it.k].with_obj(f->var, *it.obj);
                Verdict v = eval(covers[it.k].dom, e3, f->a, depth + 1, -1);
                return Outcome{status_of(v), wrap(b, v)};
            };
            auto outs = run_branches(static_cast<int>(items.size()), threads, fn, Status::ExactOk);
            return merge_existential(clause_name(f->kind), outs, -1, false);
        }
        default: throw std::logic_error("unhandled formula kind");
    }
}

Verdict forces(const Sentence& s, const Budget& b, const ForceOptions& opt) {
    Forcer f(s.base, b, opt);
    return f.forces(s);
}

// ----------------------------------------------------------------- external

namespace {

class External {
public:
    External(const Handle& h, const Budget& b) : h_(h), b_(b) {}

    Verdict eval(const FormulaPtr& f, const Env& env, int depth) {
        switch (f->kind) {
            case FKind::True: return forced_exact("true");
            case FKind::False: return make(Polarity::Refuted, Exactness::Exact, "false");
            case FKind::Eq: {
                bool same = env.eval(f->lhs) == env.eval(f->rhs);
                return make(same ? Polarity::Forced : Polarity::Refuted, Exactness::Exact, "atom", print(f));
            }
            case FKind::And:
            case FKind::Or: {
                bool conj = f->kind == FKind::And;
                Verdict a = eval(f->a, env, depth);
                if (conj ? a.refuted_exact() : a.forced_exact())
                    return make(a.polarity, Exactness::Exact, clause_name(f->kind), "left", {a.evidence, nullptr});
                Verdict b = eval(f->b, env, depth);
                if (conj ? b.refuted_exact() : b.forced_exact())
                    return make(b.polarity, Exactness::Exact, clause_name(f->kind), "right", {nullptr, b.evidence});
                bool pol = conj ? a.forced() && b.forced() : a.forced() || b.forced();
                bool ex = a.exact() && b.exact();
                return make(pol ? Polarity::Forced : Polarity::Refuted, ex ? Exactness::Exact : Exactness::AtBudget,
                            clause_name(f->kind), "", {a.evidence, b.evidence});
            }
            case FKind::Implies:
            case FKind::Not: {
                Verdict a = eval(f->a, env, depth);
                std::optional<Verdict> c;
                if (f->kind == FKind::Implies && !a.refuted_exact()) c = eval(f->b, env, depth);
                Outcome o = implication_outcome(Branch{}, a, c);
                bool pol = o.status == Status::ExactOk || o.status == Status::BudgetOk;
                bool ex = o.status == Status::ExactOk || o.status == Status::ExactFail;
                return make(pol ? Polarity::Forced : Polarity::Refuted, ex ? Exactness::Exact : Exactness::AtBudget,
                            clause_name(f->kind), "", {o.evidence});
            }
            default: break;
        }
        if (depth >= b_.max_depth)
            return make(is_universal(f->kind) ? Polarity::Forced : Polarity::Refuted, Exactness::AtBudget, "depth");
        std::vector<Outcome> outs;
        bool universal = is_universal(f->kind);
        bool arrows = f->kind == FKind::ForallArr || f->kind == FKind::ExistsArr;
        Status stop = universal ? Status::ExactFail : Status::ExactOk;
        if (arrows) {
            for (const auto& g : h_->morphisms(env.resolve(f->dom), env.resolve(f->cod))) {
                Verdict v = eval(f->a, env.with_arr(f->var, g, f->dom, f->cod), depth + 1);
                outs.push_back({status_of(v), wrap(Branch{{}, -1, {}, g, ""}, v)});
                if (outs.back().status == stop) break;
            }
        } else {
            for (const auto& A : h_->objects_up_to(b_.max_obj_size)) {
                Verdict v = eval(f->a, env.with_obj(f->var, A), depth + 1);
                outs.push_back({status_of(v), wrap(Branch{{}, -1, A, {}, ""}, v)});
                if (outs.back().status == stop) break;
            }
        }
        return universal ? merge_universal(clause_name(f->kind), outs, -1, arrows)
                         : merge_existential(clause_name(f->kind), outs, -1, arrows);
    }

private:
    Handle h_;
    Budget b_;
};

}  // namespace

Verdict external_truth(const Handle& h, const FormulaPtr& phi, const Env& env, const Budget& b) {
    b.validate();
    if (env.h != h) throw CatError("parameters live in a different handle");
    typecheck(phi, env.signature());
    return External(h, b).eval(phi, env, 0);
}

Verdict wellpointed_oracle(const Sentence& s, const Budget& b) {
    if (s.base->kind() != Kind::FinSet) throw Unsupported("well-pointedness oracle needs FinSet");
    std::vector<Outcome> outs;
    for (const auto& u : s.base->global_elements(s.U)) {
        Sentence su = pullback_formula(u, s);
        Verdict v = external_truth(su.env.h, su.phi, su.env, b);
        outs.push_back({status_of(v), wrap(Branch{u, -1, {}, {}, "global element"}, v)});
        if (outs.back().status == Status::ExactFail) break;
    }
    if (outs.empty()) return forced_exact("oracle", "no global elements");
    return merge_universal("oracle", outs, -1, true);
}

// --------------------------------------------------------- classifier search

ClassifierResult classifier_search(const Sentence& s, const Budget& b, const ForceOptions& opt) {
    Forcer forcer(s.base, b, opt);
    const Handle& h = s.base;
    ClassifierResult r;
    std::vector<std::pair<Mor, bool>> probes;
    for (const Obj& V : h->objects_up_to(b.max_obj_size))
        for (auto& p : h->morphisms(V, s.U)) {
            bool forced = forcer.forces(pullback_formula(p, s)).forced();
            probes.emplace_back(std::move(p), forced);
        }
    r.probes = static_cast<int>(probes.size());
    for (const Sub& S : h->subobjects(s.U)) {
        ++r.candidates;
        Mor incl = h->sub_object(S).second;
        if (!forcer.forces(pullback_formula(incl, s)).forced()) continue;
        bool ok = true;
        for (const auto& [p, forced] : probes)
            if (forced && !h->factors_through(p, S)) {
                ok = false;
                break;
            }
        if (ok) {
            r.sub = S;
            return r;
        }
    }
    return r;
}

// ------------------------------------------------------------------ verifier

namespace {

class Verifier {
public:
    explicit Verifier(Handle base) : base_(std::move(base)) {}

    std::string why;

    bool check(const Obj& V, const Env& env, const FormulaPtr& f, const EvidencePtr& ev) {
        if (!ev) return fail("missing evidence for " + print(f));
        if (ev->exactness != Exactness::Exact) return true;
        const bool forced = ev->polarity == Polarity::Forced;
        const std::string& r = ev->rule;
        if (r == "initial") return forced && V.total() == 0 ? true : fail("initial rule on a non-initial stage");
        if (r == "stages") return stages(V, env, f, ev);
        if (r == "depth") return fail("depth cutoff claimed exact");
        if (r == "delta0") {
            Sub k = kripke_joyal(Sentence{base_, V, f, env});
            bool top = k.count() == V.total();
            return top == forced ? true : fail("Delta0 leaf disagrees with stagewise evaluation: " + print(f));
        }
        switch (f->kind) {
            case FKind::True: return forced ? true : fail("true refuted");
            case FKind::False: return !forced && V.total() > 0 ? true : fail("false forced on a non-initial stage");
            case FKind::Eq: {
                bool same = equal_arrows(env, f->lhs, f->rhs);
                return same == forced ? true : fail("atom re-evaluates differently: " + print(f));
            }
            case FKind::And: {
                if (ev->children.size() != 2) return fail("malformed conjunction evidence");
                if (forced) return check(V, env, f->a, ev->children[0]) && check(V, env, f->b, ev->children[1]);
                if (ev->children[0] && ev->children[0]->polarity == Polarity::Refuted &&
                    ev->children[0]->exactness == Exactness::Exact)
                    return check(V, env, f->a, ev->children[0]);
                if (ev->children[1] && ev->children[1]->polarity == Polarity::Refuted &&
                    ev->children[1]->exactness == Exactness::Exact)
                    return check(V, env, f->b, ev->children[1]);
                return fail("conjunction refuted without an exact refuted conjunct");
            }
            case FKind::Or: return disjunction(V, env, f, ev);
            case FKind::Implies:
            case FKind::Not: return implication(V, env, f, ev);
            case FKind::ForallArr:
            case FKind::ForallObj: return universal(V, env, f, ev);
            case FKind::ExistsArr:
            case FKind::ExistsObj: return existential(V, env, f, ev);
        }
        return fail("unknown rule " + r);
    }

private:
    Handle base_;

    bool fail(const std::string& msg) {
        if (why.empty()) why = msg;
        return false;
    }

    bool exact_with(const EvidencePtr& e, Polarity p) {
        return e && e->exactness == Exactness::Exact && e->polarity == p;
    }

    bool equal_arrows(const Env& env, const ArrTerm& l, const ArrTerm& r) {
        // elementwise composite, independent of Topos::compose
        auto apply = [&](const ArrTerm& t, int c, int x) {
            for (auto it = t.factors.rbegin(); it != t.factors.rend(); ++it)
                if (!it->is_id) x = env.find(it->name)->mor(c, x);
            return x;
        };
        Obj dom = l.factors.back().is_id ? env.resolve(l.factors.back().obj)
                                         : env.resolve(env.find(l.factors.back().name)->dom);
        for (int c = 0; c < dom.n_comp(); ++c)
            for (int x = 0; x < dom.card(c); ++x)
                if (apply(l, c, x) != apply(r, c, x)) return false;
        return true;
    }

    // all natural transformations A -> B by brute force over component tables
    std::optional<std::vector<Mor>> homs(const Handle& h, const Obj& A, const Obj& B) {
        std::vector<int> slots;
        for (int c = 0; c < A.n_comp(); ++c)
            for (int x = 0; x < A.card(c); ++x) slots.push_back(c);
        double count = 1;
        for (int c : slots) count *= B.card(c);
        if (count > 2e5) return std::nullopt;
        std::vector<Mor> out;
        for (int c : slots)
            if (B.card(c) == 0) return out;
        std::vector<int> pick(slots.size(), 0);
        while (true) {
            Mor m{A, B, std::vector<std::vector<int>>(A.n_comp())};
            for (size_t i = 0; i < slots.size(); ++i) m.comp[slots[i]].push_back(pick[i]);
            if (h->is_morphism(m)) out.push_back(std::move(m));
            size_t k = 0;
            while (k < pick.size() && ++pick[k] == B.card(slots[k])) pick[k++] = 0;
            if (k == pick.size()) break;
        }
        return out;
    }

    bool valid_stage_map(const EvidencePtr& b, const Obj& V) {
        return b->stage_map && b->stage_map->cod == V && base_->is_morphism(*b->stage_map);
    }

    // child stage of a branch
    std::pair<Obj, Env> descend(const EvidencePtr& b, const Obj& V, const Env& env) {
        if (!b->stage_map) return {V, env};
        return {b->stage_map->dom, pull_env(base_, *b->stage_map, env)};
    }

    bool covers_all_elements(const std::vector<EvidencePtr>& kids, const Obj& V, int per_element) {
        // kids must enumerate representable stages (d, x) in order, per_element children each
        size_t k = 0;
        for (int d = 0; d < V.n_comp(); ++d)
            for (int x = 0; x < V.card(d); ++x) {
                Mor expect = base_->element_map(d, x, V);
                for (int j = 0; j < per_element; ++j, ++k) {
                    if (k >= kids.size() || !kids[k] || !kids[k]->stage_map || !(*kids[k]->stage_map == expect))
                        return fail("universal evidence misses a representable stage");
                }
            }
        return k == kids.size() ? true : fail("universal evidence has extra branches");
    }

    bool stages(const Obj& U, const Env& env, const FormulaPtr& f, const EvidencePtr& ev) {
        if (ev->polarity == Polarity::Refuted) {
            if (ev->children.size() != 1 || !valid_stage_map(ev->children[0], U))
                return fail("refuting stage is not a map into U");
            auto [W, e2] = descend(ev->children[0], U, env);
            return check(W, e2, f, ev->children[0]->children.at(0));
        }
        if (!covers_all_elements(ev->children, U, 1)) return false;
        for (const auto& b : ev->children) {
            auto [W, e2] = descend(b, U, env);
            if (!check(W, e2, f, b->children.at(0))) return false;
        }
        return true;
    }

    bool is_representable_stage(const Obj& V, int stage) {
        return stage >= 0 && stage < base_->index().n_obj() && V == base_->representable(stage);
    }

    bool disjunction(const Obj& V, const Env& env, const FormulaPtr& f, const EvidencePtr& ev) {
        const bool forced = ev->polarity == Polarity::Forced;
        if (ev->rule == "or-pairs") {
            auto subs = base_->subobjects(V);
            Sub top = base_->top(V);
            for (const auto& s1 : subs)
                for (const auto& s2 : subs) {
                    if (!(base_->join(s1, s2) == top)) continue;
                    bool covered = false;
                    for (const auto& b : ev->children) {
                        if (!b || !valid_stage_map(b, V)) continue;
                        Sub img = base_->image_factor(*b->stage_map).mono;
                        bool left = b->note == "left";
                        if (!(img == (left ? s1 : s2))) continue;
                        auto [W, e2] = descend(b, V, env);
                        if (exact_with(b, Polarity::Refuted) && check(W, e2, left ? f->a : f->b, b->children.at(0))) {
                            covered = true;
                            break;
                        }
                    }
                    if (!covered) return fail("a covering pair of subobjects is not refuted");
                }
            return true;
        }
        if (ev->children.size() != 2) return fail("malformed disjunction evidence");
        if (!forced) {
            if (!is_representable_stage(V, ev->stage))
                return fail("disjunction refuted at a stage that is not representable");
            return exact_with(ev->children[0], Polarity::Refuted) && exact_with(ev->children[1], Polarity::Refuted) &&
                   check(V, env, f->a, ev->children[0]) && check(V, env, f->b, ev->children[1]);
        }
        Sub covered = base_->bottom(V);
        for (int side = 0; side < 2; ++side) {
            const auto& c = ev->children[side];
            if (!c) continue;
            const FormulaPtr& g = side == 0 ? f->a : f->b;
            if (c->rule == "branch" && c->stage_map) {
                if (!valid_stage_map(c, V) || !base_->is_mono(*c->stage_map))
                    return fail("disjunction cover is not a subobject");
                auto [W, e2] = descend(c, V, env);
                if (!exact_with(c, Polarity::Forced) || !check(W, e2, g, c->children.at(0))) return false;
                covered = base_->join(covered, base_->image_factor(*c->stage_map).mono);
            } else {
                if (!exact_with(c, Polarity::Forced) || !check(V, env, g, c)) return false;
                covered = base_->top(V);
            }
        }
        return covered == base_->top(V) ? true : fail("disjunction pieces do not cover the stage");
    }

    bool implication_branch(const EvidencePtr& b, const Obj& V, const Env& env, const FormulaPtr& f, bool ok) {
        auto [W, e2] = descend(b, V, env);
        const auto& kids = b->children;
        if (kids.size() != 2) return fail("malformed implication branch");
        if (ok) {
            if (exact_with(kids[0], Polarity::Refuted)) return check(W, e2, f->a, kids[0]);
            if (f->kind == FKind::Implies && exact_with(kids[1], Polarity::Forced)) return check(W, e2, f->b, kids[1]);
            return fail("implication branch neither refutes the premise nor forces the conclusion");
        }
        if (!exact_with(kids[0], Polarity::Forced) || !check(W, e2, f->a, kids[0])) return false;
        if (f->kind == FKind::Not) return true;
        return exact_with(kids[1], Polarity::Refuted) && check(W, e2, f->b, kids[1]);
    }

    bool implication(const Obj& V, const Env& env, const FormulaPtr& f, const EvidencePtr& ev) {
        if (ev->polarity == Polarity::Refuted) {
            if (ev->children.size() != 1 || !valid_stage_map(ev->children[0], V))
                return fail("implication counterexample lacks a stage");
            return implication_branch(ev->children[0], V, env, f, false);
        }
        if (!covers_all_elements(ev->children, V, 1)) return false;
        for (const auto& b : ev->children)
            if (!implication_branch(b, V, env, f, true)) return false;
        return true;
    }

    bool universal(const Obj& V, const Env& env, const FormulaPtr& f, const EvidencePtr& ev) {
        if (ev->polarity == Polarity::Refuted) {
            if (ev->children.size() != 1 || !valid_stage_map(ev->children[0], V))
                return fail("universal counterexample lacks a stage");
            const auto& b = ev->children[0];
            auto [W, e2] = descend(b, V, env);
            auto e3 = bind(b, f, e2);
            if (!e3) return false;
            return exact_with(b, Polarity::Refuted) && check(W, *e3, f->a, b->children.at(0));
        }
        if (f->kind == FKind::ForallObj) return fail("object quantifier forced exactly");
        // one branch per representable stage and arrow, matched by content
        std::vector<char> used(ev->children.size(), 0);
        auto find = [&](const std::optional<Mor>& p, const Mor& g) -> EvidencePtr {
            for (size_t k = 0; k < ev->children.size(); ++k) {
                const auto& b = ev->children[k];
                if (used[k] || !b || !b->witness_arr || !(*b->witness_arr == g)) continue;
                if (p ? !(b->stage_map && *b->stage_map == *p) : b->stage_map.has_value()) continue;
                used[k] = 1;
                return b;
            }
            return nullptr;
        };
        for (int d = 0; d < V.n_comp(); ++d)
            for (int x = 0; x < V.card(d); ++x) {
                Mor p = base_->element_map(d, x, V);
                Env e2 = pull_env(base_, p, env);
                auto all = homs(e2.h, e2.resolve(f->dom), e2.resolve(f->cod));
                if (!all) return fail("hom-set too large to re-check");
                for (const auto& g : *all) {
                    auto b = find(p, g);
                    if (!b) return fail("universal evidence misses an arrow");
                    if (!exact_with(b, Polarity::Forced) ||
                        !check(p.dom, e2.with_arr(f->var, g, f->dom, f->cod), f->a, b->children.at(0)))
                        return false;
                }
            }
        return std::all_of(used.begin(), used.end(), [](char u) { return u != 0; })
                   ? true
                   : fail("universal evidence has extra branches");
    }

    std::optional<Env> bind(const EvidencePtr& b, const FormulaPtr& f, const Env& e2) {
        if (f->kind == FKind::ForallArr || f->kind == FKind::ExistsArr) {
            if (!b->witness_arr) return fail("missing arrow witness"), std::nullopt;
            const Mor& g = *b->witness_arr;
            if (g.dom != e2.resolve(f->dom) || g.cod != e2.resolve(f->cod) || !e2.h->is_morphism(g))
                return fail("witness is not an arrow of the bound type"), std::nullopt;
            return e2.with_arr(f->var, g, f->dom, f->cod);
        }
        if (!b->witness_obj || !e2.h->is_object(*b->witness_obj)) return fail("missing object witness"), std::nullopt;
        return e2.with_obj(f->var, *b->witness_obj);
    }

    bool existential(const Obj& V, const Env& env, const FormulaPtr& f, const EvidencePtr& ev) {
        if (ev->polarity == Polarity::Forced) {
            if (ev->children.size() != 1) return fail("existential lacks a witness");
            const auto& b = ev->children[0];
            if (b->stage_map && (!valid_stage_map(b, V) || !base_->is_epi(*b->stage_map)))
                return fail("existential cover is not epi");
            auto [W, e2] = descend(b, V, env);
            auto e3 = bind(b, f, e2);
            if (!e3) return false;
            return exact_with(b, Polarity::Forced) && check(W, *e3, f->a, b->children.at(0));
        }
        if (f->kind == FKind::ExistsObj) return fail("object existential refuted exactly");
        if (!is_representable_stage(V, ev->stage))
            return fail("arrow existential refuted at a stage that is not representable");
        auto all = homs(env.h, env.resolve(f->dom), env.resolve(f->cod));
        if (!all) return fail("hom-set too large to re-check");
        if (all->size() != ev->children.size()) return fail("existential refutation misses a candidate");
        std::vector<char> used(ev->children.size(), 0);
        for (const auto& g : *all) {
            EvidencePtr b;
            for (size_t k = 0; k < ev->children.size() && !b; ++k) {
                const auto& c = ev->children[k];
                if (!used[k] && c && !c->stage_map && c->witness_arr && *c->witness_arr == g) {
                    used[k] = 1;
                    b = c;
                }
            }
            if (!b) return fail("existential refutation misses a candidate");
            if (!exact_with(b, Polarity::Refuted) ||
                !check(V, env.with_arr(f->var, g, f->dom, f->cod), f->a, b->children.at(0)))
                return false;
        }
        return true;
    }
};

}  // namespace

bool verify(const Sentence& s, const Verdict& v, std::string* why) {
    if (!v.exact()) return true;
    Verifier ver(s.base);
    bool ok = v.evidence && v.evidence->polarity == v.polarity && v.evidence->exactness == v.exactness &&
              ver.check(s.U, s.env, s.phi, v.evidence);
    if (!ok && why) *why = ver.why.empty() ? "verdict and evidence disagree" : ver.why;
    return ok;
}

// ------------------------------------------------------------ slice transport

Functor slice_transport(const Handle& S, const Mor& p) {
    const FinCat& C = S->index();
    const Obj& V = p.dom;
    const Obj& U = p.cod;
    Handle T = S->slice(U);
    Obj W = T->over(p);
    Handle TW = T->slice(W);
    const FinCat& D = T->index();
    // fiber[c][u] lists x in V(c) over u, ascending
    std::vector<std::vector<std::vector<int>>> fiber(C.n_obj());
    for (int c = 0; c < C.n_obj(); ++c) {
        fiber[c].resize(U.card(c));
        for (int x = 0; x < V.card(c); ++x) fiber[c][p(c, x)].push_back(x);
    }
    Functor F;
    F.obj.resize(TW->index().n_obj());
    F.mor.resize(TW->index().n_mor());
    for (int c = 0; c < C.n_obj(); ++c)
        for (int u = 0; u < U.card(c); ++u) {
            int d = U.offset(c) + u;
            for (int w = 0; w < W.card(d); ++w) F.obj[W.offset(d) + w] = V.offset(c) + fiber[c][u][w];
        }
    for (int m = 0; m < C.n_mor(); ++m)
        for (int u = 0; u < U.card(C.dom(m)); ++u) {
            int mu = element_arrow(C, U, m, u);
            for (int w = 0; w < static_cast<int>(fiber[C.dom(m)][u].size()); ++w)
                F.mor[element_arrow(D, W, mu, w)] = element_arrow(C, V, m, fiber[C.dom(m)][u][w]);
        }
    return F;
}

// ------------------------------------------------------------ property suite

const char* const kChoiceSentence =
    "forall X. forall p: X -> 1. (forall g: 1 -> Om. g o p = t o p => g = t) => exists s: 1 -> X. true";

std::vector<std::pair<std::string, std::string>> wellpointed_sentences() {
    return {
        {"nonempty", "forall x: 1 -> Zero. false"},
        {"projective", kChoiceSentence},
        {"indecomposable",
         "forall A. forall B. forall a: A -> 1. forall b: B -> 1. (forall x, y: 1 -> A. x = y) and "
         "(forall x, y: 1 -> B. x = y) and (forall g: 1 -> Om. g o a = t o a and g o b = t o b => g = t) => "
         "(exists x: 1 -> A. true) or (exists y: 1 -> B. true)"},
        {"strong-generator",
         "forall A. forall B. forall m: A -> B. (forall Z. forall u, v: Z -> A. m o u = m o v => u = v) and "
         "(forall y: 1 -> B. exists x: 1 -> A. m x = y) => exists n: B -> A. m o n = id[B] and n o m = id[A]"},
    };
}

std::vector<std::pair<std::string, FormulaPtr>> deduction_instances(const FormulaPtr& phi, const FormulaPtr& psi,
                                                                    const FormulaPtr& chi,
                                                                    const FormulaPtr& theta_obj,
                                                                    const FormulaPtr& theta_arr) {
    using namespace fm;
    return {
        {"identity", implies(phi, phi)},
        {"and-elim", implies(conj(phi, psi), phi)},
        {"or-intro", implies(phi, disj(phi, psi))},
        {"modus-ponens", implies(conj(phi, implies(phi, psi)), psi)},
        {"ex-falso", implies(bot(), phi)},
        {"double-negation-intro", implies(phi, neg(neg(phi)))},
        {"disjunctive-syllogism", implies(conj(disj(phi, psi), neg(phi)), psi)},
        {"transitivity", implies(conj(implies(phi, psi), implies(psi, chi)), implies(phi, chi))},
        {"forall-elim", implies(forall_obj("X", theta_obj), substitute(theta_obj, {{"X", "A"}}))},
        {"exists-intro", implies(substitute(theta_arr, {{"x", "a"}}),
                                 exists_arr("x", ObjTerm::terminal(), ObjTerm::named("A"), theta_arr))},
    };
}

bool SuiteReport::ok() const {
    return std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.violations == 0; });
}

namespace {

struct Corpus {
    Env base_env;  // parameters in the handle
    Obj U;
    Sentence s;
};

class Suite {
public:
    Suite(const Handle& h, const SuiteConfig& cfg)
        : h_(h), cfg_(cfg), rng_(cfg.seed), forcer_(h, cfg.budget) {}

    SuiteReport run() {
        SuiteReport rep;
        rep.handle = h_->name();
        rep.seed = cfg_.seed;
        build_corpus();
        rep.corpus = static_cast<int>(corpus_.size());
        rep.results.push_back(evidence());
        rep.results.push_back(monotonicity());
        rep.results.push_back(epi_descent());
        rep.results.push_back(union_descent());
        rep.results.push_back(modus_ponens());
        rep.results.push_back(deduction());
        rep.results.push_back(delta0_agreement());
        rep.results.push_back(wellpointed());
        rep.results.push_back(collection());
        rep.results.push_back(locality());
        return rep;
    }

private:
    Handle h_;
    SuiteConfig cfg_;
    std::mt19937_64 rng_;
    Forcer forcer_;
    std::vector<Corpus> corpus_;
    std::vector<Verdict> verdicts_;

    int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }

    Env random_env() {
        const auto& objs = h_->objects_up_to(2);
        std::vector<Obj> pointed;
        for (const auto& A : objs)
            if (!h_->global_elements(A).empty()) pointed.push_back(A);
        const Obj& A = pointed[pick(static_cast<int>(pointed.size()))];
        auto ends = h_->morphisms(A, A);
        auto pts = h_->global_elements(A);
        Env env{h_, {}};
        env = env.with_obj("A", A);
        env = env.with_arr("e", ends[pick(static_cast<int>(ends.size()))], ObjTerm::named("A"), ObjTerm::named("A"));
        env = env.with_arr("a", pts[pick(static_cast<int>(pts.size()))], ObjTerm::terminal(), ObjTerm::named("A"));
        return env;
    }

    Obj random_base() {
        const auto& objs = h_->objects_up_to(2);
        return objs[pick(static_cast<int>(objs.size()))];
    }

    FormulaPtr random_phi(const Signature& sig, bool delta0) {
        GenOptions opt;
        opt.depth = 1 + pick(cfg_.formula_depth);
        opt.delta0 = delta0;
        return random_formula(sig, rng_, opt);
    }

    void build_corpus() {
        for (int i = 0; i < cfg_.corpus; ++i) {
            Env env = random_env();
            Obj U = random_base();
            auto phi = random_phi(env.signature(), i % 3 == 0);
            corpus_.push_back({env, U, over(h_, U, phi, env)});
            verdicts_.push_back(forcer_.forces(corpus_.back().s));
        }
    }

    static void note(PropertyResult& r, const std::string& msg) {
        ++r.violations;
        if (r.details.size() < 5) r.details.push_back(msg);
    }

    PropertyResult evidence() {
        PropertyResult r{"evidence", 0, 0, {}};
        for (size_t i = 0; i < corpus_.size(); ++i) {
            if (!verdicts_[i].exact()) continue;
            ++r.instances;
            std::string why;
            if (!verify(corpus_[i].s, verdicts_[i], &why)) note(r, print(corpus_[i].s.phi) + ": " + why);
        }
        return r;
    }

    PropertyResult monotonicity() {
        PropertyResult r{"monotonicity", 0, 0, {}};
        for (size_t i = 0; i < corpus_.size(); ++i) {
            if (!verdicts_[i].forced_exact()) continue;
            for (const Obj& V : h_->objects_up_to(cfg_.stage_bound))
                for (const auto& p : h_->morphisms(V, corpus_[i].U)) {
                    ++r.instances;
                    Verdict w = forcer_.forces(pullback_formula(p, corpus_[i].s));
                    if (w.refuted_exact()) note(r, print(corpus_[i].s.phi) + " fails after pullback");
                }
        }
        return r;
    }

    PropertyResult epi_descent() {
        PropertyResult r{"epi-descent", 0, 0, {}};
        for (size_t i = 0; i < corpus_.size(); ++i) {
            for (const auto& p : h_->regular_epis_onto(corpus_[i].U, cfg_.budget.max_cover_size)) {
                Verdict w = forcer_.forces(pullback_formula(p, corpus_[i].s));
                if (!w.forced_exact()) continue;
                ++r.instances;
                if (verdicts_[i].refuted_exact()) note(r, print(corpus_[i].s.phi) + " forced on a cover only");
            }
        }
        return r;
    }

    PropertyResult union_descent() {
        PropertyResult r{"union-descent", 0, 0, {}};
        for (size_t i = 0; i < corpus_.size(); ++i) {
            const Obj& U = corpus_[i].U;
            auto subs = h_->subobjects(U);
            std::vector<Verdict> vs;
            for (const auto& S : subs)
                vs.push_back(forcer_.forces(pullback_formula(h_->sub_object(S).second, corpus_[i].s)));
            for (size_t a = 0; a < subs.size(); ++a)
                for (size_t b = a; b < subs.size(); ++b) {
                    if (!(h_->join(subs[a], subs[b]) == h_->top(U))) continue;
                    if (!vs[a].forced_exact() || !vs[b].forced_exact()) continue;
                    ++r.instances;
                    if (verdicts_[i].refuted_exact()) note(r, print(corpus_[i].s.phi) + " forced on a union only");
                }
        }
        return r;
    }

    PropertyResult modus_ponens() {
        PropertyResult r{"modus-ponens-rule", 0, 0, {}};
        for (size_t i = 0; i + 1 < corpus_.size(); i += 2) {
            const auto& c = corpus_[i];
            auto psi = random_phi(c.base_env.signature(), false);
            Verdict imp = forcer_.forces(over(h_, c.U, fm::implies(c.s.phi, psi), c.base_env));
            if (!imp.forced_exact() || !verdicts_[i].forced_exact()) continue;
            ++r.instances;
            if (forcer_.forces(over(h_, c.U, psi, c.base_env)).refuted_exact())
                note(r, "modus ponens fails for " + print(c.s.phi) + " and " + print(psi));
        }
        return r;
    }

    PropertyResult deduction() {
        PropertyResult r{"deduction-schemas", 0, 0, {}};
        for (size_t i = 0; i < corpus_.size(); ++i) {
            const auto& c = corpus_[i];
            Signature sig = c.base_env.signature();
            auto psi = random_phi(sig, false);
            auto chi = random_phi(sig, false);
            Signature with_x = sig;
            with_x.objects.push_back("X");
            auto theta_obj = random_phi(with_x, false);
            Signature with_arr = sig;
            with_arr.arrows.push_back({"x", ObjTerm::terminal(), ObjTerm::named("A")});
            auto theta_arr = random_phi(with_arr, false);
            for (const auto& [name, f] : deduction_instances(c.s.phi, psi, chi, theta_obj, theta_arr)) {
                ++r.instances;
                Verdict v = forcer_.forces(over(h_, c.U, f, c.base_env));
                if (v.refuted_exact()) note(r, name + " refuted: " + print(f));
            }
        }
        return r;
    }

    PropertyResult delta0_agreement() {
        PropertyResult r{"delta0-agreement", 0, 0, {}};
        ForceOptions plain;
        plain.delta0_shortcut = false;
        Forcer slow(h_, cfg_.budget, plain);
        for (size_t i = 0; i < corpus_.size(); ++i) {
            const auto& s = corpus_[i].s;
            if (!is_delta0(s.phi, s.env.signature())) continue;
            Sub k = classify_delta0(s);
            for (const Obj& V : h_->objects_up_to(cfg_.stage_bound))
                for (const auto& p : h_->morphisms(V, s.U)) {
                    ++r.instances;
                    Verdict w = slow.forces(pullback_formula(p, s));
                    if (!w.exact() || w.forced() != h_->factors_through(p, k))
                        note(r, print(s.phi) + " disagrees with its classifying subobject");
                }
        }
        return r;
    }

    PropertyResult wellpointed() {
        PropertyResult r{"wellpointed-at-1", 0, 0, {}};
        Env params = standard_params(h_);
        // nested object quantifiers: objects up to the stage bound
        Budget b = cfg_.budget;
        b.max_obj_size = std::min(b.max_obj_size, cfg_.stage_bound);
        b.max_cover_size = std::min(b.max_cover_size, cfg_.stage_bound);
        Forcer small(h_, b);
        for (const auto& [name, text] : wellpointed_sentences()) {
            ++r.instances;
            auto phi = parse(text, params.signature());
            Verdict v = small.forces(over(h_, h_->terminal(), phi, params));
            if (!v.forced()) note(r, name + " is " + v.str());
        }
        return r;
    }

    // Every element of U0 is reached by a stage at which the evidence exhibits a witness object.
    bool collection_cover(const Sentence& s, const Verdict& v, const Obj& U0, std::string& why) {
        if (!v.evidence || v.evidence->rule != "stages") return why = "no stage decomposition", false;
        Sub covered = h_->bottom(U0);
        const FinCat& C = h_->index();
        for (const auto& st : v.evidence->children) {
            const auto& body = st->children.at(0);
            if (!body || body->rule != "forall-arr") return why = "missing quantifier over elements", false;
            for (const auto& br : body->children) {
                const auto& ex = br->children.at(0);
                if (!ex || !(ex->rule == "exists-obj" || ex->rule == "delta0")) return why = "missing witness", false;
                if (ex->rule == "exists-obj" && (ex->children.empty() || !ex->children[0]->witness_obj))
                    return why = "existential without witness object", false;
                int d = br->stage;
                // position of the identity of d in y(d)(d)
                int pos = 0;
                for (int hh : C.out(d)) {
                    if (C.cod(hh) != d) continue;
                    if (C.is_identity(hh)) break;
                    ++pos;
                }
                Obj Y = h_->representable(d);
                int generic = Y.offset(d) + pos;
                int e = br->witness_arr->comp[generic][0];
                covered = h_->join(covered, h_->image_factor(h_->element_map(d, e, U0)).mono);
            }
        }
        (void)s;
        if (!(covered == h_->top(U0))) return why = "witness stages do not cover U", false;
        return true;
    }

    PropertyResult collection() {
        PropertyResult r{"collection", 0, 0, {}};
        const char* templates[] = {
            "forall u: 1 -> A. exists X. exists x: 1 -> X. true",
            "forall u: 1 -> A. exists X. exists x: 1 -> X. forall y: 1 -> X. x = y",
            "forall u: 1 -> A. exists X. exists i: X -> A. exists x: 1 -> X. i x = u",
            "forall u: 1 -> A. exists X. exists i: X -> A. forall x: 1 -> X. i x = e u",
        };
        for (size_t i = 0; i < corpus_.size() && i < 12; ++i) {
            const auto& c = corpus_[i];
            Obj U0 = c.base_env.find("A")->obj;
            for (const char* t : templates) {
                auto phi = parse(t, c.base_env.signature());
                Sentence s = over(h_, h_->terminal(), phi, c.base_env);
                ForceOptions plain;
                plain.delta0_shortcut = false;
                Forcer f(h_, cfg_.budget, plain);
                Verdict v = f.forces(s);
                if (!v.forced_exact()) continue;
                ++r.instances;
                std::string why;
                if (!verify(s, v, &why))
                    note(r, std::string(t) + ": " + why);
                else if (!collection_cover(s, v, U0, why))
                    note(r, std::string(t) + ": " + why);
            }
        }
        return r;
    }

    PropertyResult locality() {
        PropertyResult r{"locality", 0, 0, {}};
        for (size_t i = 0; i < corpus_.size() && i < 20; ++i) {
            const auto& c = corpus_[i];
            const Obj& V = c.U;
            Obj U = random_base();
            auto ps = h_->morphisms(V, U);
            if (ps.empty()) continue;
            const Mor& p = ps[pick(static_cast<int>(ps.size()))];
            Handle T = h_->slice(U);
            Obj W = T->over(p);
            Handle TW = T->slice(W);
            Functor F = slice_transport(h_, p);
            Env moved{TW, {}};
            for (const auto& e : c.s.env.entries) {
                Env::Entry n = e;
                if (e.is_obj)
                    n.obj = reindex(e.obj, F, TW->index());
                else
                    n.mor = reindex(e.mor, F, TW->index());
                moved.entries.push_back(std::move(n));
            }
            Forcer ft(T, cfg_.budget);
            Verdict there = ft.forces(Sentence{T, W, c.s.phi, moved});
            ++r.instances;
            const Verdict& here = verdicts_[i];
            if (here.exact() && there.exact() && here.polarity != there.polarity)
                note(r, print(c.s.phi) + ": " + here.str() + " in the base, " + there.str() + " in the slice");
        }
        return r;
    }
};

}  // namespace

SuiteReport property_suite(const Handle& h, const SuiteConfig& cfg) { return Suite(h, cfg).run(); }

}  // namespace stacksem

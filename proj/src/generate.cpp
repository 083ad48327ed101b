#include "stacksem/generate.hpp"

#include <set>

namespace stacksem {

namespace {

class Generator {
public:
    Generator(const Signature& sig, std::mt19937_64& rng, const GenOptions& opt) : rng_(rng), opt_(opt) {
        objects_ = sig.objects;
        arrows_ = sig.arrows;
        for (const auto& o : sig.objects) used_.insert(o);
        for (const auto& a : sig.arrows) used_.insert(a.name);
    }

    FormulaPtr formula(int depth) {
        if (depth <= 0) return atom();
        int choice = pick(opt_.delta0 ? 8 : 10);
        switch (choice) {
            case 0:
            case 1: return atom();
            case 2: return fm::conj(formula(depth - 1), formula(depth - 1));
            case 3: return fm::disj(formula(depth - 1), formula(depth - 1));
            case 4: return fm::implies(formula(depth - 1), formula(depth - 1));
            case 5: return fm::neg(formula(depth - 1));
            case 6:
            case 7: return arrow_quantifier(depth);
            default: return object_quantifier(depth);
        }
    }

private:
    std::mt19937_64& rng_;
    const GenOptions& opt_;
    std::vector<std::string> objects_;
    std::vector<Signature::ArrowSig> arrows_;
    std::set<std::string> used_;
    int counter_ = 0;

    int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }

    std::string fresh(const char* prefix) {
        std::string n;
        do n = prefix + std::to_string(++counter_);
        while (used_.count(n));
        used_.insert(n);
        return n;
    }

    ObjTerm random_obj() {
        int k = pick(static_cast<int>(objects_.size()) + 1);
        return k == 0 ? ObjTerm::terminal() : ObjTerm::named(objects_[k - 1]);
    }

    FormulaPtr arrow_quantifier(int depth) {
        ObjTerm dom = opt_.delta0 ? ObjTerm::terminal() : random_obj();
        ObjTerm cod = random_obj();
        std::string v = fresh("x");
        arrows_.push_back({v, dom, cod});
        auto body = formula(depth - 1);
        arrows_.pop_back();
        return pick(2) ? fm::forall_arr(v, dom, cod, body) : fm::exists_arr(v, dom, cod, body);
    }

    FormulaPtr object_quantifier(int depth) {
        std::string v = fresh("X");
        objects_.push_back(v);
        auto body = formula(depth - 1);
        objects_.pop_back();
        return pick(2) ? fm::forall_obj(v, body) : fm::exists_obj(v, body);
    }

    // random walk in the type graph starting at dom
    std::pair<ArrTerm, ObjTerm> walk(const ObjTerm& dom) {
        ArrTerm t;
        ObjTerm at = dom;
        int len = 1 + pick(opt_.max_term_length);
        for (int i = 0; i < len; ++i) {
            std::vector<const Signature::ArrowSig*> next;
            for (const auto& a : arrows_)
                if (a.dom == at) next.push_back(&a);
            if (next.empty()) break;
            const auto* a = next[pick(static_cast<int>(next.size()))];
            t.factors.insert(t.factors.begin(), Factor{false, a->name, {}, -1});
            at = a->cod;
        }
        if (t.factors.empty()) t.factors.push_back(Factor{true, "", dom, -1});
        return {t, at};
    }

    FormulaPtr atom() {
        int k = pick(8);
        if (k == 0) return fm::top();
        if (k == 1) return fm::bot();
        ObjTerm dom = opt_.delta0 ? ObjTerm::terminal() : random_obj();
        auto [l, cod] = walk(dom);
        for (int attempt = 0; attempt < 8; ++attempt) {
            auto [r, cod2] = walk(dom);
            if (cod2 == cod) return fm::eq(l, r);
        }
        return fm::eq(l, l);
    }
};

}  // namespace

FormulaPtr random_formula(const Signature& sig, std::mt19937_64& rng, const GenOptions& opt) {
    return Generator(sig, rng, opt).formula(opt.depth);
}

}  // namespace stacksem

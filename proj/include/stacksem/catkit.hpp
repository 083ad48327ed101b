#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stacksem {

class CatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finite category given by explicit composition table.
struct FinCat {
    struct Arrow {
        std::string name;
        int dom = 0;
        int cod = 0;
    };

    std::vector<std::string> objects;
    std::vector<Arrow> arrows;
    std::vector<int> identity;  // per object
    std::vector<int> table;     // g * n_mor + f -> g o f, or -1

    int n_obj() const { return static_cast<int>(objects.size()); }
    int n_mor() const { return static_cast<int>(arrows.size()); }
    int dom(int m) const { return arrows[m].dom; }
    int cod(int m) const { return arrows[m].cod; }
    int comp(int g, int f) const { return table[static_cast<size_t>(g) * arrows.size() + f]; }
    bool is_identity(int m) const { return identity[arrows[m].dom] == m; }
    /// Arrows with the given domain, ascending.
    const std::vector<int>& out(int c) const { return out_[c]; }

    /// Rebuild derived indices. Call after filling the fields by hand.
    void finish();
    /// Throws CatError on a malformed table.
    void validate() const;

    static FinCat terminal();
    static FinCat z2();
    static FinCat arrow();
    static FinCat empty();

private:
    std::vector<std::vector<int>> out_;
};

/// Object of a presheaf topos: a covariant functor from the index category to finite sets.
/// Immutable, cheap to copy.
class Obj {
public:
    Obj();
    Obj(std::vector<int> card, std::vector<std::vector<int>> act);

    int n_comp() const { return static_cast<int>(rep_->card.size()); }
    int card(int c) const { return rep_->card[c]; }
    const std::vector<int>& cards() const { return rep_->card; }
    int offset(int c) const { return rep_->offset[c]; }
    int total() const { return rep_->total; }
    int n_act() const { return static_cast<int>(rep_->act.size()); }
    const std::vector<int>& act(int m) const { return rep_->act[m]; }
    int act(int m, int x) const { return rep_->act[m][x]; }
    const std::vector<std::vector<int>>& acts() const { return rep_->act; }

    /// Compact textual form; equal objects have equal keys.
    std::string key() const;

    friend bool operator==(const Obj& a, const Obj& b);
    friend bool operator!=(const Obj& a, const Obj& b) { return !(a == b); }
    /// Size, then cardinalities, then action tables.
    friend bool operator<(const Obj& a, const Obj& b);

private:
    struct Rep {
        std::vector<int> card;
        std::vector<int> offset;
        std::vector<std::vector<int>> act;
        int total = 0;
    };
    std::shared_ptr<const Rep> rep_;
};

/// Natural transformation between objects of the same topos.
struct Mor {
    Obj dom;
    Obj cod;
    std::vector<std::vector<int>> comp;  // per index object

    int operator()(int c, int x) const { return comp[c][x]; }
    std::string key() const;
    friend bool operator==(const Mor& a, const Mor& b) {
        return a.comp == b.comp && a.dom == b.dom && a.cod == b.cod;
    }
    friend bool operator!=(const Mor& a, const Mor& b) { return !(a == b); }
};

/// Subobject as a membership mask over the elements of its target.
struct Sub {
    Obj target;
    std::vector<char> bits;  // flat, indexed by target.offset(c) + x

    bool has(int c, int x) const { return bits[target.offset(c) + x] != 0; }
    int count() const;
    std::string key() const;
    friend bool operator==(const Sub& a, const Sub& b) { return a.bits == b.bits && a.target == b.target; }
    friend bool operator!=(const Sub& a, const Sub& b) { return !(a == b); }
};

/// Mask order: masks compared as binary numbers with element i as bit i.
bool mask_less(const std::vector<char>& a, const std::vector<char>& b);

struct Functor {
    std::vector<int> obj;
    std::vector<int> mor;
};

/// Category of elements of U. Object (c,u) has index U.offset(c)+u.
FinCat elements(const FinCat& C, const Obj& U);
/// Index of arrow (m,u) in elements(C,U).
int element_arrow(const FinCat& C, const Obj& U, int m, int u);
/// Functor between categories of elements induced by p: V -> U.
Functor elements_functor(const FinCat& C, const Mor& p);
/// Projection from elements(C,U) back to C.
Functor elements_projection(const FinCat& C, const Obj& U);

Obj reindex(const Obj& A, const Functor& F, const FinCat& D);
Mor reindex(const Mor& f, const Functor& F, const FinCat& D);

enum class Kind { FinSet, Presheaf, Slice };

class Topos;
using Handle = std::shared_ptr<const Topos>;

/// A presheaf topos on a finite index category. FinSet is the one-object case; a slice
/// over U is realized on the category of elements of U.
class Topos : public std::enable_shared_from_this<Topos> {
public:
    struct Span {
        Obj obj;
        Mor p1;
        Mor p2;
    };
    struct Cospan {
        Obj obj;
        Mor i1;
        Mor i2;
    };
    struct Image {
        Mor epi;     // X -> image object
        Sub mono;    // image as a subobject of the codomain
        Mor incl;    // image object -> codomain
    };
    struct Quotient {
        Obj obj;
        Mor proj;
    };
    struct Exponential {
        Obj obj;
        Span prod;   // B^A x A
        Mor eval;    // B^A x A -> B
        // families[c] lists the maps y(c) x A -> B, stage[c] is y(c) x A
        std::vector<std::vector<Mor>> families;
        std::vector<Span> stage;
    };
    struct Power {
        Obj obj;
        Span prod;   // A x PA
        Sub member;  // subobject of A x PA
    };
    struct Dependent {
        Obj obj;
        Mor proj;    // to the base of the product
    };

    static Handle finset();
    static Handle presheaf(FinCat C, std::string name);

    Topos(Kind kind, FinCat C, std::string name);

    Kind kind() const { return kind_; }
    const FinCat& index() const { return cat_; }
    const std::string& name() const { return name_; }
    std::uint64_t id() const { return id_; }

    // slices
    Handle slice(const Obj& U) const;
    Handle parent() const { return parent_; }
    const Obj& base() const { return base_; }
    /// Underlying object and structure map of an object of this slice.
    std::pair<Obj, Mor> sigma(const Obj& A) const;
    Mor sigma(const Mor& f) const;
    /// Object of this slice given by a map into the base.
    Obj over(const Mor& f) const;
    /// Slice morphism from a commuting triangle.
    Mor over(const Mor& g, const Mor& fa, const Mor& fb) const;
    /// Reindex an object/arrow living over the base along a map p: V -> base in the parent,
    /// into slice(V).
    Obj pull(const Mor& p, const Obj& A) const;
    Mor pull(const Mor& p, const Mor& f) const;

    bool is_object(const Obj& A) const;
    bool is_morphism(const Mor& f) const;
    void check_object(const Obj& A) const;

    Obj terminal() const;
    Obj initial() const;
    Obj representable(int c) const;
    /// Map y(c) -> X picking x in X(c).
    Mor element_map(int c, int x, const Obj& X) const;
    Mor identity(const Obj& A) const;
    Mor compose(const Mor& g, const Mor& f) const;
    Mor to_terminal(const Obj& A) const;
    Mor from_initial(const Obj& A) const;

    Span pullback(const Mor& f, const Mor& g) const;
    Span product(const Obj& A, const Obj& B) const;
    Mor pairing(const Span& prod, const Mor& f, const Mor& g) const;
    Cospan coproduct(const Obj& A, const Obj& B) const;
    Mor copairing(const Cospan& sum, const Mor& f, const Mor& g) const;

    // subobject lattice
    Sub top(const Obj& X) const;
    Sub bottom(const Obj& X) const;
    Sub meet(const Sub& a, const Sub& b) const;
    Sub join(const Sub& a, const Sub& b) const;
    Sub implies(const Sub& a, const Sub& b) const;
    bool leq(const Sub& a, const Sub& b) const;
    bool is_closed(const Sub& s) const;
    Sub pullback_sub(const Mor& f, const Sub& s) const;
    Sub image_sub(const Mor& f, const Sub& s) const;
    Sub dual_image(const Mor& f, const Sub& s) const;
    Sub equalizer(const Mor& f, const Mor& g) const;
    Image image_factor(const Mor& f) const;
    /// Subobject as an object with its inclusion.
    std::pair<Obj, Mor> sub_object(const Sub& s) const;
    bool factors_through(const Mor& p, const Sub& s) const;

    bool is_mono(const Mor& f) const;
    bool is_epi(const Mor& f) const;
    bool is_iso(const Mor& f) const;
    std::optional<Mor> inverse(const Mor& f) const;

    /// R is a subobject of product(X, X).
    Quotient quotient(const Obj& X, const Sub& R) const;
    Exponential exponential(const Obj& A, const Obj& B) const;
    /// Transpose g: C x A -> B to C -> B^A.
    Mor curry(const Exponential& e, const Span& ca, const Mor& g) const;
    Power power_object(const Obj& A) const;
    Obj omega() const;
    Mor truth() const;
    /// Characteristic map X -> omega of a subobject.
    Mor character(const Sub& s) const;
    /// Dependent product of g: A -> X along f: X -> Y, as an object over Y.
    Dependent pi(const Mor& f, const Mor& g) const;

    // enumeration, deterministic order
    const std::vector<Obj>& objects_up_to(int bound) const;
    std::vector<Mor> morphisms(const Obj& A, const Obj& B) const;
    std::vector<Mor> regular_epis_onto(const Obj& U, int bound) const;
    std::vector<Sub> subobjects(const Obj& X) const;
    std::vector<Mor> global_elements(const Obj& X) const;
    Obj canonical(const Obj& A) const;

private:
    Kind kind_;
    FinCat cat_;
    std::string name_;
    std::uint64_t id_;
    Handle parent_;
    Obj base_;

    mutable std::mutex cache_mu_;
    mutable std::map<std::string, std::weak_ptr<const Topos>> slices_;
    mutable std::map<int, std::vector<Obj>> objects_;
    mutable std::map<int, std::shared_ptr<const std::vector<Obj>>> by_size_;
};

struct ClauseReport {
    std::string clause;
    bool verified = false;
    std::string witness;  // empty when verified
};

struct WellPointedReport {
    int bound = 0;
    ClauseReport strong_generator;
    ClauseReport projective;
    ClauseReport indecomposable;
    ClauseReport nonempty;
    bool all_verified() const {
        return strong_generator.verified && projective.verified && indecomposable.verified && nonempty.verified;
    }
};

WellPointedReport check_wellpointed(const Handle& h, int bound);

/// Readable one-line rendering of an object, for witnesses and logs.
std::string describe(const FinCat& C, const Obj& A);

}  // namespace stacksem

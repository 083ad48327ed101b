#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacksem/catkit.hpp"

namespace stacksem {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int pos)
        : std::runtime_error(msg + " at position " + std::to_string(pos)), pos_(pos) {}
    int pos() const { return pos_; }

private:
    int pos_;
};

class TypeError : public std::runtime_error {
public:
    TypeError(const std::string& msg, int pos)
        : std::runtime_error("typing error: " + msg + (pos >= 0 ? " at position " + std::to_string(pos) : "")),
          pos_(pos) {}
    int pos() const { return pos_; }

private:
    int pos_;
};

/// Object term: the terminal object or a name (object variable or parameter).
struct ObjTerm {
    bool one = true;
    std::string name;

    static ObjTerm terminal() { return {}; }
    static ObjTerm named(std::string n) { return {false, std::move(n)}; }
    std::string str() const { return one ? "1" : name; }
    friend bool operator==(const ObjTerm& a, const ObjTerm& b) { return a.one == b.one && a.name == b.name; }
    friend bool operator!=(const ObjTerm& a, const ObjTerm& b) { return !(a == b); }
};

struct Factor {
    bool is_id = false;
    std::string name;  // arrow variable or parameter
    ObjTerm obj;       // for identities
    int pos = -1;
    friend bool operator==(const Factor& a, const Factor& b) {
        return a.is_id == b.is_id && a.name == b.name && a.obj == b.obj;
    }
};

/// Composite arrow term, outermost factor first: g o f is {g, f}.
struct ArrTerm {
    std::vector<Factor> factors;
    friend bool operator==(const ArrTerm& a, const ArrTerm& b) { return a.factors == b.factors; }
};

enum class FKind { True, False, Eq, And, Or, Implies, Not, ExistsObj, ForallObj, ExistsArr, ForallArr };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    FKind kind = FKind::True;
    ArrTerm lhs, rhs;      // Eq
    FormulaPtr a, b;       // children
    std::string var;       // binders
    ObjTerm dom, cod;      // arrow binders
    int pos = -1;

    bool is_quantifier() const { return kind >= FKind::ExistsObj; }
};

namespace fm {
FormulaPtr top();
FormulaPtr bot();
FormulaPtr eq(ArrTerm l, ArrTerm r);
FormulaPtr conj(FormulaPtr a, FormulaPtr b);
FormulaPtr disj(FormulaPtr a, FormulaPtr b);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr neg(FormulaPtr a);
FormulaPtr exists_obj(std::string v, FormulaPtr body);
FormulaPtr forall_obj(std::string v, FormulaPtr body);
FormulaPtr exists_arr(std::string v, ObjTerm dom, ObjTerm cod, FormulaPtr body);
FormulaPtr forall_arr(std::string v, ObjTerm dom, ObjTerm cod, FormulaPtr body);
/// Arrow term from names, outermost first.
ArrTerm term(std::initializer_list<std::string> names);
}  // namespace fm

bool same_formula(const FormulaPtr& x, const FormulaPtr& y);

/// Parameter declarations visible to the parser and type checker.
struct Signature {
    std::vector<std::string> objects;
    struct ArrowSig {
        std::string name;
        ObjTerm dom, cod;
    };
    std::vector<ArrowSig> arrows;

    bool has_object(const std::string& n) const;
    const ArrowSig* arrow(const std::string& n) const;
};

/// Parse without type checking.
FormulaPtr parse_raw(const std::string& text);
/// Parse and type check against the signature.
FormulaPtr parse(const std::string& text, const Signature& sig);
void typecheck(const FormulaPtr& phi, const Signature& sig);
std::string print(const FormulaPtr& phi);
std::string print(const ArrTerm& t);
/// Rename free object and arrow names. Throws TypeError if a binder would capture a new name.
FormulaPtr substitute(const FormulaPtr& phi, const std::map<std::string, std::string>& renaming);

/// Values for parameters (and, during evaluation, for bound variables) in one handle.
struct Env {
    struct Entry {
        std::string name;
        bool is_obj = true;
        Obj obj;
        Mor mor;
        ObjTerm dom, cod;
    };

    Handle h;
    std::vector<Entry> entries;

    const Entry* find(const std::string& n) const;
    Env with_obj(const std::string& n, Obj o) const;
    Env with_arr(const std::string& n, Mor m, ObjTerm dom, ObjTerm cod) const;
    Signature signature() const;
    Obj resolve(const ObjTerm& t) const;
    Mor eval(const ArrTerm& t) const;
    /// Compact serialization of all values; equal environments have equal keys.
    std::string key() const;
    /// Throws TypeError if an arrow value does not match its declared endpoints.
    void check() const;
};

/// A closed formula whose parameters live in the slice of `base` over U.
struct Sentence {
    Handle base;
    Obj U;
    FormulaPtr phi;
    Env env;  // env.h == base->slice(U)
};

/// Turn parameters given in the base handle into a sentence over U.
Sentence over(const Handle& base, const Obj& U, FormulaPtr phi, const Env& base_env);
/// Parameters of a sentence over U pulled back along p: V -> U.
Sentence pullback_formula(const Mor& p, const Sentence& s);
/// Pull back an environment living in slice(U) along p: V -> U.
Env pull_env(const Handle& base, const Mor& p, const Env& env);
/// Replace each object parameter A by the codomain of iso A -> A' and conjugate arrows.
Sentence isomorph(const Sentence& s, const std::map<std::string, Mor>& isos);

bool is_delta0(const FormulaPtr& phi, const Signature& sig);
/// Classifying subobject of U for a Delta0 sentence over U.
Sub classify_delta0(const Sentence& s);
/// Same construction inside an arbitrary handle; result is a subobject of its terminal.
Sub classify_in(const Env& env, const FormulaPtr& phi);
/// Stage-by-stage evaluation of a Delta0 formula in the category of elements of U; an
/// independent route to the classifying subobject used as a cross-check.
Sub kripke_joyal(const Sentence& s);

// ------------------------------------------------------------ internal logic

struct ITerm {
    bool is_var = true;
    std::string name;           // variable, or function symbol
    std::vector<ITerm> args;    // for applications; empty for constants
};

struct IFormula;
using IFormulaPtr = std::shared_ptr<const IFormula>;

struct IFormula {
    enum class Kind { True, False, Eq, Rel, And, Or, Implies, Not, Exists, Forall };
    Kind kind = Kind::True;
    ITerm l, r;
    std::string rel;
    std::vector<ITerm> args;
    IFormulaPtr a, b;
    std::string var;
    std::string type;
};

/// Function and relation symbols of the internal language, realized by parameters.
struct InternalSig {
    struct Fn {
        std::vector<std::string> args;          // argument object parameters
        std::string result;                     // object parameter or "1"
        std::string product;                    // object parameter standing for the product (arity >= 2)
        std::vector<std::string> projections;   // product -> args[i]
    };
    struct Rel {
        std::vector<std::string> args;
        std::string carrier;                    // object parameter R
        std::vector<std::string> projections;   // R -> args[i], jointly monic
    };
    std::map<std::string, Fn> functions;        // keyed by the arrow parameter implementing it
    std::map<std::string, Rel> relations;
};

std::string print(const IFormulaPtr& phi);
/// Delta0 formula to internal form: arrows out of 1 become terms, unary parameters become
/// function symbols, global elements become constants.
IFormulaPtr to_internal(const FormulaPtr& phi, const Signature& sig);
/// Internal form back to a Delta0 formula; relation atoms and n-ary applications introduce
/// fresh variables with projection side conditions.
FormulaPtr from_internal(const IFormulaPtr& phi, const InternalSig& isig, const Signature& sig);
/// Direct interpretation of an internal formula as a subobject of the terminal.
Sub classify_internal(const IFormulaPtr& phi, const InternalSig& isig, const Env& env);

}  // namespace stacksem

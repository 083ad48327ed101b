#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacksem/forcing.hpp"

namespace stacksem::mat {

class MatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ graphs

/// Directed graph; kids[y] lists the x with x ≺ y, sorted and duplicate-free.
struct Graph {
    std::vector<std::vector<int>> kids;

    int size() const { return static_cast<int>(kids.size()); }
    /// Throws MatError on out-of-range endpoints.
    static Graph from_edges(int n, const std::vector<std::pair<int, int>>& child_parent);
    std::vector<std::pair<int, int>> edges() const;
    bool has_edge(int child, int parent) const;
};

struct Apg {
    Graph graph;
    int root = 0;

    int size() const { return graph.size(); }
    const std::vector<int>& members() const { return graph.kids[root]; }
};

/// Checks accessibility and the root index.
Apg make_apg(Graph g, int root);
bool is_accessible(const Graph& g, int root);

/// Least fixed point of the inductive-closure operator is everything. Cross-checked against
/// acyclicity; a disagreement throws std::logic_error.
bool is_wellfounded(const Graph& g);
bool is_acyclic(const Graph& g);
bool is_extensional(const Graph& g);

/// rel[x][y] for x in X, y in Y.
using Relation = std::vector<std::vector<char>>;

/// Greatest bisimulation, by partition refinement on the disjoint union.
Relation largest_bisimulation(const Graph& X, const Graph& Y);
bool is_bisimulation(const Graph& X, const Graph& Y, const Relation& R);
bool is_simulation(const Graph& X, const Graph& Y, const std::vector<int>& f);

struct Quotient {
    Apg apg;
    std::vector<int> map;  // node of the input -> node of the quotient
};

/// Quotient by the largest self-bisimulation. Throws MatError unless well-founded.
Quotient extensional_quotient(const Apg& X);
/// Iterated quotient by "X/x and X/y are isomorphic", n rounds.
Quotient staged_quotient(const Apg& X, int n);
/// Hypothesis of the staged quotient: X/x is extensional whenever x has a path of length n to the root.
bool staged_hypothesis(const Apg& X, int n);

/// Full subgraph of nodes with a path to x, rooted at x. `old` receives the original indices.
Apg slash(const Apg& X, int x, std::vector<int>* old = nullptr);
/// Nodes of X/x other than x, ascending.
std::vector<int> slashslash(const Apg& X, int x);

/// Graph isomorphism by backtracking; maps X nodes to Y nodes.
std::optional<std::vector<int>> find_isomorphism(const Apg& X, const Apg& Y);

// ------------------------------------------------------------------- codes

/// Hash-consed hereditarily finite set. Equality is identity of the interned node.
class Hf {
public:
    Hf();  // empty set

    static Hf set(std::vector<Hf> members);  // duplicates allowed
    const std::vector<Hf>& members() const { return node_->members; }  // Ackermann order
    int card() const { return static_cast<int>(members().size()); }
    bool contains(const Hf& x) const;
    std::uint64_t id() const { return node_->id; }

    /// "{}", "{{}}", ...
    std::string str() const;
    /// Ackermann number in decimal.
    std::string ackermann() const;

    friend bool operator==(const Hf& a, const Hf& b) { return a.node_ == b.node_; }
    friend bool operator!=(const Hf& a, const Hf& b) { return a.node_ != b.node_; }
    /// Ackermann order.
    friend bool operator<(const Hf& a, const Hf& b);

private:
    struct Node {
        std::uint64_t id;
        std::vector<Hf> members;
    };
    std::shared_ptr<const Node> node_;
    explicit Hf(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
};

/// Throws MatError on malformed input.
Hf parse_hf(const std::string& braces);
int rank(const Hf& x);
std::vector<Hf> transitive_closure(const Hf& x);  // ascending
int tc_size(const Hf& x);
Hf von_neumann_code(int n);
Hf kuratowski(const Hf& a, const Hf& b);

/// V_r: all sets of rank below r, ascending.
std::vector<Hf> hf_upto_rank(int r);
/// All sets with transitive closure of at most b elements, ascending.
std::vector<Hf> hf_upto_tc(int b);

/// Throws MatError unless well-founded; non-extensional inputs are coded through their quotient.
Hf code(const Apg& X);
/// Minimal APG: one node per element of TC({c}), ascending, root last.
Apg decode(const Hf& c);

bool apg_eq(const Apg& X, const Apg& Y);
bool apg_mem(const Apg& X, const Apg& Y);
/// Same relations through bi-entire bisimulations, without codes.
bool apg_eq_bisim(const Apg& X, const Apg& Y);
bool apg_mem_bisim(const Apg& X, const Apg& Y);

/// Transitive-set code of the node's downward closure. G must be well-founded and extensional.
Hf mostowski(const Graph& G, int node);

// ----------------------------------------------------------- constructions

/// Carrier graphs before quotienting, restricted to the part accessible from the root.
/// Inputs must be well-founded and extensional (MatError otherwise).
Apg pair_carrier(const Apg& X, const Apg& Y);
Apg union_carrier(const Apg& X);
/// Also reports, for x in |X| and y in |Y|, the node of the Kuratowski pair (x,y)'.
Apg product_carrier(const Apg& X, const Apg& Y, std::map<std::pair<int, int>, int>* pairs = nullptr);
Apg function_set_carrier(const Apg& X, const Apg& Y);
Apg power_carrier(const Apg& X);
Apg tc_carrier(const Apg& X);

/// Inputs are quotiented first when not extensional.
Apg empty();
Apg pair(const Apg& X, const Apg& Y);
Apg union_of(const Apg& X);
Apg product(const Apg& X, const Apg& Y);
Apg function_set(const Apg& X, const Apg& Y);
Apg power(const Apg& X);
Apg transitive_closure(const Apg& X);
Apg von_neumann(int n);
/// Function picking the least member of each member. Throws MatError on an empty member.
Apg choice_fn(const Apg& X);
/// Members m of X with keep(m), via the subgraph of nodes reaching a kept member.
Apg separate(const Apg& X, const std::vector<char>& keep_member);

// -------------------------------------------------------------- formulas

enum class MKind { True, False, Eq, Mem, And, Or, Implies, Not, ExistsIn, ForallIn, Exists, Forall };

struct MFormula;
using MFormulaPtr = std::shared_ptr<const MFormula>;

struct MFormula {
    MKind kind = MKind::True;
    std::string x, y;        // atoms: x = y, x in y; quantifiers: variable x bounded by y
    MFormulaPtr a, b;
    int pos = 0;
};

/// Grammar as for structural formulas, with atoms `x = y`, `x in y` and binders
/// `forall x in y.`, `exists x in y.`, `forall x.`, `exists x.`. Throws ParseError.
MFormulaPtr parse_material(const std::string& text);
std::string print(const MFormulaPtr& f);
bool is_delta0(const MFormulaPtr& f);
std::vector<std::string> free_vars(const MFormulaPtr& f);

enum class Route { Direct, Amalgam };

/// Delta0 formulas are exact; unbounded quantifiers range over hf_upto_tc(tc_budget).
/// Throws MatError on an unbound variable.
Verdict eval_material(const MFormulaPtr& f, const std::map<std::string, Hf>& env, int tc_budget,
                      Route route = Route::Amalgam);

// ----------------------------------------------------------------- suites

struct AxiomResult {
    std::string name;
    int instances = 0;
    int violations = 0;
    std::vector<std::string> details;
};

struct AxiomReport {
    int rank_budget = 0;
    int universe = 0;
    std::vector<AxiomResult> results;
    bool ok() const;
};

/// Every axiom over V_{rank_budget}.
AxiomReport axiom_suite(int rank_budget);

/// Sets and material functions between HF sets, with the evident equivalence to FinSet.
class HfCategory {
public:
    HfCategory();
    const Handle& finset() const { return finset_; }
    /// Material functions X -> Y, as sets of Kuratowski pairs.
    std::vector<Hf> hom(const Hf& X, const Hf& Y) const;
    bool is_function(const Hf& f, const Hf& X, const Hf& Y) const;
    Hf apply(const Hf& f, const Hf& x) const;
    Hf compose(const Hf& g, const Hf& f) const;
    Hf identity(const Hf& X) const;
    /// Members in ascending order become 0..n-1.
    Obj to_finset(const Hf& X) const;
    Mor to_finset(const Hf& f, const Hf& X, const Hf& Y) const;

private:
    Handle finset_;
};

HfCategory hf_category();

/// Embedding of x as TC(x)+1 with the membership relation, assembled from HF-category data.
Apg embed(const Hf& x);

struct RoundtripReport {
    int bound = 0;
    int checked = 0;
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};

/// code(embed(x)) == x for every x with |TC(x)| <= bound.
RoundtripReport roundtrip_check(int bound);

// ------------------------------------------------------------- expressions

/// empty, vn(n), pair(a,b), union(a), product(a,b), funcs(a,b), power(a), tc(a), choice(a),
/// or a braces literal. Throws ParseError.
Apg eval_expr(const std::string& text);

/// {"n": .., "edges": [[child, parent], ..], "root": ..}
std::string apg_json(const Apg& X);
Apg apg_from_json(const std::string& text);

}  // namespace stacksem::mat

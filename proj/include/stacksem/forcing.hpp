#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stacksem/logic.hpp"

namespace stacksem {

struct Budget {
    int max_obj_size = 4;
    int max_cover_size = 4;
    int max_depth = 12;

    /// Throws std::invalid_argument unless every field is at least 1.
    void validate() const;
};

enum class Polarity { Forced, Refuted };
enum class Exactness { Exact, AtBudget };

struct Evidence;
using EvidencePtr = std::shared_ptr<const Evidence>;

/// Node of a witness tree or counterexample trace. A child's stage is the parent's stage
/// unless `stage_map` is set, in which case it is the domain of that map.
struct Evidence {
    std::string rule;
    Polarity polarity = Polarity::Forced;
    Exactness exactness = Exactness::Exact;
    int stage = -1;                  // site object of a representable stage
    std::optional<Mor> stage_map;    // child stage -> parent stage
    std::optional<Obj> witness_obj;
    std::optional<Mor> witness_arr;
    std::optional<Sub> mask;
    std::string note;
    std::vector<EvidencePtr> children;  // binary connectives keep slots [left, right], possibly null
};

struct Verdict {
    Polarity polarity = Polarity::Forced;
    Exactness exactness = Exactness::Exact;
    EvidencePtr evidence;

    bool forced() const { return polarity == Polarity::Forced; }
    bool exact() const { return exactness == Exactness::Exact; }
    bool forced_exact() const { return forced() && exact(); }
    bool refuted_exact() const { return !forced() && exact(); }
    std::string str() const;
};

enum class Engine {
    Stagewise,  // representable stages; the default
    Literal     // every clause over enumerated objects, subobject covers and regular epis
};

struct ForceOptions {
    Engine engine = Engine::Stagewise;
    bool delta0_shortcut = true;
    int threads = 1;
};

/// Forcing evaluator bound to one base handle. Memoizes per (stage, parameters, formula,
/// remaining depth); safe to call from several threads.
class Forcer {
public:
    Forcer(Handle base, Budget budget, ForceOptions options = {});

    /// s.base must be the forcer's base handle.
    Verdict forces(const Sentence& s);
    std::size_t memo_size() const;
    const Handle& base() const { return base_; }
    const Budget& budget() const { return budget_; }
    const ForceOptions& options() const { return opt_; }

private:
    struct Memo;

    Handle base_;
    Budget budget_;
    ForceOptions opt_;
    std::shared_ptr<Memo> memo_;

    Verdict eval(const Obj& V, const Env& env, const FormulaPtr& f, int depth, int stage);
    Verdict eval_uncached(const Obj& V, const Env& env, const FormulaPtr& f, int depth, int stage);
    Verdict stagewise(const Obj& V, const Env& env, const FormulaPtr& f, int depth, int stage);
    Verdict literal(const Obj& V, const Env& env, const FormulaPtr& f, int depth);
    Verdict over_stages(const Obj& V, const Env& env, const FormulaPtr& f, int depth);
    bool delta0(const FormulaPtr& f, const Env& env);
};

Verdict forces(const Sentence& s, const Budget& b, const ForceOptions& opt = {});

/// Tarskian truth of a sentence whose parameters live in h itself.
Verdict external_truth(const Handle& h, const FormulaPtr& phi, const Env& env, const Budget& b);

/// Conjunction of external truth over the global elements of U. FinSet only.
Verdict wellpointed_oracle(const Sentence& s, const Budget& b);

class Unsupported : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClassifierResult {
    std::optional<Sub> sub;   // empty: not found at budget
    int candidates = 0;       // subobjects examined
    int probes = 0;           // maps V -> U tested
};

ClassifierResult classifier_search(const Sentence& s, const Budget& b, const ForceOptions& opt = {});

/// Re-checks an Exact verdict clause by clause, using brute-force hom enumeration and the
/// Kripke-Joyal evaluator for Delta0 leaves. AtBudget verdicts are accepted as is.
bool verify(const Sentence& s, const Verdict& v, std::string* why = nullptr);

/// Functor identifying the index category of (S/U)/over(p) with that of S/V, for p: V -> U.
Functor slice_transport(const Handle& S, const Mor& p);

// ------------------------------------------------------------ property suite

struct PropertyResult {
    std::string name;
    int instances = 0;
    int violations = 0;
    std::vector<std::string> details;  // first few violations
};

struct SuiteReport {
    std::string handle;
    std::uint64_t seed = 0;
    int corpus = 0;
    std::vector<PropertyResult> results;
    bool ok() const;
};

struct SuiteConfig {
    Budget budget;
    std::uint64_t seed = 1;
    int corpus = 50;       // generated sentences
    int stage_bound = 3;   // |V| for probes; also the object bound for the well-pointedness sentences
    int formula_depth = 3;
};

/// Monotonicity, descent, deduction rules, well-pointedness sentences at 1, collection and
/// locality on a generated corpus.
SuiteReport property_suite(const Handle& h, const SuiteConfig& cfg);

/// Ten intuitionistic schemas instantiated with the given formulas. theta_obj has the free
/// object variable `X`; theta_arr has the free arrow variable `x: 1 -> A`.
std::vector<std::pair<std::string, FormulaPtr>> deduction_instances(const FormulaPtr& phi, const FormulaPtr& psi,
                                                                    const FormulaPtr& chi,
                                                                    const FormulaPtr& theta_obj,
                                                                    const FormulaPtr& theta_arr);

/// Sentences over 1 expressing that 1 is nonempty, projective, indecomposable and a strong
/// generator; parameters Om, t and Zero.
std::vector<std::pair<std::string, std::string>> wellpointed_sentences();

/// Internal choice: every epi onto 1 has a global section. Parameters Om and t.
extern const char* const kChoiceSentence;

}  // namespace stacksem

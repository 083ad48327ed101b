// stacksem: batch front end for forcing, material sets and the property suites.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "stacksem/builtins.hpp"
#include "stacksem/forcing.hpp"
#include "stacksem/io.hpp"
#include "stacksem/logic.hpp"
#include "stacksem/matset.hpp"

using namespace stacksem;
using io::Json;

namespace {

constexpr int kUsage = 2;

struct Common {
    std::string category = "finset";
    bool json = false;
};

struct BudgetFlags {
    int max_obj_size = 4;
    int max_cover_size = 4;
    int max_depth = 12;

    Budget budget() const {
        Budget b{max_obj_size, max_cover_size, max_depth};
        b.validate();
        return b;
    }
    Json json() const {
        return {{"max_obj_size", max_obj_size}, {"max_cover_size", max_cover_size}, {"max_depth", max_depth}};
    }
};

void add_category(CLI::App* cmd, Common& c) {
    auto* cat = cmd->add_option("--category", c.category, "builtin name or category JSON file");
    cmd->add_option("--builtin", c.category, "builtin category: finset, z2sets, sierpinski")->excludes(cat);
    cmd->add_flag("--json", c.json, "emit a JSON report");
}

void add_budget(CLI::App* cmd, BudgetFlags& b) {
    cmd->add_option("--max-obj-size", b.max_obj_size, "largest object (total elements) enumerated");
    cmd->add_option("--max-cover-size", b.max_cover_size, "largest cover domain enumerated");
    cmd->add_option("--max-depth", b.max_depth, "nesting depth before answering at budget");
}

double millis_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void emit(const std::string& command, const Json& config, const Json& result, double ms) {
    Json out;
    out["schema"] = io::kSchema;
    out["command"] = command;
    out["config"] = config;
    out["result"] = result;
    out["timing"] = {{"elapsed_ms", ms}};
    std::cout << out.dump(2) << '\n';
}

std::string strip_comments(const std::string& text) {
    std::string out, line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line[first] == '#') continue;
        out += line + '\n';
    }
    return out;
}

/// A path, a file in the formula directory, or the formula text itself.
std::string resolve_formula(const std::string& arg, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::is_regular_file(arg, ec)) return strip_comments(io::read_file(arg));
    if (!dir.empty() && fs::is_regular_file(fs::path(dir) / arg, ec))
        return strip_comments(io::read_file((fs::path(dir) / arg).string()));
    return arg;
}

/// "1", "0", a standard parameter, a presheaf file, or a cardinality in FinSet.
std::pair<Handle, Obj> resolve_stage(const Handle& h, const Env& params, const std::string& at) {
    if (at == "1") return {h, h->terminal()};
    if (at == "0") return {h, h->initial()};
    if (const auto* e = params.find(at); e && e->is_obj) return {h, e->obj};
    std::error_code ec;
    if (std::filesystem::is_regular_file(at, ec)) {
        auto [ph, A] = io::load_presheaf(at);
        if (ph->id() != h->id() && ph->name() != h->name())
            throw io::LoadError("presheaf file is over '" + ph->name() + "', not '" + h->name() + "'");
        return {h, A};
    }
    if (h->kind() == Kind::FinSet && !at.empty() &&
        std::all_of(at.begin(), at.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        int n = std::stoi(at);
        std::vector<int> id(n);
        for (int i = 0; i < n; ++i) id[i] = i;
        return {h, Obj({n}, {id})};
    }
    throw io::LoadError("unknown stage '" + at + "'");
}

int forcing_eval(const Common& c, const BudgetFlags& bf, const std::string& at, const std::string& formula,
                 const std::string& formula_dir, const std::string& engine, bool no_shortcut, int threads,
                 bool verify_flag, bool oracle_flag) {
    auto t0 = std::chrono::steady_clock::now();
    Budget b = bf.budget();
    Handle h = io::load_category(c.category);
    Env params = standard_params(h);
    auto [base, U] = resolve_stage(h, params, at);
    std::string text = resolve_formula(formula, formula_dir);
    FormulaPtr phi = parse(text, params.signature());
    Sentence s = over(base, U, phi, params);
    ForceOptions opt;
    if (engine == "literal")
        opt.engine = Engine::Literal;
    else if (engine != "stagewise")
        throw std::invalid_argument("unknown engine '" + engine + "'");
    opt.delta0_shortcut = !no_shortcut;
    opt.threads = threads;
    Verdict v = forces(s, b, opt);

    Json result = io::verdict_json(v);
    std::string why;
    if (verify_flag) {
        bool ok = verify(s, v, &why);
        result["verified"] = ok;
        if (!ok) result["verify_failure"] = why;
    }
    std::optional<Verdict> ext;
    if (oracle_flag) {
        try {
            ext = wellpointed_oracle(s, b);
            result["oracle"] = io::verdict_json(*ext);
        } catch (const Unsupported& e) {
            result["oracle"] = {{"unsupported", e.what()}};
        }
    }
    if (c.json) {
        Json config = {{"category", h->name()}, {"at", at},          {"formula", print(phi)},
                       {"budget", bf.json()},   {"engine", engine}, {"delta0_shortcut", !no_shortcut}};
        emit("forcing eval", config, result, millis_since(t0));
    } else {
        std::cout << v.str() << '\n';
        if (verify_flag) std::cout << "verify: " << (why.empty() ? "ok" : why) << '\n';
        if (ext) std::cout << "oracle: " << ext->str() << '\n';
    }
    return 0;
}

int matset_eval(bool json, const std::string& expr, const std::string& apg_file, const std::string& print_mode,
                const std::string& formula, const std::vector<std::string>& binds, int budget) {
    auto t0 = std::chrono::steady_clock::now();
    Json result, config;
    if (!formula.empty()) {
        std::map<std::string, mat::Hf> env;
        Json bound = Json::object();
        for (const auto& bnd : binds) {
            auto eq = bnd.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--bind expects name=expression");
            std::string name = bnd.substr(0, eq);
            mat::Hf value = mat::code(mat::eval_expr(bnd.substr(eq + 1)));
            env[name] = value;
            bound[name] = value.str();
        }
        auto f = mat::parse_material(formula);
        Verdict v = mat::eval_material(f, env, budget);
        result = io::verdict_json(v);
        config = {{"formula", mat::print(f)}, {"bind", bound}, {"tc_budget", budget}};
        if (!json) {
            std::cout << v.str() << '\n';
            return 0;
        }
    } else {
        if (expr.empty() == apg_file.empty()) throw std::invalid_argument("give exactly one of --expr, --apg");
        mat::Apg X = expr.empty() ? mat::apg_from_json(io::read_file(apg_file)) : mat::eval_expr(expr);
        mat::Hf c = mat::code(X);
        mat::Apg minimal = mat::decode(c);
        result = {{"braces", c.str()},
                  {"code", c.ackermann()},
                  {"members", c.card()},
                  {"apg", Json::parse(mat::apg_json(minimal))}};
        config = {{"expr", expr}, {"apg", apg_file}, {"print", print_mode}};
        if (!json) {
            if (print_mode == "braces")
                std::cout << c.str() << '\n';
            else if (print_mode == "code")
                std::cout << c.ackermann() << '\n';
            else if (print_mode == "apg")
                std::cout << mat::apg_json(minimal) << '\n';
            else
                throw std::invalid_argument("unknown print mode '" + print_mode + "'");
            return 0;
        }
    }
    emit("matset eval", config, result, millis_since(t0));
    return 0;
}

int axioms_run(bool json, int rank_budget, int roundtrip_bound) {
    auto t0 = std::chrono::steady_clock::now();
    auto rep = mat::axiom_suite(rank_budget);
    auto rt = mat::roundtrip_check(roundtrip_bound);
    bool ok = rep.ok() && rt.ok();
    if (json) {
        Json result = io::axioms_json(rep);
        result["roundtrip"] = {{"bound", rt.bound}, {"checked", rt.checked}, {"failures", rt.failures}};
        result["ok"] = ok;
        emit("axioms run", {{"rank_budget", rank_budget}, {"roundtrip_bound", roundtrip_bound}}, result,
             millis_since(t0));
    } else {
        std::cout << "universe: " << rep.universe << " sets of rank below " << rank_budget << '\n';
        for (const auto& r : rep.results)
            std::cout << (r.violations ? "FAIL " : "ok   ") << r.name << " (" << r.instances << " instances, "
                      << r.violations << " violations)\n";
        std::cout << (rt.ok() ? "ok   " : "FAIL ") << "roundtrip (" << rt.checked << " checks)\n";
    }
    return ok ? 0 : 1;
}

int category_check(const Common& c, int bound) {
    auto t0 = std::chrono::steady_clock::now();
    Handle h = io::load_category(c.category);
    auto rep = check_wellpointed(h, bound);
    if (c.json) {
        emit("category check", {{"category", h->name()}, {"bound", bound}}, io::wellpointed_json(rep),
             millis_since(t0));
    } else {
        for (const auto* cl : {&rep.nonempty, &rep.projective, &rep.indecomposable, &rep.strong_generator})
            std::cout << (cl->verified ? "verified  " : "refuted   ") << cl->clause
                      << (cl->witness.empty() ? "" : ": " + cl->witness) << '\n';
        std::cout << (rep.all_verified() ? "well-pointed up to bound " : "not well-pointed at bound ") << bound
                  << '\n';
    }
    return 0;
}

int suite_run(const Common& c, const BudgetFlags& bf, const SuiteConfig& base) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteConfig cfg = base;
    cfg.budget = bf.budget();
    Handle h = io::load_category(c.category);
    auto rep = property_suite(h, cfg);
    if (c.json) {
        Json config = {{"category", h->name()},          {"seed", cfg.seed},
                       {"corpus", cfg.corpus},           {"stage_bound", cfg.stage_bound},
                       {"formula_depth", cfg.formula_depth}, {"budget", bf.json()}};
        emit("suite run", config, io::suite_json(rep), millis_since(t0));
    } else {
        for (const auto& r : rep.results)
            std::cout << (r.violations ? "FAIL " : "ok   ") << r.name << " (" << r.instances << " instances, "
                      << r.violations << " violations)\n";
    }
    return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stacksem: stack semantics over finite presheaf toposes and finite material sets"};
    app.require_subcommand(1);

    Common common;
    BudgetFlags budget;

    auto* forcing = app.add_subcommand("forcing", "forcing relation");
    forcing->require_subcommand(1);
    auto* feval = forcing->add_subcommand("eval", "decide U |- phi at budget");
    add_category(feval, common);
    add_budget(feval, budget);
    std::string at = "1", formula, formula_dir = STACKSEM_FORMULA_DIR, engine = "stagewise";
    bool no_shortcut = false, verify_flag = false, oracle_flag = false;
    int threads = 1;
    feval->add_option("--at", at, "stage: 1, 0, a parameter name, a presheaf file, or n in finset");
    feval->add_option("--formula", formula, "formula text, file, or name in the formula directory")->required();
    feval->add_option("--formula-dir", formula_dir, "directory searched for named formulas");
    feval->add_option("--engine", engine, "stagewise or literal");
    feval->add_flag("--no-delta0-shortcut", no_shortcut, "force Delta0 sentences clause by clause");
    feval->add_option("--threads", threads, "worker threads for the top-level branches")->check(CLI::PositiveNumber);
    feval->add_flag("--verify", verify_flag, "re-check an exact verdict independently");
    feval->add_flag("--oracle", oracle_flag, "also report the well-pointed external oracle");

    auto* matset = app.add_subcommand("matset", "material sets");
    matset->require_subcommand(1);
    auto* meval = matset->add_subcommand("eval", "evaluate a set expression or a material formula");
    std::string expr, apg_file, print_mode = "braces", mformula;
    std::vector<std::string> binds;
    int tc_budget = 4;
    bool mjson = false;
    meval->add_option("--expr", expr, "set expression");
    meval->add_option("--apg", apg_file, "APG JSON file");
    meval->add_option("--print", print_mode, "braces, code or apg")
        ->check(CLI::IsMember({"braces", "code", "apg"}));
    meval->add_option("--formula", mformula, "material formula");
    meval->add_option("--bind", binds, "name=expression, for the formula's free variables");
    meval->add_option("--tc-budget", tc_budget, "transitive-closure size for unbounded quantifiers")
        ->check(CLI::PositiveNumber);
    meval->add_flag("--json", mjson, "emit a JSON report");

    auto* axioms = app.add_subcommand("axioms", "material axiom suite");
    axioms->require_subcommand(1);
    auto* arun = axioms->add_subcommand("run", "check every axiom over V_rank");
    int rank_budget = 4, roundtrip_bound = 4;
    bool ajson = false;
    arun->add_option("--rank-budget", rank_budget, "sets of rank below this")->check(CLI::Range(1, 5));
    arun->add_option("--roundtrip-bound", roundtrip_bound, "transitive-closure size for the round trip")
        ->check(CLI::Range(0, 6));
    arun->add_flag("--json", ajson, "emit a JSON report");

    auto* category = app.add_subcommand("category", "category checks");
    category->require_subcommand(1);
    auto* ccheck = category->add_subcommand("check", "well-pointedness clauses up to a bound");
    add_category(ccheck, common);
    int bound = 4;
    ccheck->add_option("--bound", bound, "largest object enumerated")->check(CLI::PositiveNumber);

    auto* suite = app.add_subcommand("suite", "property suite");
    suite->require_subcommand(1);
    auto* srun = suite->add_subcommand("run", "monotonicity, descent, deduction and locality checks");
    add_category(srun, common);
    add_budget(srun, budget);
    SuiteConfig scfg;
    srun->add_option("--seed", scfg.seed, "corpus seed");
    srun->add_option("--corpus", scfg.corpus, "generated sentences")->check(CLI::PositiveNumber);
    srun->add_option("--stage-bound", scfg.stage_bound, "largest stage for monotonicity probes")
        ->check(CLI::PositiveNumber);
    srun->add_option("--formula-depth", scfg.formula_depth, "depth of generated formulas")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (feval->parsed())
            return forcing_eval(common, budget, at, formula, formula_dir, engine, no_shortcut, threads, verify_flag,
                                oracle_flag);
        if (meval->parsed()) return matset_eval(mjson, expr, apg_file, print_mode, mformula, binds, tc_budget);
        if (arun->parsed()) return axioms_run(ajson, rank_budget, roundtrip_bound);
        if (ccheck->parsed()) return category_check(common, bound);
        if (srun->parsed()) return suite_run(common, budget, scfg);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kUsage;
    } catch (const TypeError& e) {
        std::cerr << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

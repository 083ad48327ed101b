#include "stacksem/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stacksem/builtins.hpp"

namespace stacksem::io {

namespace {

std::string identity_name(const std::string& obj) { return "1_" + obj; }

int index_of(const std::vector<std::string>& names, const std::string& n, const char* what) {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == n) return static_cast<int>(i);
    throw LoadError(std::string("unknown ") + what + " '" + n + "'");
}

bool is_builtin(const std::string& s) {
    for (const auto& b : builtin_names())
        if (b == s) return true;
    return false;
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

FinCat category_from_json(const Json& j) {
    try {
        FinCat C;
        for (const auto& o : j.at("objects")) C.objects.push_back(o.get<std::string>());
        for (size_t c = 0; c < C.objects.size(); ++c) {
            C.identity.push_back(static_cast<int>(C.arrows.size()));
            C.arrows.push_back({identity_name(C.objects[c]), static_cast<int>(c), static_cast<int>(c)});
        }
        std::vector<std::string> names;
        for (const auto& a : C.arrows) names.push_back(a.name);
        const Json morphisms = j.value("morphisms", Json::array());
        for (const auto& m : morphisms) {
            std::string id = m.at("id").get<std::string>();
            if (std::find(names.begin(), names.end(), id) != names.end())
                throw LoadError("duplicate morphism '" + id + "'");
            C.arrows.push_back({id, index_of(C.objects, m.at("dom").get<std::string>(), "object"),
                                index_of(C.objects, m.at("cod").get<std::string>(), "object")});
            names.push_back(id);
        }
        const int n = C.n_mor();
        C.table.assign(static_cast<size_t>(n) * n, -1);
        for (int f = 0; f < n; ++f) {
            C.table[static_cast<size_t>(C.identity[C.cod(f)]) * n + f] = f;
            C.table[static_cast<size_t>(f) * n + C.identity[C.dom(f)]] = f;
        }
        const Json composition = j.value("composition", Json::array());
        for (const auto& e : composition) {
            if (!e.is_array() || e.size() != 3) throw LoadError("composition entries are [g, f, gf]");
            int g = index_of(names, e[0].get<std::string>(), "morphism");
            int f = index_of(names, e[1].get<std::string>(), "morphism");
            int gf = index_of(names, e[2].get<std::string>(), "morphism");
            int& slot = C.table[static_cast<size_t>(g) * n + f];
            if (slot != -1 && slot != gf) throw LoadError("conflicting composite for " + names[g] + " o " + names[f]);
            slot = gf;
        }
        C.finish();
        C.validate();
        return C;
    } catch (const CatError& e) {
        throw LoadError(std::string("invalid category: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("invalid category JSON: ") + e.what());
    }
}

Json category_to_json(const FinCat& C) {
    Json j;
    j["objects"] = C.objects;
    j["morphisms"] = Json::array();
    for (int m = 0; m < C.n_mor(); ++m)
        if (!C.is_identity(m))
            j["morphisms"].push_back(
                {{"id", C.arrows[m].name}, {"dom", C.objects[C.dom(m)]}, {"cod", C.objects[C.cod(m)]}});
    j["composition"] = Json::array();
    for (int g = 0; g < C.n_mor(); ++g)
        for (int f = 0; f < C.n_mor(); ++f) {
            if (C.is_identity(g) || C.is_identity(f) || C.comp(g, f) < 0) continue;
            int h = C.comp(g, f);
            j["composition"].push_back(
                {C.arrows[g].name, C.arrows[f].name,
                 C.is_identity(h) ? identity_name(C.objects[C.dom(h)]) : C.arrows[h].name});
        }
    return j;
}

Handle load_category(const std::string& source) {
    if (is_builtin(source)) return builtin(source);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(source, ec)) {
        std::string names;
        for (const auto& b : builtin_names()) names += (names.empty() ? "" : ", ") + b;
        throw LoadError("unknown builtin category '" + source + "' and no such file (builtins: " + names + ")");
    }
    Json j;
    try {
        j = Json::parse(read_file(source));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("'" + source + "': " + e.what());
    }
    std::string name = j.value("name", std::filesystem::path(source).stem().string());
    return Topos::presheaf(category_from_json(j), name);
}

std::pair<Handle, Obj> presheaf_from_json(const Json& j, const std::string& base_dir) {
    try {
        std::string src = j.at("category").get<std::string>();
        Handle h = is_builtin(src) ? builtin(src) : load_category((std::filesystem::path(base_dir) / src).string());
        const FinCat& C = h->index();
        std::vector<int> card(C.n_obj(), 0);
        for (const auto& [name, n] : j.at("card").items()) card[index_of(C.objects, name, "object")] = n.get<int>();
        std::vector<std::vector<int>> act(C.n_mor());
        std::vector<char> given(C.n_mor(), 0);
        const Json acts = j.value("act", Json::object());
        for (const auto& [name, table] : acts.items()) {
            int m = -1;
            for (int k = 0; k < C.n_mor(); ++k)
                if (C.arrows[k].name == name) m = k;
            if (m < 0) throw LoadError("unknown morphism '" + name + "'");
            act[m] = table.get<std::vector<int>>();
            given[m] = 1;
        }
        for (int m = 0; m < C.n_mor(); ++m) {
            if (given[m]) continue;
            if (!C.is_identity(m)) throw LoadError("missing action of '" + C.arrows[m].name + "'");
            act[m].resize(card[C.dom(m)]);
            for (int x = 0; x < card[C.dom(m)]; ++x) act[m][x] = x;
        }
        Obj A(card, act);
        if (!h->is_object(A)) throw LoadError("action tables do not define a functor");
        return {h, A};
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("invalid presheaf JSON: ") + e.what());
    }
}

std::pair<Handle, Obj> load_presheaf(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("'" + path + "': " + e.what());
    }
    return presheaf_from_json(j, std::filesystem::path(path).parent_path().string());
}

Json presheaf_to_json(const FinCat& C, const Obj& A, const std::string& category) {
    Json j;
    j["category"] = category;
    j["card"] = Json::object();
    for (int c = 0; c < C.n_obj(); ++c) j["card"][C.objects[c]] = A.card(c);
    j["act"] = Json::object();
    for (int m = 0; m < C.n_mor(); ++m) {
        if (C.is_identity(m)) continue;
        std::vector<int> t;
        for (int x = 0; x < A.card(C.dom(m)); ++x) t.push_back(A.act(m, x));
        j["act"][C.arrows[m].name] = t;
    }
    return j;
}

Json evidence_json(const EvidencePtr& e) {
    if (!e) return nullptr;
    Json j;
    j["rule"] = e->rule;
    j["polarity"] = e->polarity == Polarity::Forced ? "Forced" : "Refuted";
    j["exactness"] = e->exactness == Exactness::Exact ? "Exact" : "AtBudget";
    if (e->stage >= 0) j["stage"] = e->stage;
    if (e->stage_map) j["stage_map"] = e->stage_map->key();
    if (e->witness_obj) j["witness_obj"] = e->witness_obj->key();
    if (e->witness_arr) j["witness_arr"] = e->witness_arr->key();
    if (e->mask) j["mask"] = e->mask->key();
    if (!e->note.empty()) j["note"] = e->note;
    if (!e->children.empty()) {
        j["children"] = Json::array();
        for (const auto& c : e->children) j["children"].push_back(evidence_json(c));
    }
    return j;
}

Json verdict_json(const Verdict& v) {
    Json j;
    j["polarity"] = v.forced() ? "Forced" : "Refuted";
    j["exactness"] = v.exact() ? "Exact" : "AtBudget";
    j["verdict"] = v.str();
    j["evidence"] = evidence_json(v.evidence);
    return j;
}

namespace {

template <class R>
Json result_list(const std::vector<R>& rs) {
    Json a = Json::array();
    for (const auto& r : rs)
        a.push_back({{"name", r.name}, {"instances", r.instances}, {"violations", r.violations}, {"details", r.details}});
    return a;
}

Json clause_json(const ClauseReport& c) {
    Json j{{"clause", c.clause}, {"verified", c.verified}};
    if (!c.witness.empty()) j["witness"] = c.witness;
    return j;
}

}  // namespace

Json suite_json(const SuiteReport& r) {
    return Json{{"handle", r.handle}, {"seed", r.seed}, {"corpus", r.corpus}, {"ok", r.ok()},
                {"results", result_list(r.results)}};
}

Json wellpointed_json(const WellPointedReport& r) {
    return Json{{"bound", r.bound},
                {"all_verified", r.all_verified()},
                {"clauses",
                 Json::array({clause_json(r.nonempty), clause_json(r.projective), clause_json(r.indecomposable),
                              clause_json(r.strong_generator)})}};
}

Json axioms_json(const mat::AxiomReport& r) {
    return Json{{"rank_budget", r.rank_budget}, {"universe", r.universe}, {"ok", r.ok()},
                {"results", result_list(r.results)}};
}

}  // namespace stacksem::io

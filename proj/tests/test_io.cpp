#include <doctest.h>

#include "stacksem/builtins.hpp"
#include "stacksem/io.hpp"

using namespace stacksem;
using io::Json;

namespace {

std::string data(const std::string& name) { return std::string(STACKSEM_DATA_DIR) + "/" + name; }

}  // namespace

TEST_CASE("category files") {
    Handle h = io::load_category(data("arrow.json"));
    const FinCat& C = h->index();
    CHECK(h->name() == "walking-arrow");
    CHECK(C.n_obj() == 2);
    CHECK(C.n_mor() == 3);
    CHECK(h->objects_up_to(3).size() == builtin("sierpinski")->objects_up_to(3).size());

    Handle m = io::load_category(data("monoid2.json"));
    CHECK(m->index().n_mor() == 2);

    // round trip through the writer
    FinCat back = io::category_from_json(io::category_to_json(FinCat::arrow()));
    CHECK(back.n_mor() == 3);
    FinCat z2 = io::category_from_json(io::category_to_json(FinCat::z2()));
    CHECK(z2.n_mor() == 2);

    CHECK_THROWS_AS(io::load_category("no-such-builtin"), io::LoadError);
    // e o e missing
    CHECK_THROWS_AS(io::category_from_json(Json::parse(
                        R"({"objects":["*"],"morphisms":[{"id":"e","dom":"*","cod":"*"}],"composition":[]})")),
                    io::LoadError);
    // composite of the wrong type
    CHECK_THROWS_AS(io::category_from_json(Json::parse(R"({"objects":["a","b"],
        "morphisms":[{"id":"f","dom":"a","cod":"b"},{"id":"g","dom":"b","cod":"a"}],
        "composition":[["g","f","f"],["f","g","1_b"]]})")),
                    io::LoadError);
    // an involution is fine; the second table breaks associativity at b o (a o a)
    CHECK_NOTHROW(io::category_from_json(Json::parse(R"({"objects":["*"],
        "morphisms":[{"id":"s","dom":"*","cod":"*"}],"composition":[["s","s","1_*"]]})")));
    CHECK_THROWS_AS(io::category_from_json(Json::parse(R"({"objects":["*"],
        "morphisms":[{"id":"a","dom":"*","cod":"*"},{"id":"b","dom":"*","cod":"*"}],
        "composition":[["a","a","1_*"],["b","b","b"],["a","b","b"],["b","a","a"]]})")),
                    io::LoadError);
    CHECK_THROWS_AS(io::category_from_json(Json::parse(R"({"morphisms":[]})")), io::LoadError);
}

TEST_CASE("presheaf files") {
    auto [h, A] = io::load_presheaf(data("free_orbit.json"));
    CHECK(h->name() == "z2sets");
    CHECK(h->is_object(A));
    CHECK(A.total() == 2);
    CHECK(A.key() == h->representable(0).key());

    auto [g, B] = io::load_presheaf(data("arrow_point.json"));
    CHECK(g->index().n_obj() == 2);
    CHECK(B.card(0) == 1);
    CHECK(B.card(1) == 2);
    Json back = io::presheaf_to_json(g->index(), B, "arrow.json");
    auto [g2, B2] = io::presheaf_from_json(back, STACKSEM_DATA_DIR);
    CHECK(B2.key() == B.key());

    CHECK_THROWS_AS(io::presheaf_from_json(Json::parse(R"({"category":"z2sets","card":{"*":2},"act":{"s":[0,0]}})")),
                    io::LoadError);
    CHECK_THROWS_AS(io::presheaf_from_json(Json::parse(R"({"category":"z2sets","card":{"*":2}})")), io::LoadError);
    CHECK_THROWS_AS(io::presheaf_from_json(Json::parse(R"({"category":"z2sets","card":{"x":2},"act":{}})")),
                    io::LoadError);
}

TEST_CASE("APG files") {
    auto X = mat::apg_from_json(io::read_file(data("vn2.apg.json")));
    CHECK(mat::code(X) == mat::von_neumann_code(2));
}

TEST_CASE("report JSON is stable") {
    Handle h = builtin("sierpinski");
    Env params = standard_params(h);
    Sentence s = over(h, h->terminal(), parse("forall g: 1 -> Om. g = t or not g = t", params.signature()), params);
    Verdict v = forces(s, Budget{});
    Json j = io::verdict_json(v);
    CHECK(j["verdict"] == "Refuted(Exact)");
    CHECK(j["evidence"]["rule"] == "stages");
    CHECK(io::verdict_json(forces(s, Budget{})).dump() == j.dump());

    auto wp = io::wellpointed_json(check_wellpointed(builtin("finset"), 3));
    CHECK(wp["all_verified"] == true);
    CHECK(wp["clauses"].size() == 4);

    auto ax = io::axioms_json(mat::axiom_suite(2));
    CHECK(ax["ok"] == true);
    CHECK(ax["results"].size() == 10);
}

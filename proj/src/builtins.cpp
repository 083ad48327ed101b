#include "stacksem/builtins.hpp"

namespace stacksem {

Handle builtin(const std::string& name) {
    if (name == "finset") return Topos::finset();
    if (name == "z2sets") {
        static const Handle h = Topos::presheaf(FinCat::z2(), "z2sets");
        return h;
    }
    if (name == "sierpinski") {
        static const Handle h = Topos::presheaf(FinCat::arrow(), "sierpinski");
        return h;
    }
    throw CatError("unknown builtin category '" + name + "'");
}

std::vector<std::string> builtin_names() { return {"finset", "z2sets", "sierpinski"}; }

Env standard_params(const Handle& h) {
    Env env{h, {}};
    const ObjTerm one = ObjTerm::terminal();
    env = env.with_obj("Om", h->omega());
    env = env.with_arr("t", h->truth(), one, ObjTerm::named("Om"));
    env = env.with_obj("Zero", h->initial());
    auto two = h->coproduct(h->terminal(), h->terminal());
    env = env.with_obj("Two", two.obj);
    env = env.with_arr("i0", two.i1, one, ObjTerm::named("Two"));
    env = env.with_arr("i1", two.i2, one, ObjTerm::named("Two"));
    for (int c = 0; c < h->index().n_obj(); ++c) env = env.with_obj("Y" + std::to_string(c), h->representable(c));
    if (h->name() == "z2sets") env = env.with_obj("Orb", h->representable(0));
    return env;
}

}  // namespace stacksem

#pragma once

#include <string>
#include <vector>

#include "stacksem/logic.hpp"

namespace stacksem {

/// "finset", "z2sets" or "sierpinski". Throws CatError on other names.
Handle builtin(const std::string& name);
std::vector<std::string> builtin_names();

/// Om, t: 1 -> Om, Zero, Two with i0, i1: 1 -> Two, and one representable Y<k> per site object
/// (z2sets also calls its representable Orb).
Env standard_params(const Handle& h);

}  // namespace stacksem

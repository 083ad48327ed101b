#pragma once

#include <string>

#include "json.hpp"
#include "stacksem/catkit.hpp"
#include "stacksem/forcing.hpp"
#include "stacksem/matset.hpp"

namespace stacksem::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "stacksem-report/1";

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// {objects: [name..], morphisms: [{id, dom, cod}..], composition: [[g, f, gf]..]}.
/// Identities are implicit and named "1_<object>"; composites involving them are implied.
/// Validated with FinCat::validate (LoadError on failure).
FinCat category_from_json(const Json& j);
Json category_to_json(const FinCat& C);

/// Builtin name or path of a category file.
Handle load_category(const std::string& source);

/// {category: <builtin or path, relative to the file>, card: {object: n}, act: {morphism: [..]}}.
/// Returns the handle with the object.
std::pair<Handle, Obj> presheaf_from_json(const Json& j, const std::string& base_dir = ".");
std::pair<Handle, Obj> load_presheaf(const std::string& path);
Json presheaf_to_json(const FinCat& C, const Obj& A, const std::string& category);

std::string read_file(const std::string& path);

Json evidence_json(const EvidencePtr& e);
Json verdict_json(const Verdict& v);
Json suite_json(const SuiteReport& r);
Json wellpointed_json(const WellPointedReport& r);
Json axioms_json(const mat::AxiomReport& r);

}  // namespace stacksem::io

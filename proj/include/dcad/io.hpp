#pragma once

// JSON documents exchanged by the CLI and the server. Every document carries
// a schema version field "v".

#include "dcad/dsl.hpp"
#include "dcad/mesh.hpp"
#include "dcad/model.hpp"
#include "dcad/objectives.hpp"
#include "dcad/sync.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace dcad {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct EditRequest {
    EditSpec edit;
    ObjectiveConfig config;
    std::optional<long> revision;
};

/// {v, moved: [{vid, target: [x, y, z]}], fixed: [vid], objectives: [...],
///  gamma: {name: value}, revision}. Throws EditError on malformed input.
EditRequest parse_edit_request(const json& j);
json to_json(const EditRequest& r);

json diagnostics_json(const std::vector<dsl::Diagnostic>& ds);
/// {v, vertices: flat xyz, faces: polygons, triangles, edges}
json mesh_json(const MeshTopology& topo, std::span<const double> V);
/// {v, params: [{name, value}]}
json params_json(const std::vector<std::string>& names, std::span<const double> P);
json gallery_json(const OptionGallery& g, const std::vector<std::string>& param_names);
json run_json(const ObjectiveRun& r);

/// Applies "key=value" (e.g. "bh=0.01") to config.gamma. Throws Error.
void apply_gamma_override(ObjectiveConfig& config, const std::string& assignment);
/// Comma-separated objective names. Throws Error on unknown names.
std::vector<ObjectiveId> parse_objective_list(const std::string& list);

std::string obj_text(const MeshTopology& topo, std::span<const double> V, bool triangulated = false);

} // namespace dcad

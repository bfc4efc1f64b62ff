#include "dcad/io.hpp"
#include "dcad/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcad {

namespace {

std::size_t as_vid(const json& v) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw EditError("vertex ids must be non-negative integers");
    return v.get<std::size_t>();
}

} // namespace

EditRequest parse_edit_request(const json& j) {
    if (!j.is_object()) throw EditError("edit must be a JSON object");
    if (j.contains("v") && j["v"] != kSchemaVersion)
        throw EditError("unsupported edit schema version " + j["v"].dump());
    EditRequest r;
    if (j.contains("moved")) {
        if (!j["moved"].is_array()) throw EditError("'moved' must be an array");
        for (const auto& m : j["moved"]) {
            if (!m.is_object() || !m.contains("vid") || !m.contains("target"))
                throw EditError("each moved entry needs 'vid' and 'target'");
            const auto& t = m["target"];
            if (!t.is_array() || t.size() != 3) throw EditError("target must be [x, y, z]");
            MovedVertex mv;
            mv.vid = as_vid(m["vid"]);
            for (int c = 0; c < 3; ++c) {
                if (!t[static_cast<std::size_t>(c)].is_number()) throw EditError("target coordinates must be numbers");
                mv.target[c] = t[static_cast<std::size_t>(c)].get<double>();
            }
            r.edit.moved.push_back(mv);
        }
    }
    if (j.contains("fixed")) {
        if (!j["fixed"].is_array()) throw EditError("'fixed' must be an array");
        for (const auto& v : j["fixed"]) r.edit.fixed.push_back(as_vid(v));
    }
    if (j.contains("objectives")) {
        if (!j["objectives"].is_array()) throw EditError("'objectives' must be an array");
        r.config.enabled.clear();
        for (const auto& o : j["objectives"]) {
            if (!o.is_string()) throw EditError("objective names must be strings");
            auto id = parse_objective(o.get<std::string>());
            if (!id) throw EditError("unknown objective '" + o.get<std::string>() + "'");
            r.config.enabled.push_back(*id);
        }
    }
    if (j.contains("gamma")) {
        if (!j["gamma"].is_object()) throw EditError("'gamma' must be an object");
        for (const auto& [k, v] : j["gamma"].items()) {
            auto id = parse_objective(k);
            if (!id) throw EditError("unknown objective '" + k + "' in gamma");
            if (!v.is_number() || !(v.get<double>() > 0)) throw EditError("gamma values must be positive numbers");
            r.config.gamma[*id] = v.get<double>();
        }
    }
    if (j.contains("revision")) {
        if (!j["revision"].is_number_integer()) throw EditError("'revision' must be an integer");
        r.revision = j["revision"].get<long>();
    }
    return r;
}

json to_json(const EditRequest& r) {
    json j;
    j["v"] = kSchemaVersion;
    j["moved"] = json::array();
    for (const auto& m : r.edit.moved)
        j["moved"].push_back({{"vid", m.vid}, {"target", {m.target.x(), m.target.y(), m.target.z()}}});
    j["fixed"] = r.edit.fixed;
    j["objectives"] = json::array();
    for (auto id : r.config.enabled) j["objectives"].push_back(objective_name(id));
    j["gamma"] = json::object();
    for (const auto& [id, g] : r.config.gamma) j["gamma"][objective_name(id)] = g;
    if (r.revision) j["revision"] = *r.revision;
    return j;
}

json diagnostics_json(const std::vector<dsl::Diagnostic>& ds) {
    json a = json::array();
    for (const auto& d : ds)
        a.push_back({{"severity", d.severity == dsl::Diagnostic::Severity::Error ? "error" : "warning"},
                     {"message", d.message},
                     {"line", d.line},
                     {"col", d.col}});
    return a;
}

json mesh_json(const MeshTopology& topo, std::span<const double> V) {
    json j;
    j["v"] = kSchemaVersion;
    j["vertices"] = std::vector<double>(V.begin(), V.end());
    j["faces"] = topo.faces;
    j["triangles"] = json::array();
    for (const auto& t : topo.tris) j["triangles"].push_back({t[0], t[1], t[2]});
    j["edges"] = json::array();
    for (const auto& e : topo.edges) j["edges"].push_back({e[0], e[1]});
    return j;
}

json params_json(const std::vector<std::string>& names, std::span<const double> P) {
    json j;
    j["v"] = kSchemaVersion;
    j["params"] = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) j["params"].push_back({{"name", names[i]}, {"value", P[i]}});
    return j;
}

json run_json(const ObjectiveRun& r) {
    json j;
    j["objective"] = objective_name(r.objective);
    j["status"] = status_name(r.result.status);
    j["iterations"] = r.result.iterations;
    j["seconds"] = r.seconds;
    j["message"] = r.error.empty() ? r.result.message : r.error;
    if (std::isfinite(r.result.max_violation)) j["max_violation"] = r.result.max_violation;
    j["e_edit"] = r.e_edit;
    j["objective_value"] = r.objective_value;
    if (!r.arap_trace.empty()) j["arap_trace"] = r.arap_trace;
    return j;
}

json gallery_json(const OptionGallery& g, const std::vector<std::string>& param_names) {
    json j;
    j["v"] = kSchemaVersion;
    j["seconds"] = g.seconds;
    j["options"] = json::array();
    for (const auto& o : g.options) {
        json oj;
        oj["objective"] = objective_name(o.objective);
        oj["merged"] = json::array();
        for (auto id : o.merged) oj["merged"].push_back(objective_name(id));
        oj["params"] = json::object();
        for (std::size_t i = 0; i < param_names.size() && i < o.P.size(); ++i) oj["params"][param_names[i]] = o.P[i];
        oj["P"] = o.P;
        oj["e_edit"] = o.e_edit;
        oj["objective_value"] = o.objective_value;
        oj["status"] = status_name(o.status);
        j["options"].push_back(std::move(oj));
    }
    j["runs"] = json::array();
    for (const auto& r : g.runs) j["runs"].push_back(run_json(r));
    j["warnings"] = g.warnings;
    return j;
}

void apply_gamma_override(ObjectiveConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error("expected name=value, got '" + assignment + "'");
    const auto id = parse_objective(assignment.substr(0, eq));
    if (!id) throw Error("unknown objective '" + assignment.substr(0, eq) + "'");
    double value = 0.0;
    try {
        std::size_t used = 0;
        value = std::stod(assignment.substr(eq + 1), &used);
        if (used != assignment.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw Error("bad gamma value in '" + assignment + "'");
    }
    if (!(value > 0)) throw Error("gamma must be positive in '" + assignment + "'");
    config.gamma[*id] = value;
}

std::vector<ObjectiveId> parse_objective_list(const std::string& list) {
    std::vector<ObjectiveId> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto id = parse_objective(item);
        if (!id) throw Error("unknown objective '" + item + "'");
        if (std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
    }
    if (out.empty()) throw Error("no objectives selected");
    return out;
}

std::string obj_text(const MeshTopology& topo, std::span<const double> V, bool triangulated) {
    std::ostringstream os;
    write_obj(os, topo, V, triangulated);
    return os.str();
}

} // namespace dcad

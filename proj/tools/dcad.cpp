// dcad command line: eval, sync, gradcheck, bench, serve.

#include "dcad/bench.hpp"
#include "dcad/error.hpp"
#include "dcad/gradcheck.hpp"
#include "dcad/io.hpp"
#include "dcad/model.hpp"
#include "dcad/server.hpp"
#include "dcad/sync.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace dcad;

namespace {

struct Common {
    std::string model;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::string objectives;
    std::vector<std::string> gamma;
    std::vector<std::string> params;
    double tol = 1e-6;
};

void print_diagnostics(const std::string& path, const std::vector<dsl::Diagnostic>& ds) {
    for (const auto& d : ds)
        std::cerr << path << ":" << d.line << ":" << d.col << ": "
                  << (d.severity == dsl::Diagnostic::Severity::Error ? "error" : "warning") << ": " << d.message
                  << "\n";
}

CompiledModel load(const std::string& path) {
    CompiledModel m = compile_model(read_file(path));
    print_diagnostics(path, m.diagnostics);
    return m;
}

/// Initial parameters with name=value overrides applied.
std::vector<double> params_with_overrides(const CompiledModel& m, const std::vector<std::string>& overrides) {
    auto P = m.initial_params();
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw Error("expected name=value, got '" + o + "'");
        const int k = m.param_index(o.substr(0, eq));
        if (k < 0) throw Error("unknown parameter '" + o.substr(0, eq) + "'");
        try {
            P[static_cast<std::size_t>(k)] = std::stod(o.substr(eq + 1));
        } catch (const std::exception&) {
            throw Error("bad value in '" + o + "'");
        }
    }
    return P;
}

void apply_objective_flags(ObjectiveConfig& config, const Common& c) {
    if (!c.objectives.empty()) config.enabled = parse_objective_list(c.objectives);
    for (const auto& g : c.gamma) apply_gamma_override(config, g);
}

int cmd_eval(const Common& c) {
    const auto m = load(c.model);
    const auto P = params_with_overrides(m, c.params);
    const auto V = m.positions(P);
    for (const auto& msg : [&] {
             std::vector<std::string> bad;
             const auto g = m.constraint_values(P);
             for (std::size_t i = 0; i < g.size(); ++i)
                 if (g[i] < 0) bad.push_back(m.interp.constraints[i].description);
             return bad;
         }())
        std::cerr << "warning: constraint violated: " << msg << "\n";
    fs::create_directories(c.out);
    write_file((fs::path(c.out) / "mesh.obj").string(), obj_text(m.topology(), V));
    write_file((fs::path(c.out) / "params.json").string(), params_json(m.param_names(), P).dump(2) + "\n");
    for (std::size_t i = 0; i < P.size(); ++i) std::printf("%s\t%.17g\n", m.param_names()[i].c_str(), P[i]);
    return 0;
}

int cmd_sync(const Common& c, const std::string& edit_path) {
    auto m = load(c.model);
    const auto P0 = params_with_overrides(m, c.params);
    const json ej = json::parse(read_file(edit_path), nullptr, false);
    if (ej.is_discarded()) throw EditError(edit_path + " is not valid JSON");
    EditRequest req = parse_edit_request(ej);
    apply_objective_flags(req.config, c);
    if (auto warn = req.edit.check(m.topology().num_vertices)) std::cerr << "warning: " << *warn << "\n";

    SyncOptions opt;
    opt.tol = c.tol;
    const OptionGallery g = synchronize(m.tape, m.topology(), P0, req.edit, req.config, opt);

    fs::create_directories(c.out);
    json manifest = gallery_json(g, m.param_names());
    for (std::size_t k = 0; k < g.options.size(); ++k) {
        const auto& o = g.options[k];
        const std::string stem = "option_" + std::to_string(k);
        write_file((fs::path(c.out) / (stem + ".obj")).string(), obj_text(m.topology(), o.V));
        std::vector<std::pair<std::string, double>> values;
        for (std::size_t i = 0; i < o.P.size(); ++i) values.emplace_back(m.param_names()[i], o.P[i]);
        write_file((fs::path(c.out) / (stem + ".dcad")).string(), dsl::rewrite_params(m.text, m.program, values));
        manifest["options"][k]["obj"] = stem + ".obj";
        manifest["options"][k]["program"] = stem + ".dcad";
    }
    write_file((fs::path(c.out) / "gallery.json").string(), manifest.dump(2) + "\n");

    for (const auto& w : g.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& r : g.runs)
        std::printf("%-5s %-15s iters=%-4d E_edit=%.3e obj=%.3e %.3fs%s%s\n", objective_name(r.objective),
                    status_name(r.result.status), r.result.iterations, r.e_edit, r.objective_value, r.seconds,
                    r.error.empty() ? "" : " ", r.error.c_str());
    std::printf("%zu option(s) in %.3fs\n", g.options.size(), g.seconds);
    if (g.options.empty()) {
        std::cerr << "error: no objective produced a feasible option\n";
        return 2;
    }
    return 0;
}

int cmd_gradcheck(const Common& c, int points) {
    const auto m = load(c.model);
    GradcheckOptions opt;
    opt.seed = c.seed;
    opt.points = points;
    if (!c.objectives.empty()) opt.objectives = parse_objective_list(c.objectives);
    const auto P0 = m.initial_params();
    const EditSpec edit = probe_edit(m.topology(), m.positions(P0));
    const auto report = gradcheck(m, edit, opt);
    for (const auto& e : report.entries)
        std::printf("%-4s point=%d rel_err=%.3e %s\n", e.pass ? "ok" : "FAIL", e.point, e.rel_err, e.name.c_str());
    std::printf("worst=%.3e %s\n", report.worst, report.pass ? "pass" : "fail");
    return report.pass ? 0 : 2;
}

int cmd_bench(const Common& c, int edits, std::size_t vertices, bool as_json) {
    const auto m = load(c.model);
    ObjectiveConfig config;
    apply_objective_flags(config, c);
    SyncOptions opt;
    opt.tol = c.tol;
    const auto r = run_bench(fs::path(c.model).stem().string(), m, edits, vertices, c.seed, config, opt);
    std::string out;
    if (as_json) {
        json j{{"v", kSchemaVersion},
               {"model", r.model},
               {"vertices", r.vertices},
               {"params", r.params},
               {"constraints", r.constraints},
               {"graph_nodes", r.graph_nodes},
               {"tape_instructions", r.instructions},
               {"arithmetic_ops", r.arithmetic},
               {"interpret_s", r.interpret_seconds},
               {"lower_s", r.lower_seconds},
               {"sync_s", r.sync_seconds}};
        j["rows"] = json::array();
        for (const auto& row : r.rows)
            j["rows"].push_back({{"edit", row.edit},
                                 {"objective", row.objective},
                                 {"seconds", row.seconds},
                                 {"iterations", row.iterations},
                                 {"status", row.status}});
        out = j.dump(2) + "\n";
    } else {
        out = bench_table(r);
    }
    if (c.out == "." || c.out == "-")
        std::fputs(out.c_str(), stdout);
    else
        write_file(c.out, out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidirectional editing of differentiable CAD programs"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* sub, bool needs_model) {
        if (needs_model) sub->add_option("model", c.model, "Program file (.dcad)")->required();
        sub->add_option("--seed", c.seed, "Random seed");
        sub->add_option("--objectives", c.objectives, "Comma-separated objectives, e.g. edit,bh,vol");
        sub->add_option("--gamma", c.gamma, "Objective weight override, e.g. bh=0.01");
        sub->add_option("--tol", c.tol, "Optimizer KKT tolerance");
    };

    auto* eval = app.add_subcommand("eval", "Evaluate a program to OBJ and a parameter listing");
    add_common(eval, true);
    eval->add_option("--out", c.out, "Output directory");
    eval->add_option("--param", c.params, "Parameter override name=value");

    std::string edit_path;
    auto* sync = app.add_subcommand("sync", "Resolve a geometric edit into parameter options");
    add_common(sync, true);
    sync->add_option("edit", edit_path, "Edit JSON")->required();
    sync->add_option("--out", c.out, "Output directory");
    sync->add_option("--param", c.params, "Start from these parameter values");

    int points = 5;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
    add_common(grad, true);
    grad->add_option("--points", points, "Random feasible points");

    int edits = 10;
    std::size_t vertices = 10;
    bool as_json = false;
    auto* bench = app.add_subcommand("bench", "Time interpretation, lowering and sync on random edits");
    add_common(bench, true);
    bench->add_option("--edits", edits, "Number of random edits");
    bench->add_option("--vertices", vertices, "Vertices per edit");
    bench->add_option("--out", c.out, "Output file (default stdout)");
    bench->add_flag("--json", as_json, "JSON instead of a tab-separated table");

    int port = 8080;
    std::string host = "127.0.0.1";
    double async_after = 1.0;
    auto* serve_cmd = app.add_subcommand("serve", "Run the JSON HTTP service");
    add_common(serve_cmd, false);
    serve_cmd->add_option("--port", port, "Port");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--async-after", async_after, "Seconds before an edit answers 202");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*eval) return cmd_eval(c);
        if (*sync) return cmd_sync(c, edit_path);
        if (*grad) return cmd_gradcheck(c, points);
        if (*bench) return cmd_bench(c, edits, vertices, as_json);
        if (*serve_cmd) {
            ServiceOptions opt;
            opt.async_after_seconds = async_after;
            opt.sync.tol = c.tol;
            Service service(opt);
            std::cerr << "listening on " << host << ":" << port << "\n";
            serve(service, host, port);
            return 0;
        }
    } catch (const ValidationError& e) {
        print_diagnostics(c.model, e.diagnostics());
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateVolume& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

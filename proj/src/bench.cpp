#include "dcad/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace dcad {

EditSpec random_edit(const MeshTopology& topo, std::span<const double> V, std::size_t count,
                     std::mt19937_64& rng) {
    const std::size_t n = topo.num_vertices;
    count = std::min(count, n);
    Vec3 mn = vertex(V, 0), mx = vertex(V, 0);
    for (std::size_t i = 0; i < n; ++i) {
        mn = mn.cwiseMin(vertex(V, i));
        mx = mx.cwiseMax(vertex(V, i));
    }
    const double step = 0.05 * (mx - mn).norm();
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    EditSpec e;
    for (std::size_t i = 0; i < count; ++i) {
        Vec3 dir;
        do {
            dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
        } while (dir.norm() < 1e-12);
        e.moved.push_back({ids[i], vertex(V, ids[i]) + step * dir.normalized()});
    }
    return e;
}

BenchReport run_bench(const std::string& name, const CompiledModel& model, int edits, std::size_t vertices,
                      std::uint64_t seed, const ObjectiveConfig& config, const SyncOptions& opt) {
    BenchReport r;
    r.model = name;
    r.vertices = model.topology().num_vertices;
    r.params = model.num_params();
    r.constraints = model.tape.num_constraints();
    r.graph_nodes = model.interp.graph.size();
    r.instructions = model.tape.num_registers();
    r.arithmetic = model.tape.arithmetic_count();
    r.interpret_seconds = model.interpret_seconds;
    r.lower_seconds = model.lower_seconds;

    std::mt19937_64 rng(seed);
    const auto P0 = model.initial_params();
    const auto V0 = model.positions(P0);
    for (int k = 0; k < edits; ++k) {
        const EditSpec edit = random_edit(model.topology(), V0, vertices, rng);
        const OptionGallery g = synchronize(model.tape, model.topology(), P0, edit, config, opt);
        r.sync_seconds.push_back(g.seconds);
        for (const auto& run : g.runs)
            r.rows.push_back({k, objective_name(run.objective), run.seconds, run.result.iterations,
                              status_name(run.result.status)});
    }
    return r;
}

std::string bench_table(const BenchReport& r) {
    std::string out;
    char buf[256];
    auto kv = [&](const char* key, const std::string& value) { out += std::string(key) + "\t" + value + "\n"; };
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    kv("model", r.model);
    kv("vertices", std::to_string(r.vertices));
    kv("params", std::to_string(r.params));
    kv("constraints", std::to_string(r.constraints));
    kv("graph_nodes", std::to_string(r.graph_nodes));
    kv("tape_instructions", std::to_string(r.instructions));
    kv("arithmetic_ops", std::to_string(r.arithmetic));
    kv("interpret_s", num(r.interpret_seconds));
    kv("lower_s", num(r.lower_seconds));
    double total = 0.0;
    for (double s : r.sync_seconds) total += s;
    kv("edits", std::to_string(r.sync_seconds.size()));
    kv("sync_mean_s", num(r.sync_seconds.empty() ? 0.0 : total / static_cast<double>(r.sync_seconds.size())));
    out += "\nedit\tobjective\tseconds\titerations\tstatus\n";
    for (const auto& row : r.rows)
        out += std::to_string(row.edit) + "\t" + row.objective + "\t" + num(row.seconds) + "\t" +
               std::to_string(row.iterations) + "\t" + row.status + "\n";
    return out;
}

} // namespace dcad

#pragma once

// Timing runs over random edits: interpret, lower, and per-objective sync.

#include "dcad/model.hpp"
#include "dcad/sync.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dcad {

/// Picks `count` distinct vertices uniformly and moves each along a random
/// direction by 5% of the bounding-box diagonal.
EditSpec random_edit(const MeshTopology& topo, std::span<const double> V, std::size_t count,
                     std::mt19937_64& rng);

struct BenchRow {
    int edit = 0;
    std::string objective;
    double seconds = 0.0;
    int iterations = 0;
    std::string status;
};

struct BenchReport {
    std::string model;
    std::size_t vertices = 0;
    std::size_t params = 0;
    std::size_t constraints = 0;
    std::size_t graph_nodes = 0;
    std::size_t instructions = 0;
    std::size_t arithmetic = 0;
    double interpret_seconds = 0.0;
    double lower_seconds = 0.0;
    std::vector<BenchRow> rows;
    /// Wall time of each full sync.
    std::vector<double> sync_seconds;
};

BenchReport run_bench(const std::string& name, const CompiledModel& model, int edits, std::size_t vertices,
                      std::uint64_t seed, const ObjectiveConfig& config, const SyncOptions& opt = {});

/// Tab-separated: a header block of "key\tvalue" lines, a blank line, then
/// one row per (edit, objective).
std::string bench_table(const BenchReport& r);

} // namespace dcad

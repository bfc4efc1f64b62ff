#pragma once

// Finite-difference verification of every energy gradient and every
// constraint gradient of a model.

#include "dcad/model.hpp"
#include "dcad/objectives.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dcad {

/// Value, and gradient when grad is non-null.
using GradFn = std::function<double(std::span<const double> P, Eigen::VectorXd* grad)>;

/// ||g - g_fd||_inf / max(||g||_inf, ||g_fd||_inf, 1e-8) with central
/// differences of step h.
double gradient_error(const GradFn& f, std::span<const double> P, double h);

struct GradcheckOptions {
    int points = 5;
    std::uint64_t seed = 0;
    double h = 1e-5;
    double tol = 1e-4;
    /// Relative size of the random parameter perturbation.
    double perturbation = 0.05;
    std::vector<ObjectiveId> objectives{kAllObjectives.begin(), kAllObjectives.end()};
    bool constraints = true;
    /// Test hook: may modify an analytic gradient before comparison.
    std::function<void(const std::string& name, Eigen::VectorXd& grad)> tamper;
};

struct GradcheckEntry {
    std::string name;
    int point = 0;
    double rel_err = 0.0;
    bool pass = true;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double worst = 0.0;
    bool pass = true;
    double seconds = 0.0;
};

/// Perturbs P0 until every constraint is at least `margin` inside the
/// feasible region; falls back to P0.
std::vector<double> random_feasible_point(const CompiledModel& model, std::span<const double> P0,
                                          std::mt19937_64& rng, double scale, double margin = 1e-3);

/// Moves the vertex with the largest x coordinate outward by 5% of the
/// bounding-box diagonal and pins the one with the smallest.
EditSpec probe_edit(const MeshTopology& topo, std::span<const double> V);

GradcheckReport gradcheck(const CompiledModel& model, const EditSpec& edit, const GradcheckOptions& opt);

} // namespace dcad

#include "dcad/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace dcad {

double gradient_error(const GradFn& f, std::span<const double> P, double h) {
    const auto m = static_cast<Eigen::Index>(P.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    f(P, &g);
    Eigen::VectorXd fd(m);
    std::vector<double> x(P.begin(), P.end());
    for (Eigen::Index i = 0; i < m; ++i) {
        const double x0 = x[static_cast<std::size_t>(i)];
        x[static_cast<std::size_t>(i)] = x0 + h;
        const double fp = f(x, nullptr);
        x[static_cast<std::size_t>(i)] = x0 - h;
        const double fm = f(x, nullptr);
        x[static_cast<std::size_t>(i)] = x0;
        fd[i] = (fp - fm) / (2.0 * h);
    }
    if (m == 0) return 0.0;
    const double scale = std::max({g.lpNorm<Eigen::Infinity>(), fd.lpNorm<Eigen::Infinity>(), 1e-8});
    return (g - fd).lpNorm<Eigen::Infinity>() / scale;
}

std::vector<double> random_feasible_point(const CompiledModel& model, std::span<const double> P0,
                                          std::mt19937_64& rng, double scale, double margin) {
    // Offsets are kept away from zero: e_par's smoothed |x| bends on the
    // scale of delta, far below the finite-difference step.
    std::uniform_real_distribution<double> u(0.25, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> P(P0.begin(), P0.end());
    for (int attempt = 0; attempt < 60; ++attempt) {
        const double s = scale * std::pow(0.8, attempt / 3);
        for (std::size_t i = 0; i < P.size(); ++i)
            P[i] = P0[i] + (sign(rng) ? s : -s) * u(rng) * std::max(std::abs(P0[i]), 0.1);
        try {
            const auto g = model.constraint_values(P);
            if (std::all_of(g.begin(), g.end(), [&](double v) { return v >= margin; })) return P;
        } catch (const std::exception&) {
        }
    }
    return {P0.begin(), P0.end()};
}

EditSpec probe_edit(const MeshTopology& topo, std::span<const double> V) {
    const std::size_t n = topo.num_vertices;
    std::size_t hi = 0, lo = 0;
    Vec3 mn = vertex(V, 0), mx = vertex(V, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (V[3 * i] > V[3 * hi]) hi = i;
        if (V[3 * i] < V[3 * lo]) lo = i;
        mn = mn.cwiseMin(vertex(V, i));
        mx = mx.cwiseMax(vertex(V, i));
    }
    EditSpec e;
    e.moved.push_back({hi, vertex(V, hi) + Vec3(0.05 * (mx - mn).norm(), 0, 0)});
    if (lo != hi) e.fixed.push_back(lo);
    return e;
}

GradcheckReport gradcheck(const CompiledModel& model, const EditSpec& edit, const GradcheckOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckReport report;
    const auto P0 = model.initial_params();
    ObjectiveConfig cfg;
    cfg.enabled = opt.objectives;
    const ObjectiveContext ctx = ObjectiveContext::build(model.tape, model.topology(), P0, edit, cfg);
    std::mt19937_64 rng(opt.seed);
    TapeWorkspace ws;

    auto check = [&](const std::string& name, int point, const GradFn& f, std::span<const double> P) {
        GradFn fn = f;
        if (opt.tamper) {
            fn = [&, f](std::span<const double> x, Eigen::VectorXd* grad) {
                const double v = f(x, grad);
                if (grad) opt.tamper(name, *grad);
                return v;
            };
        }
        GradcheckEntry e;
        e.name = name;
        e.point = point;
        e.rel_err = gradient_error(fn, P, opt.h);
        e.pass = e.rel_err <= opt.tol;
        report.worst = std::max(report.worst, e.rel_err);
        report.pass = report.pass && e.pass;
        report.entries.push_back(e);
    };

    for (int k = 0; k < opt.points; ++k) {
        const auto P = random_feasible_point(model, P0, rng, opt.perturbation);
        for (auto id : opt.objectives) {
            if (id == ObjectiveId::Cm && !ctx.com0) continue;
            GradFn f;
            if (id == ObjectiveId::Arap) {
                // Rotations held at their fit for P.
                const auto V = model.positions(P);
                auto R = std::make_shared<Rotations>(arap_local_step(V, ctx.V0, ctx.deform));
                f = [&ctx, &ws, R](std::span<const double> x, Eigen::VectorXd* grad) {
                    Energy e = e_arap_fixed(ctx, x, *R, ws);
                    if (grad) *grad = e.grad;
                    return e.value;
                };
            } else {
                f = [&ctx, &ws, id](std::span<const double> x, Eigen::VectorXd* grad) {
                    Energy e = evaluate_objective(ctx, id, x, ws);
                    if (grad) *grad = e.grad;
                    return e.value;
                };
            }
            check(objective_name(id), k, f, P);
        }
        if (!opt.constraints) continue;
        for (std::size_t c = 0; c < model.tape.num_constraints(); ++c) {
            const auto& rec = model.interp.constraints[c];
            GradFn f = [&model, &ws, c](std::span<const double> x, Eigen::VectorXd* grad) {
                eval_tape(model.tape, x, ws);
                const double v = ws.value[model.tape.constraint_outputs[c]];
                if (grad) {
                    std::vector<double> w(model.tape.num_constraints(), 0.0);
                    w[c] = 1.0;
                    *grad = vjp_after_eval(model.tape, {}, w, ws);
                }
                return v;
            };
            check("g" + std::to_string(c) + " " + rec.op + " (line " + std::to_string(rec.span.line) + ")", k, f, P);
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace dcad

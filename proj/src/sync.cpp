#include "dcad/sync.hpp"
#include "dcad/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <memory>

namespace dcad {

double relative_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("parameter vectors differ in length");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]) / std::max({1.0, std::abs(a[i]), std::abs(b[i])}));
    return d;
}

ConstraintFn tape_constraints(const Tape& tape) {
    auto ws = std::make_shared<TapeWorkspace>();
    return [&tape, ws](std::span<const double> P, Eigen::VectorXd& g, Eigen::MatrixXd& J) {
        const auto k = static_cast<Eigen::Index>(tape.num_constraints());
        const auto m = static_cast<Eigen::Index>(tape.num_params);
        eval_tape(tape, P, *ws);
        g.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) g[i] = ws->value[tape.constraint_outputs[static_cast<std::size_t>(i)]];
        J.resize(k, m);
        if (k == 0) return;
        if (k <= m) {
            std::vector<double> w(static_cast<std::size_t>(k), 0.0);
            for (Eigen::Index i = 0; i < k; ++i) {
                w[static_cast<std::size_t>(i)] = 1.0;
                J.row(i) = vjp_after_eval(tape, {}, w, *ws).transpose();
                w[static_cast<std::size_t>(i)] = 0.0;
            }
        } else {
            std::vector<double> dp(static_cast<std::size_t>(m), 0.0);
            for (Eigen::Index c = 0; c < m; ++c) {
                dp[static_cast<std::size_t>(c)] = 1.0;
                jvp_after_eval(tape, dp, *ws);
                dp[static_cast<std::size_t>(c)] = 0.0;
                for (Eigen::Index i = 0; i < k; ++i)
                    J(i, c) = ws->tangent[tape.constraint_outputs[static_cast<std::size_t>(i)]];
            }
        }
    };
}

bool ObjectiveRun::usable(const SyncOptions& opt) const {
    if (!error.empty()) return false;
    if (result.status == OptStatus::Infeasible || result.status == OptStatus::NumericFailure) return false;
    return std::isfinite(result.max_violation) && result.max_violation <= opt.safety_tol;
}

namespace {

using Clock = std::chrono::steady_clock;

NLPProblem base_problem(const ObjectiveContext& ctx, const SyncOptions& opt) {
    NLPProblem p;
    p.constraints = tape_constraints(*ctx.tape);
    p.tol = opt.tol;
    p.feas_tol = opt.feas_tol;
    p.max_iter = opt.max_iter;
    return p;
}

bool failed(OptStatus s) { return s == OptStatus::Infeasible || s == OptStatus::NumericFailure; }

} // namespace

ObjectiveRun solve_objective(const ObjectiveContext& ctx, ObjectiveId id, const SyncOptions& opt) {
    ObjectiveRun run;
    run.objective = id;
    const auto t0 = Clock::now();
    TapeWorkspace ws;
    std::vector<double> P = ctx.P0;
    const bool edit_only = id == ObjectiveId::Edit;
    const int stages = edit_only ? 1 : std::max(1, ctx.config.continuation_stages);
    const double gamma0 = edit_only ? 0.0 : ctx.config.gamma_of(id);
    int iterations = 0;

    try {
        NLPProblem problem = base_problem(ctx, opt);
        for (int s = 0; s < stages; ++s) {
            const double gamma = gamma0 * std::pow(ctx.config.continuation_factor, s);
            if (id == ObjectiveId::Arap) {
                auto energy = [&](std::span<const double> x) {
                    return e_edit(ctx, x, ws).value + gamma * e_arap(ctx, x, ws).value;
                };
                std::vector<double> trace{energy(P)};
                for (int a = 0; a < ctx.config.arap_max_alternations; ++a) {
                    eval_tape(*ctx.tape, P, ws);
                    const auto V = read_outputs(*ctx.tape, ws).vertices;
                    const Rotations R = arap_local_step(V, ctx.V0, ctx.deform);
                    problem.P0 = P;
                    problem.objective = [&](std::span<const double> x, Eigen::VectorXd& grad) {
                        const Energy e = compose(e_edit(ctx, x, ws), e_arap_fixed(ctx, x, R, ws), gamma);
                        grad = e.grad;
                        return e.value;
                    };
                    run.result = minimize(problem);
                    iterations += run.result.iterations;
                    if (failed(run.result.status)) break;
                    const double e_new = energy(run.result.P);
                    if (!(e_new <= trace.back())) break; // keep the previous parameters
                    P = run.result.P;
                    const double change = trace.back() - e_new;
                    trace.push_back(e_new);
                    if (change < ctx.config.arap_tol) break;
                }
                run.arap_trace.push_back(std::move(trace));
                if (failed(run.result.status)) break;
                run.result.P = P;
            } else {
                problem.P0 = P;
                problem.objective = [&](std::span<const double> x, Eigen::VectorXd& grad) {
                    const Energy e = edit_only ? e_edit(ctx, x, ws)
                                               : compose(e_edit(ctx, x, ws), evaluate_objective(ctx, id, x, ws), gamma);
                    grad = e.grad;
                    return e.value;
                };
                run.result = minimize(problem);
                iterations += run.result.iterations;
                if (failed(run.result.status)) break;
                P = run.result.P;
            }
        }
        run.result.iterations = iterations;
        if (!failed(run.result.status)) {
            run.result.P = P;
            Eigen::VectorXd g;
            Eigen::MatrixXd J;
            problem.constraints(P, g, J);
            double v = 0.0;
            for (Eigen::Index i = 0; i < g.size(); ++i) v = std::max(v, -g[i]);
            run.result.max_violation = v;
            run.e_edit = e_edit(ctx, P, ws).value;
            run.objective_value = edit_only ? run.e_edit : evaluate_objective(ctx, id, P, ws).value;
            run.result.objective = run.e_edit + gamma0 * std::pow(ctx.config.continuation_factor, stages - 1) *
                                                    (edit_only ? 0.0 : run.objective_value);
        }
    } catch (const std::exception& e) {
        run.error = e.what();
        run.result.status = OptStatus::NumericFailure;
        run.result.message = e.what();
    }
    run.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    run.result.wall_time = run.seconds;
    return run;
}

OptionGallery synchronize(const Tape& tape, const MeshTopology& topo, std::span<const double> P0,
                          const EditSpec& edit, const ObjectiveConfig& config, const SyncOptions& opt) {
    const auto t0 = Clock::now();
    OptionGallery gallery;
    if (auto w = edit.check(topo.num_vertices)) gallery.warnings.push_back(*w);
    const ObjectiveContext ctx = ObjectiveContext::build(tape, topo, P0, edit, config);

    std::vector<ObjectiveId> ids;
    for (auto id : kAllObjectives)
        if (config.is_enabled(id)) ids.push_back(id);

    if (opt.parallel && ids.size() > 1) {
        std::vector<std::future<ObjectiveRun>> jobs;
        for (auto id : ids)
            jobs.push_back(std::async(std::launch::async, [&ctx, id, &opt] { return solve_objective(ctx, id, opt); }));
        for (auto& j : jobs) gallery.runs.push_back(j.get());
    } else {
        for (auto id : ids) gallery.runs.push_back(solve_objective(ctx, id, opt));
    }

    // Greedy clustering in objective order; a run joins a cluster only if it
    // is close to every member.
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t r = 0; r < gallery.runs.size(); ++r) {
        const auto& run = gallery.runs[r];
        if (!run.usable(opt)) {
            gallery.warnings.push_back(std::string(objective_name(run.objective)) + ": " +
                                       status_name(run.result.status) +
                                       (run.error.empty() ? (run.result.message.empty() ? "" : " (" + run.result.message + ")")
                                                          : " (" + run.error + ")"));
            continue;
        }
        bool placed = false;
        for (auto& c : clusters) {
            bool close = true;
            for (auto member : c)
                if (relative_distance(gallery.runs[member].result.P, run.result.P) >= opt.dedup_threshold) close = false;
            if (close) {
                c.push_back(r);
                placed = true;
                break;
            }
        }
        if (!placed) clusters.push_back({r});
    }

    for (const auto& c : clusters) {
        const auto& lead = gallery.runs[c.front()];
        GalleryOption o;
        o.objective = lead.objective;
        for (auto member : c) o.merged.push_back(gallery.runs[member].objective);
        o.P = lead.result.P;
        o.V = eval_tape(tape, o.P).vertices;
        o.e_edit = lead.e_edit;
        o.objective_value = lead.objective_value;
        o.status = lead.result.status;
        gallery.options.push_back(std::move(o));
    }
    std::stable_sort(gallery.options.begin(), gallery.options.end(),
                     [](const GalleryOption& a, const GalleryOption& b) { return a.e_edit < b.e_edit; });
    gallery.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return gallery;
}

BaselineResult project_then_fit_baseline(const Tape& tape, const MeshTopology& topo,
                                         std::span<const double> P0, const EditSpec& edit,
                                         const SyncOptions& opt) {
    edit.check(topo.num_vertices);
    const std::size_t n = topo.num_vertices;
    const auto V0 = eval_tape(tape, P0).vertices;
    const DeformationData deform = build_deformation_data(topo, V0);
    const Eigen::MatrixXd Q = Eigen::MatrixXd(deform.Q);

    std::vector<long> slot(n, -1);
    Eigen::MatrixXd Dc(static_cast<Eigen::Index>(edit.moved.size() + edit.fixed.size()), 3);
    std::vector<std::size_t> constrained;
    for (const auto& m : edit.moved) {
        Dc.row(static_cast<Eigen::Index>(constrained.size())) = (m.target - vertex(V0, m.vid)).transpose();
        constrained.push_back(m.vid);
    }
    for (auto v : edit.fixed) {
        Dc.row(static_cast<Eigen::Index>(constrained.size())).setZero();
        constrained.push_back(v);
    }
    std::vector<bool> is_c(n, false);
    for (auto v : constrained) is_c[v] = true;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < n; ++i)
        if (!is_c[i]) free.push_back(i);

    const auto nf = static_cast<Eigen::Index>(free.size());
    const auto nc = static_cast<Eigen::Index>(constrained.size());
    Eigen::MatrixXd Qff(nf, nf), Qfc(nf, nc);
    for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index b = 0; b < nf; ++b)
            Qff(a, b) = Q(static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]),
                          static_cast<Eigen::Index>(free[static_cast<std::size_t>(b)]));
        for (Eigen::Index b = 0; b < nc; ++b)
            Qfc(a, b) = Q(static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]),
                          static_cast<Eigen::Index>(constrained[static_cast<std::size_t>(b)]));
    }
    Eigen::MatrixXd Df = Eigen::MatrixXd::Zero(nf, 3);
    if (nf > 0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Qff);
        Df = cod.solve(-Qfc * Dc);
        if (!Df.allFinite()) throw NumericError("biharmonic solve failed", -1);
    }

    BaselineResult out;
    out.free_positions = V0;
    for (Eigen::Index a = 0; a < nf; ++a)
        for (int c = 0; c < 3; ++c)
            out.free_positions[3 * free[static_cast<std::size_t>(a)] + static_cast<std::size_t>(c)] += Df(a, c);
    for (Eigen::Index a = 0; a < nc; ++a)
        for (int c = 0; c < 3; ++c)
            out.free_positions[3 * constrained[static_cast<std::size_t>(a)] + static_cast<std::size_t>(c)] += Dc(a, c);

    EditSpec all;
    for (std::size_t i = 0; i < n; ++i) all.moved.push_back({i, vertex(out.free_positions, i)});
    ObjectiveConfig cfg;
    cfg.enabled = {ObjectiveId::Edit};
    const ObjectiveContext ctx = ObjectiveContext::build(tape, topo, P0, all, cfg);
    ObjectiveRun run = solve_objective(ctx, ObjectiveId::Edit, opt);
    out.fit = run.result;
    out.P = run.result.P;
    return out;
}

AppliedOption apply_option(const OptionGallery& gallery, std::size_t index) {
    if (index >= gallery.options.size())
        throw Error("option " + std::to_string(index) + " out of range (gallery has " +
                    std::to_string(gallery.options.size()) + " options)");
    return {gallery.options[index].P, gallery.options[index].V};
}

} // namespace dcad

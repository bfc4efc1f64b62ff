#include "dcad/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dcad {

const char* status_name(OptStatus s) {
    switch (s) {
    case OptStatus::Converged: return "converged";
    case OptStatus::MaxIter: return "max_iter";
    case OptStatus::Infeasible: return "infeasible";
    case OptStatus::NumericFailure: return "numeric_failure";
    case OptStatus::Stalled: return "stalled";
    }
    return "?";
}

ConstraintFn constraints_from_list(std::vector<ScalarConstraintFn> list) {
    return [list = std::move(list)](std::span<const double> P, Eigen::VectorXd& g, Eigen::MatrixXd& J) {
        const auto m = static_cast<Eigen::Index>(P.size());
        g.resize(static_cast<Eigen::Index>(list.size()));
        J.resize(static_cast<Eigen::Index>(list.size()), m);
        Eigen::VectorXd grad(m);
        for (std::size_t i = 0; i < list.size(); ++i) {
            grad.setZero();
            g[static_cast<Eigen::Index>(i)] = list[i](P, grad);
            J.row(static_cast<Eigen::Index>(i)) = grad.transpose();
        }
    };
}

bool nnls(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, Eigen::VectorXd& u) {
    const Eigen::Index n = E.cols();
    u = Eigen::VectorXd::Zero(n);
    if (n == 0) return true;
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-12 * std::max(1.0, E.cwiseAbs().maxCoeff()) * std::max(1.0, f.norm());
    const int max_outer = static_cast<int>(3 * n + 10);

    Eigen::VectorXd w = E.transpose() * (f - E * u);
    for (int outer = 0; outer < max_outer; ++outer) {
        Eigen::Index t = -1;
        double best = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best) best = w[j], t = j;
        if (t < 0) return true;
        passive[static_cast<std::size_t>(t)] = true;

        for (int inner = 0; inner < 3 * n + 10; ++inner) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
            Eigen::MatrixXd Ep(E.rows(), static_cast<Eigen::Index>(idx.size()));
            for (std::size_t c = 0; c < idx.size(); ++c) Ep.col(static_cast<Eigen::Index>(c)) = E.col(idx[c]);
            const Eigen::VectorXd zp = Ep.colPivHouseholderQr().solve(f);
            Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
            for (std::size_t c = 0; c < idx.size(); ++c) z[idx[c]] = zp[static_cast<Eigen::Index>(c)];

            bool positive = true;
            for (auto j : idx)
                if (z[j] <= 0) positive = false;
            if (positive) {
                u = z;
                break;
            }
            double alpha = 1.0;
            for (auto j : idx)
                if (z[j] <= 0) alpha = std::min(alpha, u[j] / (u[j] - z[j]));
            u += alpha * (z - u);
            for (auto j : idx) {
                if (u[j] <= 1e-15) {
                    u[j] = 0.0;
                    passive[static_cast<std::size_t>(j)] = false;
                }
            }
        }
        w = E.transpose() * (f - E * u);
    }
    return false;
}

namespace {

// min 1/2 |z|^2  s.t.  G z >= h. Returns multipliers in lambda.
bool ldp(const Eigen::MatrixXd& G, const Eigen::VectorXd& h, Eigen::VectorXd& z, Eigen::VectorXd& lambda) {
    const Eigen::Index n = G.cols();
    const Eigen::Index k = G.rows();
    if (k == 0 || h.maxCoeff() <= 0.0) {
        z = Eigen::VectorXd::Zero(n);
        lambda = Eigen::VectorXd::Zero(k);
        if (k == 0) return true;
        // z = 0 is feasible and optimal.
        return true;
    }
    Eigen::MatrixXd E(n + 1, k);
    E.topRows(n) = G.transpose();
    E.row(n) = h.transpose();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n + 1);
    f[n] = 1.0;
    Eigen::VectorXd u;
    if (!nnls(E, f, u)) return false;
    const double denom = 1.0 - h.dot(u);
    if (denom <= 1e-12) return false; // incompatible constraints
    z = G.transpose() * u / denom;
    lambda = u / denom;
    return true;
}

} // namespace

QPResult solve_qp(const Eigen::MatrixXd& B, const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& b) {
    QPResult r;
    const Eigen::Index n = B.rows();
    const Eigen::Index k = A.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) return r;
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::VectorXd Linv_c = L.triangularView<Eigen::Lower>().solve(c);
    auto back = [&](const Eigen::VectorXd& z) {
        return Eigen::VectorXd(L.transpose().triangularView<Eigen::Upper>().solve(z - Linv_c));
    };
    if (k == 0) {
        r.d = back(Eigen::VectorXd::Zero(n));
        r.lambda.resize(0);
        r.ok = r.d.allFinite();
        return r;
    }
    // G = A L^-T
    const Eigen::MatrixXd G = L.triangularView<Eigen::Lower>().solve(A.transpose()).transpose();
    const Eigen::VectorXd h = -b + G * Linv_c;
    Eigen::VectorXd z, lambda;
    if (ldp(G, h, z, lambda)) {
        r.d = back(z);
        r.lambda = lambda;
        r.ok = r.d.allFinite() && r.lambda.allFinite();
        return r;
    }

    // Inconsistent linearization: one shared slack s >= 0 on every
    // constraint, penalized by rho s^2 / 2.
    const double rho = 1e6 * std::max(1.0, B.diagonal().cwiseAbs().maxCoeff());
    Eigen::MatrixXd Ba = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Ba.topLeftCorner(n, n) = B;
    Ba(n, n) = rho;
    Eigen::VectorXd ca = Eigen::VectorXd::Zero(n + 1);
    ca.head(n) = c;
    Eigen::MatrixXd Aa = Eigen::MatrixXd::Zero(k + 1, n + 1);
    Aa.topLeftCorner(k, n) = A;
    Aa.block(0, n, k, 1).setOnes();
    Aa(k, n) = 1.0;
    Eigen::VectorXd ba = Eigen::VectorXd::Zero(k + 1);
    ba.head(k) = b;
    Eigen::LLT<Eigen::MatrixXd> llta(Ba);
    const Eigen::MatrixXd La = llta.matrixL();
    const Eigen::VectorXd La_c = La.triangularView<Eigen::Lower>().solve(ca);
    const Eigen::MatrixXd Ga = La.triangularView<Eigen::Lower>().solve(Aa.transpose()).transpose();
    const Eigen::VectorXd ha = -ba + Ga * La_c;
    if (!ldp(Ga, ha, z, lambda)) return r;
    const Eigen::VectorXd da = La.transpose().triangularView<Eigen::Upper>().solve(z - La_c);
    r.d = da.head(n);
    r.lambda = lambda.head(k);
    r.elastic = true;
    r.ok = r.d.allFinite() && r.lambda.allFinite();
    return r;
}

namespace {

struct NonFinite {};

struct Point {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd grad;
    Eigen::VectorXd g;
    Eigen::MatrixXd J;
};

double violation(const Eigen::VectorXd& g) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) v = std::max(v, -g[i]);
    return v;
}

double violation_l1(const Eigen::VectorXd& g) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) v += std::max(0.0, -g[i]);
    return v;
}

std::span<const double> as_span(const Eigen::VectorXd& x) {
    return {x.data(), static_cast<std::size_t>(x.size())};
}

class Solver {
public:
    explicit Solver(const NLPProblem& p) : p_(p), m_(static_cast<Eigen::Index>(p.P0.size())) {}

    OptResult run() {
        const auto t0 = std::chrono::steady_clock::now();
        OptResult r = solve();
        r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }

private:
    void eval_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::MatrixXd& J) const {
        if (!p_.constraints) {
            g.resize(0);
            J.resize(0, m_);
            return;
        }
        p_.constraints(as_span(x), g, J);
        if (!g.allFinite() || !J.allFinite()) throw NonFinite{};
    }

    double eval_objective(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
        grad = Eigen::VectorXd::Zero(m_);
        const double f = p_.objective(as_span(x), grad);
        if (!std::isfinite(f) || !grad.allFinite()) throw NonFinite{};
        return f;
    }

    // Values only, for line-search trials. Errors from the model count as
    // a failed trial.
    bool trial(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) const {
        try {
            Eigen::VectorXd grad;
            f = eval_objective(x, grad);
            Eigen::MatrixXd J;
            eval_constraints(x, g, J);
            return true;
        } catch (...) {
            return false;
        }
    }

    OptResult fail(OptStatus s, const Eigen::VectorXd& x, std::string msg, int iters) const {
        OptResult r;
        r.P.assign(x.data(), x.data() + x.size());
        r.status = s;
        r.iterations = iters;
        r.message = std::move(msg);
        r.objective = std::numeric_limits<double>::quiet_NaN();
        r.max_violation = std::numeric_limits<double>::quiet_NaN();
        return r;
    }

    static std::string describe(const Eigen::VectorXd& x) {
        std::string s = "[";
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(x[i]);
        }
        return s + "]";
    }

    // Drives max(0, -g) to zero by repeated projection onto the linearized
    // feasible set, with an L1 violation line search.
    bool restore(Point& pt, int& iters) {
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m_, m_);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m_);
        for (int it = 0; it < p_.max_iter; ++it) {
            const double v = violation(pt.g);
            if (v <= p_.feas_tol) return true;
            ++iters;
            QPResult qp = solve_qp(I, zero, pt.J, pt.g);
            Eigen::VectorXd d;
            if (qp.ok) {
                d = qp.d;
            } else {
                // Minimum-norm Gauss-Newton step on the violated rows.
                std::vector<Eigen::Index> rows;
                for (Eigen::Index i = 0; i < pt.g.size(); ++i)
                    if (pt.g[i] < 0) rows.push_back(i);
                Eigen::MatrixXd Jv(static_cast<Eigen::Index>(rows.size()), m_);
                Eigen::VectorXd gv(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    Jv.row(static_cast<Eigen::Index>(i)) = pt.J.row(rows[i]);
                    gv[static_cast<Eigen::Index>(i)] = -pt.g[rows[i]];
                }
                d = Jv.completeOrthogonalDecomposition().solve(gv);
            }
            const double phi = violation_l1(pt.g);
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls) {
                Eigen::VectorXd xt = pt.x + alpha * d;
                double ft;
                Eigen::VectorXd gt;
                if (trial(xt, ft, gt) && violation_l1(gt) < (1.0 - 1e-4 * alpha) * phi) {
                    pt.x = xt;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) return false;
            pt.f = eval_objective(pt.x, pt.grad);
            eval_constraints(pt.x, pt.g, pt.J);
        }
        return violation(pt.g) <= p_.feas_tol;
    }

    OptResult solve() {
        Point pt;
        pt.x = Eigen::Map<const Eigen::VectorXd>(p_.P0.data(), m_);
        if (!pt.x.allFinite()) return fail(OptStatus::NumericFailure, pt.x, "non-finite start point", 0);
        int iters = 0;
        try {
            pt.f = eval_objective(pt.x, pt.grad);
            eval_constraints(pt.x, pt.g, pt.J);
        } catch (...) {
            return fail(OptStatus::NumericFailure, pt.x,
                        "objective or constraints not finite at P = " + describe(pt.x), 0);
        }

        try {
            if (!restore(pt, iters))
                return finish(pt, Eigen::VectorXd::Zero(pt.g.size()), OptStatus::Infeasible, iters,
                              "could not reach a feasible point");
        } catch (...) {
            return fail(OptStatus::NumericFailure, pt.x, "non-finite value during restoration at P = " +
                                                              describe(pt.x), iters);
        }

        Eigen::MatrixXd B = Eigen::MatrixXd::Identity(m_, m_);
        double mu = 0.0;
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(pt.g.size());
        bool fresh_hessian = true;
        int main_iters = 0;

        while (main_iters < p_.max_iter) {
            QPResult qp = solve_qp(B, pt.grad, pt.J, pt.g);
            if (!qp.ok && !fresh_hessian) {
                B.setIdentity();
                fresh_hessian = true;
                continue;
            }
            if (!qp.ok) return finish(pt, lambda, OptStatus::NumericFailure, iters, "QP subproblem failed");
            lambda = qp.lambda;
            const Eigen::VectorXd& d = qp.d;

            const KKTReport kkt = report(pt, lambda);
            if (kkt.stationarity <= p_.tol && kkt.feasibility <= p_.feas_tol &&
                kkt.complementarity <= p_.tol)
                return finish(pt, lambda, OptStatus::Converged, iters, "KKT conditions satisfied");
            if (d.lpNorm<Eigen::Infinity>() < 1e-12)
                return finish(pt, lambda, small_step_status(kkt), iters, "step below 1e-12");

            ++main_iters;
            ++iters;
            if (lambda.size() > 0) mu = std::max(mu, 1.5 * lambda.cwiseAbs().maxCoeff() + 1e-8);
            const double phi0 = pt.f + mu * violation_l1(pt.g);
            const double slope = pt.grad.dot(d) - mu * violation_l1(pt.g);

            double alpha = 1.0;
            bool accepted = false;
            double ft = 0.0, phit = 0.0;
            Eigen::VectorXd gt;
            if (slope < 0) {
                for (int ls = 0; ls < 60; ++ls) {
                    const Eigen::VectorXd xt = pt.x + alpha * d;
                    if (trial(xt, ft, gt)) {
                        phit = ft + mu * violation_l1(gt);
                        if (phit <= phi0 + 1e-4 * alpha * slope) {
                            accepted = true;
                            break;
                        }
                        // Safeguarded quadratic interpolation.
                        const double denom = 2.0 * (phit - phi0 - alpha * slope);
                        double next = denom > 0 ? -slope * alpha * alpha / denom : 0.5 * alpha;
                        alpha = std::clamp(next, 0.1 * alpha, 0.5 * alpha);
                    } else {
                        alpha *= 0.25;
                    }
                    if (alpha * d.lpNorm<Eigen::Infinity>() < 1e-16) break;
                }
            }
            if (!accepted) {
                if (!fresh_hessian) {
                    B.setIdentity();
                    fresh_hessian = true;
                    continue;
                }
                return finish(pt, lambda, OptStatus::Stalled, iters, "line search failed");
            }

            Point next;
            next.x = pt.x + alpha * d;
            try {
                next.f = eval_objective(next.x, next.grad);
                eval_constraints(next.x, next.g, next.J);
            } catch (...) {
                return fail(OptStatus::NumericFailure, next.x,
                            "non-finite objective or gradient at P = " + describe(next.x), iters);
            }

            const Eigen::VectorXd s = next.x - pt.x;
            Eigen::VectorXd y = (next.grad - next.J.transpose() * lambda) - (pt.grad - pt.J.transpose() * lambda);
            const Eigen::VectorXd Bs = B * s;
            const double sBs = s.dot(Bs);
            double sy = s.dot(y);
            if (sBs > 1e-300) {
                if (sy < 0.2 * sBs) {
                    const double theta = 0.8 * sBs / (sBs - sy);
                    y = theta * y + (1.0 - theta) * Bs;
                    sy = s.dot(y);
                }
                if (sy > 1e-300) {
                    B += (y * y.transpose()) / sy - (Bs * Bs.transpose()) / sBs;
                    B = 0.5 * (B + B.transpose());
                    fresh_hessian = false;
                }
            }

            if (p_.trace) {
                IterationRecord rec;
                rec.iteration = main_iters;
                rec.objective = next.f;
                rec.violation = violation(next.g);
                rec.step_norm = s.norm();
                rec.step_length = alpha;
                rec.merit_before = phi0;
                rec.merit_after = next.f + mu * violation_l1(next.g);
                rec.penalty = mu;
                p_.trace(rec);
            }
            pt = std::move(next);
            if (s.lpNorm<Eigen::Infinity>() < 1e-12) {
                QPResult last = solve_qp(B, pt.grad, pt.J, pt.g);
                if (last.ok) lambda = last.lambda;
                return finish(pt, lambda, small_step_status(report(pt, lambda)), iters, "step below 1e-12");
            }
        }
        QPResult last = solve_qp(B, pt.grad, pt.J, pt.g);
        if (last.ok) lambda = last.lambda;
        const KKTReport kkt = report(pt, lambda);
        if (kkt.stationarity <= p_.tol && kkt.feasibility <= p_.feas_tol && kkt.complementarity <= p_.tol)
            return finish(pt, lambda, OptStatus::Converged, iters, "KKT conditions satisfied");
        return finish(pt, lambda, OptStatus::MaxIter, iters, "iteration limit reached");
    }

    OptStatus small_step_status(const KKTReport& kkt) const {
        if (kkt.feasibility > p_.feas_tol) return OptStatus::Infeasible;
        if (kkt.stationarity <= p_.tol && kkt.complementarity <= p_.tol) return OptStatus::Converged;
        return OptStatus::Stalled;
    }

    KKTReport report(const Point& pt, const Eigen::VectorXd& lambda) const {
        KKTReport k;
        Eigen::VectorXd r = pt.grad;
        if (lambda.size() > 0) r -= pt.J.transpose() * lambda;
        k.stationarity = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
        k.feasibility = violation(pt.g);
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            k.complementarity = std::max(k.complementarity, std::abs(lambda[i] * pt.g[i]));
            k.dual_feasibility = std::max(k.dual_feasibility, -lambda[i]);
        }
        return k;
    }

    OptResult finish(const Point& pt, const Eigen::VectorXd& lambda, OptStatus s, int iters,
                     std::string msg) const {
        OptResult r;
        r.P.assign(pt.x.data(), pt.x.data() + pt.x.size());
        r.status = s;
        r.iterations = iters;
        r.objective = pt.f;
        r.max_violation = violation(pt.g);
        r.multipliers = lambda;
        const KKTReport k = report(pt, lambda);
        r.kkt_residual = std::max({k.stationarity, k.feasibility, k.complementarity, k.dual_feasibility});
        r.message = std::move(msg);
        return r;
    }

    const NLPProblem& p_;
    Eigen::Index m_;
};

} // namespace

OptResult minimize(const NLPProblem& problem) { return Solver(problem).run(); }

KKTReport check_kkt(const NLPProblem& problem, std::span<const double> P,
                    std::span<const double> multipliers) {
    const auto m = static_cast<Eigen::Index>(P.size());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(m);
    problem.objective(P, grad);
    Eigen::VectorXd g(0);
    Eigen::MatrixXd J(0, m);
    if (problem.constraints) problem.constraints(P, g, J);
    KKTReport k;
    Eigen::VectorXd r = grad;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double l = i < static_cast<Eigen::Index>(multipliers.size()) ? multipliers[static_cast<std::size_t>(i)] : 0.0;
        r -= l * J.row(i).transpose();
        k.feasibility = std::max(k.feasibility, -g[i]);
        k.complementarity = std::max(k.complementarity, std::abs(l * g[i]));
        k.dual_feasibility = std::max(k.dual_feasibility, -l);
    }
    k.stationarity = m ? r.lpNorm<Eigen::Infinity>() : 0.0;
    return k;
}

} // namespace dcad

#include "ropf/nlp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <random>

namespace ropf {

Vec Nlp::equality_values(const Vec& x) const {
    Vec out(equalities.size());
    for (std::size_t j = 0; j < equalities.size(); ++j) out(j) = equalities[j].value(x);
    return out;
}

Vec Nlp::inequality_values(const Vec& x) const {
    Vec out(inequalities.size());
    for (std::size_t j = 0; j < inequalities.size(); ++j) out(j) = inequalities[j].value(x);
    return out;
}

namespace {

// Scaled view of the problem: internal variables xt relate to physical
// ones by x = d .* xt; rows carry fixed scale factors computed at x0.
struct ScaledProblem {
    const Nlp& p;
    Vec d;
    Vec rho_e;
    Vec rho_i;
    Real sigma_f = 1.0;
    int n, me, mi;

    ScaledProblem(const Nlp& problem, const Vec& x0_physical) : p(problem) {
        n = p.n;
        me = static_cast<int>(p.equalities.size());
        mi = static_cast<int>(p.inequalities.size());
        d = p.variable_scale.size() == n ? p.variable_scale : Vec::Ones(n);

        Vec grad = Vec::Zero(n);
        p.objective.accumulate_gradient(x0_physical, 1.0, grad);
        grad = d.cwiseProduct(grad);
        sigma_f = 1.0 / std::clamp(grad.lpNorm<Eigen::Infinity>(), 1e-3, 1e12);

        auto row_scale = [&](const std::vector<ScalarFunc>& funcs, const Vec& given) {
            Vec rho(funcs.size());
            if (given.size() == static_cast<int>(funcs.size())) return Vec(given);
            for (std::size_t j = 0; j < funcs.size(); ++j) {
                Vec gj = Vec::Zero(n);
                funcs[j].accumulate_gradient(x0_physical, 1.0, gj);
                gj = d.cwiseProduct(gj);
                // quadratic rows can have a vanishing gradient at the
                // start, so the row value participates as well; weak rows
                // are amplified so their multipliers stay near unit size
                const Real size = std::max(gj.lpNorm<Eigen::Infinity>(),
                                           std::abs(funcs[j].value(x0_physical)));
                rho(j) = 1.0 / std::clamp(size, 1e-3, 1e12);
            }
            return rho;
        };
        rho_e = row_scale(p.equalities, p.equality_scale);
        rho_i = row_scale(p.inequalities, p.inequality_scale);
    }

    Vec physical(const Vec& xt) const { return d.cwiseProduct(xt); }

    Real f(const Vec& xt) const { return sigma_f * p.objective.value(physical(xt)); }

    Vec grad_f(const Vec& xt) const {
        Vec g = Vec::Zero(n);
        p.objective.accumulate_gradient(physical(xt), sigma_f, g);
        return d.cwiseProduct(g);
    }

    Vec c_e(const Vec& xt) const {
        const Vec x = physical(xt);
        Vec c(me);
        for (int j = 0; j < me; ++j) c(j) = rho_e(j) * p.equalities[j].value(x);
        return c;
    }

    Vec c_i(const Vec& xt) const {
        const Vec x = physical(xt);
        Vec c(mi);
        for (int j = 0; j < mi; ++j) c(j) = rho_i(j) * p.inequalities[j].value(x);
        return c;
    }

    Mat jac_e(const Vec& xt) const {
        const Vec x = physical(xt);
        Mat jac = Mat::Zero(me, n);
        Vec g(n);
        for (int j = 0; j < me; ++j) {
            g.setZero();
            p.equalities[j].accumulate_gradient(x, rho_e(j), g);
            jac.row(j) = d.cwiseProduct(g).transpose();
        }
        return jac;
    }

    Mat jac_i(const Vec& xt) const {
        const Vec x = physical(xt);
        Mat jac = Mat::Zero(mi, n);
        Vec g(n);
        for (int j = 0; j < mi; ++j) {
            g.setZero();
            p.inequalities[j].accumulate_gradient(x, rho_i(j), g);
            jac.row(j) = d.cwiseProduct(g).transpose();
        }
        return jac;
    }

    Mat lagrangian_hessian(const Vec& xt, const Vec& lambda, const Vec& z) const {
        const Vec x = physical(xt);
        Mat h = Mat::Zero(n, n);
        p.objective.accumulate_hessian(x, sigma_f, h);
        for (int j = 0; j < me; ++j) {
            p.equalities[j].accumulate_hessian(x, rho_e(j) * lambda(j), h);
        }
        for (int j = 0; j < mi; ++j) {
            p.inequalities[j].accumulate_hessian(x, rho_i(j) * z(j), h);
        }
        return d.asDiagonal() * h * d.asDiagonal();
    }
};

Real inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Least-squares feasibility restoration: Gauss-Newton on
// 0.5 (|c_E|^2 + |c_I + s|^2) over x and s >= floor.
bool restore_feasibility(const ScaledProblem& sp, Vec& xt, Vec& s, Real target) {
    const Real s_floor = 1e-8;
    Real theta_entry = -1.0;
    for (int iter = 0; iter < 40; ++iter) {
        const Vec ce = sp.c_e(xt);
        Vec ri = sp.c_i(xt) + s;
        const Real theta = std::sqrt(ce.squaredNorm() + ri.squaredNorm());
        if (theta_entry < 0.0) theta_entry = theta;
        if (theta <= target) return true;
        if (iter > 10 && theta < 0.5 * theta_entry) return true;

        const Mat je = sp.jac_e(xt);
        const Mat ji = sp.jac_i(xt);
        Mat h = Mat::Zero(sp.n + sp.mi, sp.n + sp.mi);
        Vec rhs = Vec::Zero(sp.n + sp.mi);
        if (sp.me) {
            h.topLeftCorner(sp.n, sp.n) += je.transpose() * je;
            rhs.head(sp.n) -= je.transpose() * ce;
        }
        if (sp.mi) {
            h.topLeftCorner(sp.n, sp.n) += ji.transpose() * ji;
            h.topRightCorner(sp.n, sp.mi) += ji.transpose();
            h.bottomLeftCorner(sp.mi, sp.n) += ji;
            h.bottomRightCorner(sp.mi, sp.mi) += Mat::Identity(sp.mi, sp.mi);
            rhs.head(sp.n) -= ji.transpose() * ri;
            rhs.tail(sp.mi) -= ri;
        }
        h.diagonal().array() += 1e-8;
        const Vec step = h.ldlt().solve(rhs);
        if (!step.allFinite()) return false;

        Real alpha = 1.0;
        bool accepted = false;
        for (int back = 0; back < 30; ++back) {
            Vec xt_new = xt + alpha * step.head(sp.n);
            Vec s_new = s;
            if (sp.mi) s_new = (s + alpha * step.tail(sp.mi)).cwiseMax(s_floor);
            const Vec ce_new = sp.c_e(xt_new);
            const Vec ri_new = sp.c_i(xt_new) + s_new;
            const Real theta_new = std::sqrt(ce_new.squaredNorm() + ri_new.squaredNorm());
            if (std::isfinite(theta_new) && theta_new < theta * (1.0 - 1e-4 * alpha)) {
                xt = xt_new;
                s = s_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return false;
    }
    const Vec ce = sp.c_e(xt);
    const Vec ri = sp.c_i(xt) + s;
    return std::sqrt(ce.squaredNorm() + ri.squaredNorm()) <= target;
}

}  // namespace

NlpResult solve_nlp(const Nlp& problem, const Vec& x0, const NlpOptions& options) {
    NlpResult result;
    const ScaledProblem sp(problem, x0);
    const int n = sp.n, me = sp.me, mi = sp.mi;

    Vec xt = x0.cwiseQuotient(sp.d);
    Vec s(mi), z(mi);
    Real mu = options.mu_init;

    {
        // fit slacks to the start point so strictly feasible rows carry
        // no artificial residual; violated rows keep a small interior pad
        const Vec ci = sp.c_i(xt);
        for (int j = 0; j < mi; ++j) {
            s(j) = std::max(1e-4, -ci(j));
            z(j) = std::min(std::max(mu / s(j), 1e-6), 1e4);
        }
    }

    Vec lambda = Vec::Zero(me);
    {
        Vec rhs = -sp.grad_f(xt);
        if (mi) rhs -= sp.jac_i(xt).transpose() * z;
        if (me) {
            const Mat je = sp.jac_e(xt);
            lambda = (je * je.transpose() + 1e-8 * Mat::Identity(me, me))
                         .ldlt()
                         .solve(je * rhs);
            if (!lambda.allFinite() || inf_norm(lambda) > 1e3) lambda.setZero();
        }
    }

    Mat bfgs = Mat::Identity(n, n);
    Real delta_last = 0.0;
    int restorations = 0;

    // barrier objective and constraint violation for the filter search
    auto barrier_phi = [&](const Vec& xt_p, const Vec& s_p) {
        Real phi = sp.f(xt_p);
        for (int j = 0; j < mi; ++j) phi -= mu * std::log(s_p(j));
        return phi;
    };
    auto theta_of = [&](const Vec& xt_p, const Vec& s_p) {
        const Vec ce = sp.c_e(xt_p);
        Vec ri = sp.c_i(xt_p);
        for (int j = 0; j < mi; ++j) ri(j) += s_p(j);
        return ce.lpNorm<1>() + ri.lpNorm<1>();
    };

    // Fletcher-Leyffer filter, reset at each barrier parameter change
    std::vector<std::pair<Real, Real>> filter;  // (theta, phi) pairs
    Real theta_max = -1.0;  // set from the first iterate
    const Real gamma_theta = 1e-5, gamma_phi = 1e-5;
    auto filter_accepts = [&](Real theta_n, Real phi_n) {
        if (theta_n > theta_max) return false;
        for (const auto& [tf, pf] : filter) {
            if (!(theta_n <= (1.0 - gamma_theta) * tf || phi_n <= pf - gamma_phi * tf)) {
                return false;
            }
        }
        return true;
    };

    for (result.iterations = 0; result.iterations < options.max_iterations;
         ++result.iterations) {
        const Vec grad = sp.grad_f(xt);
        const Mat je = me ? sp.jac_e(xt) : Mat(0, n);
        const Mat ji = mi ? sp.jac_i(xt) : Mat(0, n);
        const Vec ce = sp.c_e(xt);
        const Vec ci = sp.c_i(xt);

        Vec r_dual = grad;
        if (me) r_dual += je.transpose() * lambda;
        if (mi) r_dual += ji.transpose() * z;
        Vec r_ineq = ci + s;
        Vec r_comp(mi);
        for (int j = 0; j < mi; ++j) r_comp(j) = s(j) * z(j) - mu;

        const Real s_max = 100.0;
        const Real s_d =
            std::max(s_max, (lambda.lpNorm<1>() + z.lpNorm<1>()) / std::max(1, me + mi)) / s_max;
        Real comp0 = 0.0;
        for (int j = 0; j < mi; ++j) comp0 = std::max(comp0, std::abs(s(j) * z(j)));

        const Real feas = std::max(inf_norm(ce), inf_norm(r_ineq));
        const Real kkt0 = std::max({inf_norm(r_dual) / s_d, feas, comp0 / s_d});
        result.eq_inf = inf_norm(ce);
        Real viol = 0.0;
        for (int j = 0; j < mi; ++j) viol = std::max(viol, ci(j));
        result.ineq_violation = viol;
        result.stationarity = inf_norm(r_dual) / s_d;

        if (options.verbose) {
            std::cerr << "ip iter " << result.iterations << " mu " << mu << " kkt " << kkt0
                      << " feas " << feas << " f " << sp.f(xt) << "\n";
        }
        if (kkt0 <= options.tol && feas <= options.constraint_tol) {
            result.status = NlpStatus::LocalOptimum;
            break;
        }

        // barrier subproblem error and mu reduction
        Real kkt_mu = std::max(inf_norm(r_dual) / s_d, feas);
        for (int j = 0; j < mi; ++j) {
            kkt_mu = std::max(kkt_mu, std::abs(r_comp(j)) / s_d);
        }
        if (kkt_mu <= 10.0 * mu && mu > 1e-13) {
            mu = std::max(options.tol / 100.0, std::min(0.2 * mu, std::pow(mu, 1.5)));
            filter.clear();
            // feasibility achieved so far must not be squandered later
            const Real theta_now = ce.lpNorm<1>() + r_ineq.lpNorm<1>();
            theta_max = std::min(theta_max,
                                 std::max(100.0 * theta_now, 1000.0 * options.tol));
            continue;
        }

        if (theta_max < 0.0) {
            theta_max = std::max(1.0, 100.0 * (ce.lpNorm<1>() + r_ineq.lpNorm<1>()));
        }

        Vec sigma(mi);
        for (int j = 0; j < mi; ++j) {
            const Real z_low = mu / (1e10 * s(j));
            const Real z_high = 1e10 * mu / s(j);
            z(j) = std::min(std::max(z(j), z_low), z_high);
            sigma(j) = z(j) / s(j);
        }

        Vec rhs1 = -r_dual;
        if (mi) {
            Vec t(mi);
            for (int j = 0; j < mi; ++j) t(j) = sigma(j) * r_ineq(j) - r_comp(j) / s(j);
            rhs1 -= ji.transpose() * t;
        }

        const Mat hess = options.use_bfgs ? bfgs : sp.lagrangian_hessian(xt, lambda, z);

        // direction with progressive convexification wrapped around the
        // merit line search; regularization grows until a step is taken
        bool accepted = false;
        Real delta = delta_last > 0.0 ? delta_last / 3.0 : 0.0;
        for (int attempt = 0; attempt < 9 && !accepted; ++attempt) {
            Mat w = hess;
            if (mi) w += ji.transpose() * sigma.asDiagonal() * ji;
            w.diagonal().array() += delta;
            Mat kkt(n + me, n + me);
            kkt.topLeftCorner(n, n) = w;
            if (me) {
                kkt.topRightCorner(n, me) = je.transpose();
                kkt.bottomLeftCorner(me, n) = je;
                kkt.bottomRightCorner(me, me) = -1e-10 * Mat::Identity(me, me);
            }
            Vec rhs(n + me);
            rhs.head(n) = rhs1;
            if (me) rhs.tail(me) = -ce;
            const Eigen::PartialPivLU<Mat> lu(kkt);
            const Vec step = lu.solve(rhs);
            const Real rel_err = (kkt * step - rhs).lpNorm<Eigen::Infinity>() /
                                 std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
            if (!step.allFinite() || rel_err > 1e-6) {
                delta = delta == 0.0 ? 1e-8 : delta * 100.0;
                continue;
            }
            const Vec dx = step.head(n);
            const Vec dlambda = me ? Vec(step.tail(me)) : Vec();

            // reject directions of nonpositive curvature (indefinite
            // Hessian) and runaway steps: convexify and re-solve
            const Real curvature = dx.dot(w * dx);
            const Real step_cap = 20.0 * std::max(1.0, xt.norm());
            if ((curvature < 1e-9 * dx.squaredNorm() || dx.norm() > step_cap) && attempt < 8) {
                delta = delta == 0.0 ? 1e-6 : delta * 10.0;
                continue;
            }

            Vec dz(mi), ds(mi);
            for (int j = 0; j < mi; ++j) {
                const Real jdx = ji.row(j).dot(dx);
                dz(j) = sigma(j) * (jdx + r_ineq(j)) - r_comp(j) / s(j);
                ds(j) = -r_ineq(j) - jdx;
            }

            const Real tau = std::max(0.99, 1.0 - mu);
            Real alpha_max = 1.0, alpha_z = 1.0;
            for (int j = 0; j < mi; ++j) {
                if (ds(j) < 0.0) alpha_max = std::min(alpha_max, -tau * s(j) / ds(j));
                if (dz(j) < 0.0) alpha_z = std::min(alpha_z, -tau * z(j) / dz(j));
            }

            const Real theta0 = ce.lpNorm<1>() + r_ineq.lpNorm<1>();
            const Real phi0 = barrier_phi(xt, s);
            Real dphi = grad.dot(dx);
            for (int j = 0; j < mi; ++j) dphi -= mu * ds(j) / s(j);

            // at a feasible point a non-descent direction signals bad
            // curvature: convexify and retry
            if (dphi > -1e-14 * std::max(1.0, std::abs(phi0)) && theta0 < 1e-12 && attempt < 8) {
                delta = delta == 0.0 ? 1e-6 : delta * 10.0;
                continue;
            }

            Real alpha = alpha_max;
            bool soc_tried = false;
            for (int back = 0; back < 30; ++back) {
                Vec xt_new = xt + alpha * dx;
                Vec s_new = s + alpha * ds;
                if (back == 0 && soc_tried) {
                    // second-order correction against constraint
                    // curvature, reusing the factorized KKT matrix
                    Vec ce_soc = sp.c_e(xt_new);
                    Vec ri_soc = sp.c_i(xt_new) + s_new;
                    Vec rhs_soc = Vec::Zero(n + me);
                    if (mi) {
                        Vec t_soc(mi);
                        for (int j = 0; j < mi; ++j) t_soc(j) = sigma(j) * ri_soc(j);
                        rhs_soc.head(n) = -(ji.transpose() * t_soc);
                    }
                    if (me) rhs_soc.tail(me) = -ce_soc;
                    const Vec corr = lu.solve(rhs_soc);
                    if (corr.allFinite()) {
                        Vec dx2 = corr.head(n);
                        Vec ds2(mi);
                        for (int j = 0; j < mi; ++j) {
                            ds2(j) = -ri_soc(j) - ji.row(j).dot(dx2);
                        }
                        Real a2 = 1.0;
                        for (int j = 0; j < mi; ++j) {
                            const Real total = alpha * ds(j) + ds2(j);
                            if (total < 0.0) {
                                a2 = std::min(a2, -tau * s(j) / total);
                            }
                        }
                        xt_new = xt + alpha * dx + a2 * dx2;
                        s_new = s + a2 * (alpha * ds + ds2);
                        for (int j = 0; j < mi; ++j) {
                            if (s_new(j) <= 0.0) s_new(j) = (1.0 - tau) * s(j);
                        }
                    }
                }
                bool positive = true;
                for (int j = 0; j < mi; ++j) positive &= s_new(j) > 0.0;
                if (positive) {
                    const Real phi_new = barrier_phi(xt_new, s_new);
                    const Real theta_new = theta_of(xt_new, s_new);
                    // f-type steps need Armijo progress on the barrier
                    // objective; otherwise the filter arbitrates
                    const bool f_type =
                        dphi < 0.0 &&
                        alpha * std::pow(-dphi, 2.3) > std::pow(std::max(theta0, 1e-16), 1.1);
                    bool ok;
                    if (f_type) {
                        ok = phi_new <= phi0 + 1e-4 * alpha * dphi;
                    } else {
                        ok = theta_new <= (1.0 - gamma_theta) * theta0 ||
                             phi_new <= phi0 - gamma_phi * theta0;
                    }
                    ok = ok && filter_accepts(theta_new, phi_new);
                    if (std::isfinite(phi_new) && std::isfinite(theta_new) && ok) {
                        if (!f_type) {
                            filter.emplace_back((1.0 - gamma_theta) * theta0,
                                                phi0 - gamma_phi * theta0);
                        }
                        const Vec lambda_new = me ? Vec(lambda + alpha * dlambda) : lambda;
                        Vec z_new = z + alpha_z * dz;
                        for (int j = 0; j < mi; ++j) z_new(j) = std::max(z_new(j), 1e-14);

                        if (options.use_bfgs) {
                            Vec grad_l_old = grad;
                            Vec grad_l_new = sp.grad_f(xt_new);
                            if (me) {
                                grad_l_old += je.transpose() * lambda_new;
                                grad_l_new += sp.jac_e(xt_new).transpose() * lambda_new;
                            }
                            if (mi) {
                                grad_l_old += ji.transpose() * z_new;
                                grad_l_new += sp.jac_i(xt_new).transpose() * z_new;
                            }
                            const Vec step_vec = xt_new - xt;
                            const Vec y_vec = grad_l_new - grad_l_old;
                            const Real sBs = step_vec.dot(bfgs * step_vec);
                            const Real sy = step_vec.dot(y_vec);
                            if (sBs > 1e-16 && step_vec.norm() > 1e-14) {
                                const Real damp = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
                                const Vec r = damp * y_vec + (1.0 - damp) * (bfgs * step_vec);
                                if (step_vec.dot(r) > 1e-12 * step_vec.norm() * r.norm()) {
                                    bfgs -=
                                        (bfgs * step_vec) * (step_vec.transpose() * bfgs) / sBs;
                                    bfgs += r * r.transpose() / step_vec.dot(r);
                                }
                            }
                        }

                        xt = xt_new;
                        s = s_new;
                        lambda = lambda_new;
                        z = z_new;
                        accepted = true;
                        delta_last = delta;
                        break;
                    }
                }
                if (back == 0 && !soc_tried) {
                    soc_tried = true;  // retry the full step, corrected
                    back--;
                    continue;
                }
                alpha *= 0.5;
                if (alpha < 1e-12) break;
            }
            if (!accepted) delta = delta == 0.0 ? 1e-6 : delta * 10.0;
        }

        if (!accepted) {
            if (++restorations > 4) {
                result.status = NlpStatus::InfeasibleDetected;
                result.message = "line search failed after repeated restorations";
                break;
            }
            const Vec ri_now = ci + s;
            const Real theta_in = std::sqrt(ce.squaredNorm() + ri_now.squaredNorm());
            const Real target = std::max(options.constraint_tol, 0.1 * theta_in);
            if (!restore_feasibility(sp, xt, s, std::max(target, 1e-12))) {
                result.status = NlpStatus::InfeasibleDetected;
                result.message = "feasibility restoration stalled";
                break;
            }
            for (int j = 0; j < mi; ++j) {
                s(j) = std::max(s(j), 1e-8);
                z(j) = std::min(std::max(mu / s(j), 1e-8), 1e6);
            }
            bfgs = Mat::Identity(n, n);
            filter.clear();
            delta_last = 0.0;
        }
    }

    if (result.iterations >= options.max_iterations) {
        result.status = NlpStatus::MaxIterations;
        result.message = "iteration budget exhausted";
    }
    result.x = sp.physical(xt);
    result.objective = problem.objective.value(result.x);
    result.eq_multipliers = lambda;
    result.ineq_multipliers = z;
    return result;
}

Real derivative_check(const Nlp& problem, const Vec& x_physical, unsigned seed, int directions,
                      Real step) {
    const ScaledProblem sp(problem, x_physical);
    const Vec xt = x_physical.cwiseQuotient(sp.d);
    std::mt19937 rng(seed);
    std::normal_distribution<Real> normal(0.0, 1.0);

    Real worst = 0.0;
    for (int trial = 0; trial < directions; ++trial) {
        Vec v(sp.n);
        for (int k = 0; k < sp.n; ++k) v(k) = normal(rng);
        v /= v.norm();

        const Vec xp = xt + step * v;
        const Vec xm = xt - step * v;

        const Real df_fd = (sp.f(xp) - sp.f(xm)) / (2.0 * step);
        const Real df_an = sp.grad_f(xt).dot(v);
        worst = std::max(worst, std::abs(df_fd - df_an) / std::max(1.0, std::abs(df_fd)));

        if (sp.me) {
            const Vec fd = (sp.c_e(xp) - sp.c_e(xm)) / (2.0 * step);
            const Vec an = sp.jac_e(xt) * v;
            for (int j = 0; j < sp.me; ++j) {
                worst = std::max(worst, std::abs(fd(j) - an(j)) / std::max(1.0, std::abs(fd(j))));
            }
        }
        if (sp.mi) {
            const Vec fd = (sp.c_i(xp) - sp.c_i(xm)) / (2.0 * step);
            const Vec an = sp.jac_i(xt) * v;
            for (int j = 0; j < sp.mi; ++j) {
                worst = std::max(worst, std::abs(fd(j) - an(j)) / std::max(1.0, std::abs(fd(j))));
            }
        }
    }
    return worst;
}

}  // namespace ropf

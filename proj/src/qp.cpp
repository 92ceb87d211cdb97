#include "telearm/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace telearm::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Forward substitution with the Cholesky factor: L⁻¹·b.
Vec lower_solve(const Mat& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    Vec y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
        y[i] /= l(i, i);
    }
    return y;
}

// Back substitution with the transposed factor: L⁻ᵀ·b.
Vec upper_solve(const Mat& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    Vec y(b.begin(), b.end());
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
        y[i] /= l(i, i);
    }
    return y;
}

// Householder QR of an n x k matrix (k ≤ n), stored as reflectors so that
// Qᵀ·v can be applied without forming Q.
class HouseholderQR {
public:
    explicit HouseholderQR(Mat b) : a_(std::move(b)), betas_(a_.cols(), 0.0) {
        const std::size_t n = a_.rows();
        const std::size_t k = a_.cols();
        for (std::size_t j = 0; j < k; ++j) {
            double sigma = 0.0;
            for (std::size_t i = j; i < n; ++i) sigma += a_(i, j) * a_(i, j);
            const double norm = std::sqrt(sigma);
            if (norm == 0.0) continue;
            const double alpha = a_(j, j) > 0.0 ? -norm : norm;
            const double v0 = a_(j, j) - alpha;
            // Reflector v = [1, a(j+1:, j)/v0], beta = −v0/alpha.
            for (std::size_t i = j + 1; i < n; ++i) a_(i, j) /= v0;
            betas_[j] = -v0 / alpha;
            a_(j, j) = alpha;
            for (std::size_t c = j + 1; c < k; ++c) {
                double s = a_(j, c);
                for (std::size_t i = j + 1; i < n; ++i) s += a_(i, j) * a_(i, c);
                s *= betas_[j];
                a_(j, c) -= s;
                for (std::size_t i = j + 1; i < n; ++i) a_(i, c) -= s * a_(i, j);
            }
        }
    }

    // y = Qᵀ·v
    Vec apply_qt(std::span<const double> v) const {
        Vec y(v.begin(), v.end());
        for (std::size_t j = 0; j < a_.cols(); ++j) reflect(j, y);
        return y;
    }

    // y = Q·v
    Vec apply_q(std::span<const double> v) const {
        Vec y(v.begin(), v.end());
        for (std::size_t j = a_.cols(); j-- > 0;) reflect(j, y);
        return y;
    }

    double r(std::size_t i, std::size_t j) const { return a_(i, j); }
    std::size_t cols() const { return a_.cols(); }

private:
    void reflect(std::size_t j, Vec& y) const {
        if (betas_[j] == 0.0) return;
        double s = y[j];
        for (std::size_t i = j + 1; i < a_.rows(); ++i) s += a_(i, j) * y[i];
        s *= betas_[j];
        y[j] -= s;
        for (std::size_t i = j + 1; i < a_.rows(); ++i) y[i] -= s * a_(i, j);
    }

    Mat a_;
    Vec betas_;
};

void validate(const QPProblem& p) {
    const std::size_t n = p.f.size();
    if (p.H.rows() != n || p.H.cols() != n) throw QpError("QP: H must be n x n with n = size(f)");
    if (p.W.rows() != p.w.size()) throw QpError("QP: W and w disagree on the number of constraints");
    if (p.W.rows() > 0 && p.W.cols() != n) throw QpError("QP: W must have n columns");
    double scale = 1.0;
    for (double v : p.H.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(p.H(i, j) - p.H(j, i)) > 1e-10 * scale) throw QpError("QP: H is not symmetric");
    for (double v : p.H.data())
        if (!std::isfinite(v)) throw QpError("QP: non-finite entry in H");
    for (double v : p.f)
        if (!std::isfinite(v)) throw QpError("QP: non-finite entry in f");
    for (double v : p.W.data())
        if (!std::isfinite(v)) throw QpError("QP: non-finite entry in W");
    for (double v : p.w)
        if (std::isnan(v)) throw QpError("QP: NaN entry in w");
}

class ActiveSetRun {
public:
    ActiveSetRun(const QPProblem& p, const SolverOptions& opt, const Mat& chol_lower)
        : p_(p), opt_(opt), l_(chol_lower), n_(p.f.size()), m_(p.w.size()) {}

    // Starting point: unconstrained minimizer, or the equality-constrained
    // minimizer of a warm-start set when its multipliers are all non-negative.
    void start(std::span<const std::size_t> warm) {
        active_.clear();
        u_.clear();
        Vec neg_f(p_.f.size());
        for (std::size_t i = 0; i < n_; ++i) neg_f[i] = -p_.f[i];
        x_ = upper_solve(l_, lower_solve(l_, neg_f));
        if (!warm.empty()) try_warm_start(warm);
    }

    QPSolution run() {
        QPSolution out;
        int iterations = 0;
        while (true) {
            const std::optional<std::size_t> violated = most_violated();
            if (!violated) break;
            const std::size_t p = *violated;
            double u_plus = 0.0;
            while (true) {
                if (++iterations > opt_.max_iterations) {
                    throw QpError("QP: iteration cap of " + std::to_string(opt_.max_iterations) + " exceeded");
                }
                const Vec d = lower_solve(l_, normal(p));
                Vec r;
                Vec v;
                step_directions(d, r, v);

                // Partial step length: largest t keeping active multipliers ≥ 0.
                double t1 = kInf;
                std::size_t drop = 0;
                for (std::size_t j = 0; j < active_.size(); ++j) {
                    if (r[j] > 0.0) {
                        const double t = u_[j] / r[j];
                        if (t < t1) {
                            t1 = t;
                            drop = j;
                        }
                    }
                }
                // Full step length: makes constraint p active.
                const double vv = dot(v, v);
                const bool degenerate = vv <= 1e-26 * std::max(1.0, dot(d, d));
                const double t2 = degenerate ? kInf : -slack(p) / vv;

                const double t = std::min(t1, t2);
                if (t == kInf) {
                    out.status = QPStatus::Infeasible;
                    out.iterations = iterations;
                    out.x = x_;
                    return out;
                }
                if (!degenerate) {
                    const Vec z = upper_solve(l_, v);
                    for (std::size_t i = 0; i < n_; ++i) x_[i] += t * z[i];
                }
                for (std::size_t j = 0; j < active_.size(); ++j) u_[j] -= t * r[j];
                u_plus += t;
                if (!degenerate && t2 <= t1) {
                    active_.push_back(p);
                    u_.push_back(u_plus);
                    break;
                }
                active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(drop));
                u_.erase(u_.begin() + static_cast<std::ptrdiff_t>(drop));
            }
        }
        out.status = QPStatus::Optimal;
        out.iterations = iterations;
        out.x = x_;
        out.multipliers.assign(m_, 0.0);
        for (std::size_t j = 0; j < active_.size(); ++j) out.multipliers[active_[j]] = std::max(0.0, u_[j]);
        out.active_set = active_;
        std::sort(out.active_set.begin(), out.active_set.end());
        return out;
    }

private:
    // Constraint j written as nⱼᵀx ≥ bⱼ, with nⱼ = −Wⱼᵀ and bⱼ = −wⱼ.
    Vec normal(std::size_t j) const {
        Vec nj(n_);
        for (std::size_t i = 0; i < n_; ++i) nj[i] = -p_.W(j, i);
        return nj;
    }

    // nⱼᵀx − bⱼ = wⱼ − Wⱼx; negative when violated.
    double slack(std::size_t j) const { return p_.w[j] - dot(p_.W.row(j), x_); }

    std::optional<std::size_t> most_violated() const {
        std::optional<std::size_t> best;
        double worst = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            if (std::find(active_.begin(), active_.end(), j) != active_.end()) continue;
            const double s = slack(j);
            const double tol = opt_.feasibility_tolerance * std::max(1.0, std::abs(p_.w[j]));
            if (s < -tol && s < worst) {
                worst = s;
                best = j;
            }
        }
        return best;
    }

    Mat transformed_normals() const {
        Mat b(n_, active_.size());
        for (std::size_t j = 0; j < active_.size(); ++j) b.set_col(j, lower_solve(l_, normal(active_[j])));
        return b;
    }

    // With B = L⁻¹N = Q₁R: r = R⁻¹Q₁ᵀd is the multiplier step and v = Q₂Q₂ᵀd
    // the primal step before the final L⁻ᵀ.
    void step_directions(const Vec& d, Vec& r, Vec& v) const {
        const std::size_t k = active_.size();
        if (k == 0) {
            r.clear();
            v = d;
            return;
        }
        const HouseholderQR qr(transformed_normals());
        Vec qtd = qr.apply_qt(d);
        r.assign(k, 0.0);
        for (std::size_t i = k; i-- > 0;) {
            double s = qtd[i];
            for (std::size_t c = i + 1; c < k; ++c) s -= qr.r(i, c) * r[c];
            const double rii = qr.r(i, i);
            if (std::abs(rii) < 1e-14) throw QpError("QP: active constraints became linearly dependent");
            r[i] = s / rii;
        }
        for (std::size_t i = 0; i < k; ++i) qtd[i] = 0.0;
        v = qr.apply_q(qtd);
    }

    void try_warm_start(std::span<const std::size_t> warm) {
        std::vector<std::size_t> set;
        for (std::size_t j : warm)
            if (j < m_ && std::find(set.begin(), set.end(), j) == set.end()) set.push_back(j);
        if (set.empty() || set.size() > n_) return;

        // μ = −(W_A H⁻¹ W_Aᵀ)⁻¹(w_A + W_A H⁻¹ f), x = −H⁻¹(f + W_Aᵀμ)
        Mat b(n_, set.size());
        for (std::size_t j = 0; j < set.size(); ++j) b.set_col(j, lower_solve(l_, p_.W.row(set[j])));
        const Mat gram = Mat::at_b(b, b);
        const Vec lf = lower_solve(l_, p_.f);
        Vec rhs(set.size());
        for (std::size_t j = 0; j < set.size(); ++j) rhs[j] = -(p_.w[set[j]] + dot(b.col(j), lf));
        Vec mu;
        try {
            mu = Cholesky(gram).solve(rhs);
        } catch (const std::domain_error&) {
            return;
        }
        for (double m : mu)
            if (!(m >= 0.0)) return;
        Vec g(p_.f);
        for (std::size_t j = 0; j < set.size(); ++j)
            for (std::size_t i = 0; i < n_; ++i) g[i] += p_.W(set[j], i) * mu[j];
        for (double& v : g) v = -v;
        x_ = upper_solve(l_, lower_solve(l_, g));
        active_ = std::move(set);
        u_ = std::move(mu);
    }

    const QPProblem& p_;
    const SolverOptions& opt_;
    const Mat& l_;
    std::size_t n_;
    std::size_t m_;
    Vec x_;
    std::vector<std::size_t> active_;
    Vec u_;
};

}  // namespace

double QPProblem::objective(std::span<const double> x) const {
    const Vec hx = H * x;
    return 0.5 * dot(x, hx) + dot(f, x);
}

QPSolution Solver::solve(const QPProblem& problem, std::span<const std::size_t> warm_start) {
    validate(problem);
    std::optional<Cholesky> chol;
    try {
        chol.emplace(problem.H);
    } catch (const std::domain_error&) {
        throw QpError("QP: H is not positive definite");
    }
    ActiveSetRun run(problem, options_, chol->lower());
    run.start(warm_start);
    QPSolution sol = run.run();
    last_active_ = sol.active_set;
    return sol;
}

QPSolution Solver::solve_warm(const QPProblem& problem) {
    const std::vector<std::size_t> warm = last_active_;
    return solve(problem, warm);
}

QPSolution solve(const QPProblem& problem) {
    Solver solver;
    return solver.solve(problem);
}

}  // namespace telearm::qp

#include "ldx/trajectory.hpp"

#include <cmath>

#include "ldx/errors.hpp"
#include "ldx/rng.hpp"

namespace ldx {

namespace {

void validate_plan(const StepPlan& plan, const NoiseSchedule& s) {
    if (plan.tau.empty()) throw ParamError("step plan is empty");
    int prev = 0;
    for (int t : plan.tau) {
        if (t < 1 || t > s.T) throw IndexError("plan step outside [1, T]");
        if (t <= prev) throw ParamError("plan steps must be strictly increasing");
        prev = t;
    }
}

double safe_radicand(double r) {
    if (r < 0.0) {
        if (r < -1e-12) throw NumericError("reverse step: negative radicand (invalid sigma)");
        return 0.0;
    }
    return r;
}

}  // namespace

StepPlan uniform_plan(int T, int steps, int t_target) {
    if (t_target < 1 || t_target > T) throw ParamError("uniform_plan: t_target outside [1, T]");
    if (steps < 1) throw ParamError("uniform_plan: steps must be >= 1");
    StepPlan plan;
    int prev = 0;
    for (int k = 0; k < steps; ++k) {
        double pos = steps == 1 ? t_target
                                : 1.0 + (double(t_target) - 1.0) * k / (steps - 1);
        int t = static_cast<int>(std::llround(pos));
        if (t > prev) plan.tau.push_back(t), prev = t;
    }
    return plan;
}

EpsFn eps_from_params(const DenoiserParams& p) {
    return [p](const Eigen::VectorXd& x, int t) { return predict_eps(p, x, t); };
}

Eigen::VectorXd reverse_step(const Eigen::VectorXd& x_t, const Eigen::VectorXd& eps_hat,
                             const NoiseSchedule& s, int t, int t_prev, Stochasticity eta,
                             const Eigen::VectorXd& z) {
    if (t_prev >= t) throw IndexError("reverse_step: t_prev must precede t");
    if (x_t.size() != eps_hat.size()) throw ShapeError("reverse_step: x/eps size mismatch");
    const double ab_t = s.abar(t);
    const double ab_p = s.abar(t_prev);
    const double sig = sigma_t(s, t, t_prev, eta);

    Eigen::VectorXd x0_hat = (x_t - std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(ab_t);
    const double dir = std::sqrt(safe_radicand(1.0 - ab_p - sig * sig));
    Eigen::VectorXd out = std::sqrt(ab_p) * x0_hat + dir * eps_hat;
    if (sig > 0.0) {
        if (z.size() != x_t.size()) throw ShapeError("reverse_step: z size mismatch");
        out += sig * z;
    }
    return out;
}

Trajectory invert(const Eigen::VectorXd& x0, const EpsFn& eps, const NoiseSchedule& s,
                  const StepPlan& plan, InversionVariant variant) {
    validate_plan(plan, s);
    Trajectory traj;
    traj.states.emplace_back(0, x0);
    Eigen::VectorXd x = x0;
    int src = 0;
    for (std::size_t i = 0; i < plan.tau.size(); ++i) {
        const int tgt = plan.tau[i];
        // The predictor is undefined at the data itself, so the first hop
        // evaluates it at the hop's target step.
        const int eval_t = src == 0 ? tgt : src;
        Eigen::VectorXd e = eps(x, eval_t);
        if (e.size() != x.size()) throw ShapeError("invert: predictor output size mismatch");
        const double ab_s = s.abar(src);
        if (variant == InversionVariant::kOdeConsistent) {
            Eigen::VectorXd x0_hat = (x - std::sqrt(1.0 - ab_s) * e) / std::sqrt(ab_s);
            const double ab_g = s.abar(tgt);
            x = std::sqrt(ab_g) * x0_hat + std::sqrt(1.0 - ab_g) * e;
        } else {
            // As-published update: re-noise the running latent using the
            // source step's coefficients.
            x = std::sqrt(ab_s) * x + std::sqrt(1.0 - ab_s) * e;
        }
        if (!x.allFinite())
            throw NumericError("invert: non-finite latent at hop " + std::to_string(i));
        traj.states.emplace_back(tgt, x);
        src = tgt;
    }
    return traj;
}

Trajectory invert(const Eigen::VectorXd& x0, const DenoiserParams& p, const NoiseSchedule& s,
                  const StepPlan& plan, InversionVariant variant) {
    return invert(x0, eps_from_params(p), s, plan, variant);
}

Trajectory denoise(const Eigen::VectorXd& x_t, const EpsFn& eps, const NoiseSchedule& s,
                   const StepPlan& plan, Stochasticity eta, std::uint64_t seed) {
    validate_plan(plan, s);
    Trajectory traj;
    traj.states.emplace_back(plan.tau.back(), x_t);
    Eigen::VectorXd x = x_t;
    Rng rng(mix64(seed, 31));
    const bool stochastic = eta.eta > 0.0;
    for (int i = plan.S() - 1; i >= 0; --i) {
        const int t = plan.tau[static_cast<std::size_t>(i)];
        const int t_prev = i > 0 ? plan.tau[static_cast<std::size_t>(i - 1)] : 0;
        Eigen::VectorXd e = eps(x, t);
        if (e.size() != x.size()) throw ShapeError("denoise: predictor output size mismatch");
        Eigen::VectorXd z = stochastic ? rng.normal_vec(x.size()) : Eigen::VectorXd();
        x = reverse_step(x, e, s, t, t_prev, eta, z);
        if (!x.allFinite())
            throw NumericError("denoise: non-finite latent at hop " + std::to_string(plan.S() - i));
        traj.states.emplace_back(t_prev, x);
    }
    return traj;
}

Trajectory denoise(const Eigen::VectorXd& x_t, const DenoiserParams& p, const NoiseSchedule& s,
                   const StepPlan& plan, Stochasticity eta, std::uint64_t seed) {
    return denoise(x_t, eps_from_params(p), s, plan, eta, seed);
}

std::pair<Eigen::VectorXd, double> reconstruct(const Eigen::VectorXd& x0,
                                               const DenoiserParams& p,
                                               const NoiseSchedule& s, const StepPlan& plan) {
    EpsFn eps = eps_from_params(p);
    Trajectory up = invert(x0, eps, s, plan);
    Trajectory down = denoise(up.terminal(), eps, s, plan, Stochasticity(0.0), 0);
    // Errors reported on [0,1]-rescaled pixels, i.e. half the [-1,1] gap.
    double mae = (x0 - down.terminal()).cwiseAbs().mean() * 0.5;
    return {down.terminal(), mae};
}

Eigen::MatrixXd eta_sweep(const Eigen::VectorXd& x0, const DenoiserParams& p,
                          const NoiseSchedule& s, const std::vector<int>& t_list,
                          const std::vector<Stochasticity>& eta_list,
                          const PlanBuilder& make_plan, std::uint64_t seed) {
    if (t_list.empty() || eta_list.empty()) throw ParamError("eta_sweep: empty t or eta list");
    EpsFn eps = eps_from_params(p);
    Eigen::MatrixXd grid(t_list.size(), eta_list.size());
    for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
        StepPlan plan = make_plan(t_list[ti]);
        Trajectory up = invert(x0, eps, s, plan);
        for (std::size_t ei = 0; ei < eta_list.size(); ++ei) {
            Trajectory down = denoise(up.terminal(), eps, s, plan, eta_list[ei],
                                      mix64(seed, ti, ei));
            grid(static_cast<Eigen::Index>(ti), static_cast<Eigen::Index>(ei)) =
                (x0 - down.terminal()).cwiseAbs().mean() * 0.5;
        }
    }
    return grid;
}

namespace {
constexpr int kBatchChunk = 64;  // keeps per-hop im2col buffers modest
}

Eigen::MatrixXd invert_batch(const Eigen::MatrixXd& x0, const DenoiserParams& p,
                             const NoiseSchedule& s, const StepPlan& plan,
                             InversionVariant variant) {
    validate_plan(plan, s);
    const int n = static_cast<int>(x0.rows());
    Eigen::MatrixXd out(n, x0.cols());
    for (int off = 0; off < n; off += kBatchChunk) {
        const int bsz = std::min(kBatchChunk, n - off);
        Eigen::MatrixXd x = x0.middleRows(off, bsz);
        int src = 0;
        for (std::size_t i = 0; i < plan.tau.size(); ++i) {
            const int tgt = plan.tau[i];
            const int eval_t = src == 0 ? tgt : src;
            Eigen::MatrixXd e = predict_eps_batch(p, x, std::vector<int>(static_cast<std::size_t>(bsz), eval_t));
            const double ab_s = s.abar(src);
            if (variant == InversionVariant::kOdeConsistent) {
                const double ab_g = s.abar(tgt);
                Eigen::MatrixXd x0_hat = (x - std::sqrt(1.0 - ab_s) * e) / std::sqrt(ab_s);
                x = std::sqrt(ab_g) * x0_hat + std::sqrt(1.0 - ab_g) * e;
            } else {
                x = std::sqrt(ab_s) * x + std::sqrt(1.0 - ab_s) * e;
            }
            if (!x.allFinite())
                throw NumericError("invert_batch: non-finite latent at hop " + std::to_string(i));
            src = tgt;
        }
        out.middleRows(off, bsz) = x;
    }
    return out;
}

Eigen::MatrixXd denoise_batch(const Eigen::MatrixXd& x_t, const DenoiserParams& p,
                              const NoiseSchedule& s, const StepPlan& plan, Stochasticity eta,
                              std::uint64_t seed) {
    validate_plan(plan, s);
    const int n = static_cast<int>(x_t.rows());
    const bool stochastic = eta.eta > 0.0;
    Eigen::MatrixXd out(n, x_t.cols());
    for (int off = 0, chunk = 0; off < n; off += kBatchChunk, ++chunk) {
        const int bsz = std::min(kBatchChunk, n - off);
        Eigen::MatrixXd x = x_t.middleRows(off, bsz);
        Rng rng(mix64(seed, 31, static_cast<std::uint64_t>(chunk)));
        for (int i = plan.S() - 1; i >= 0; --i) {
            const int t = plan.tau[static_cast<std::size_t>(i)];
            const int t_prev = i > 0 ? plan.tau[static_cast<std::size_t>(i - 1)] : 0;
            Eigen::MatrixXd e = predict_eps_batch(p, x, std::vector<int>(static_cast<std::size_t>(bsz), t));
            const double ab_t = s.abar(t);
            const double ab_p = s.abar(t_prev);
            const double sig = sigma_t(s, t, t_prev, eta);
            const double dir = std::sqrt(safe_radicand(1.0 - ab_p - sig * sig));
            Eigen::MatrixXd x0_hat = (x - std::sqrt(1.0 - ab_t) * e) / std::sqrt(ab_t);
            x = std::sqrt(ab_p) * x0_hat + dir * e;
            if (stochastic && sig > 0.0) {
                for (int r = 0; r < bsz; ++r)
                    x.row(r) += sig * rng.normal_vec(x.cols()).transpose();
            }
            if (!x.allFinite())
                throw NumericError("denoise_batch: non-finite latent at hop " +
                                   std::to_string(plan.S() - i));
        }
        out.middleRows(off, bsz) = x;
    }
    return out;
}

}  // namespace ldx

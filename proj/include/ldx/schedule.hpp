#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>

#include "ldx/errors.hpp"

namespace ldx {

enum class ScheduleKind { linear, cosine };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

// Degree of stochasticity of the reverse process: 0 is the deterministic
// trajectory, 1 the ancestral stochastic one.
struct Stochasticity {
    double eta = 0.0;
    Stochasticity() = default;
    Stochasticity(double e) : eta(e) {
        if (!(e >= 0.0 && e <= 1.0)) throw ParamError("eta must lie in [0, 1]");
    }
};

// Per-step noising coefficients over T steps. Sequences are 1-indexed by
// diffusion step; index 0 of the arrays holds step 1.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear;
    int T = 0;
    double beta_min = 0.0, beta_max = 0.0;  // kept for serialization; cosine ignores them
    Eigen::VectorXd beta;
    Eigen::VectorXd alpha_step;  // 1 - beta
    Eigen::VectorXd alpha_bar;   // running product of alpha_step

    // Cumulative retention at step t, with the empty-product convention
    // abar(0) = 1 so traversals may start/end at the data itself.
    double abar(int t) const {
        if (t < 0 || t > T) throw IndexError("step " + std::to_string(t) + " outside [0, T]");
        return t == 0 ? 1.0 : alpha_bar[t - 1];
    }
};

NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_min, double beta_max);

// (scale, variance) of the closed-form Gaussian marginal at step t:
// x_t ~ N(scale * x0, variance * I).
std::pair<double, double> marginal_params(const NoiseSchedule& s, int t);

// Reverse-transition noise scale; 0 when eta = 0, ancestral variance at eta = 1.
double sigma_t(const NoiseSchedule& s, int t, int t_prev, Stochasticity eta);

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
Eigen::VectorXd forward_diffuse(const Eigen::VectorXd& x0, int t,
                                const Eigen::VectorXd& eps, const NoiseSchedule& s);

// JSON round-trip stores only {kind, T, beta_min, beta_max}; the derived
// sequences are recomputed on load so files can never drift from the code.
std::string schedule_to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const std::string& text);
void save_schedule(const std::string& path, const NoiseSchedule& s);
NoiseSchedule load_schedule(const std::string& path);

}  // namespace ldx

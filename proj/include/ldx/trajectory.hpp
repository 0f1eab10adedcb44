#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ldx/denoiser.hpp"
#include "ldx/schedule.hpp"

namespace ldx {

// Strictly increasing step indices within [1, T]. Traversed forward when
// adding noise, backward when removing it; the data itself sits at the
// implicit step 0 on either end.
struct StepPlan {
    std::vector<int> tau;
    int S() const { return static_cast<int>(tau.size()); }
};

// steps indices spaced evenly over [1, t_target] (deduplicated).
StepPlan uniform_plan(int T, int steps, int t_target);

struct Trajectory {
    std::vector<std::pair<int, Eigen::VectorXd>> states;  // (step, latent) at plan nodes

    const Eigen::VectorXd& terminal() const { return states.back().second; }
    int terminal_step() const { return states.back().first; }
};

// Noise prediction as a plain callable so synthetic oracles can stand in for
// the trained network.
using EpsFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;
EpsFn eps_from_params(const DenoiserParams& p);

// One reverse hop t -> t_prev. Reconstructs the clean-image estimate from
// eps_hat, then re-noises it at t_prev; z only enters for eta > 0.
Eigen::VectorXd reverse_step(const Eigen::VectorXd& x_t, const Eigen::VectorXd& eps_hat,
                             const NoiseSchedule& s, int t, int t_prev, Stochasticity eta,
                             const Eigen::VectorXd& z);

// Choice of coefficient indexing for the noising-direction update. The
// target-indexed form is the self-consistent inverse of reverse_step and is
// the default everywhere; the source-indexed form re-noises the running
// latent with the current step's coefficients and is kept for comparison.
enum class InversionVariant { kOdeConsistent, kSourceIndexed };

// Deterministic data -> latent traversal along the plan (step 0 up to
// plan.tau.back()).
Trajectory invert(const Eigen::VectorXd& x0, const EpsFn& eps, const NoiseSchedule& s,
                  const StepPlan& plan, InversionVariant variant = InversionVariant::kOdeConsistent);
Trajectory invert(const Eigen::VectorXd& x0, const DenoiserParams& p, const NoiseSchedule& s,
                  const StepPlan& plan, InversionVariant variant = InversionVariant::kOdeConsistent);

// Latent -> data traversal (plan.tau.back() down to step 0). Noise draws are
// seeded; eta = 0 ignores the seed entirely.
Trajectory denoise(const Eigen::VectorXd& x_t, const EpsFn& eps, const NoiseSchedule& s,
                   const StepPlan& plan, Stochasticity eta, std::uint64_t seed);
Trajectory denoise(const Eigen::VectorXd& x_t, const DenoiserParams& p, const NoiseSchedule& s,
                   const StepPlan& plan, Stochasticity eta, std::uint64_t seed);

// Deterministic roundtrip; mae is measured on [0,1]-rescaled pixels.
std::pair<Eigen::VectorXd, double> reconstruct(const Eigen::VectorXd& x0,
                                               const DenoiserParams& p,
                                               const NoiseSchedule& s, const StepPlan& plan);

// Roundtrip error grid over (target step, stochasticity): invert
// deterministically, denoise at each eta. Rows follow t_list, columns
// eta_list.
using PlanBuilder = std::function<StepPlan(int t_target)>;
Eigen::MatrixXd eta_sweep(const Eigen::VectorXd& x0, const DenoiserParams& p,
                          const NoiseSchedule& s, const std::vector<int>& t_list,
                          const std::vector<Stochasticity>& eta_list,
                          const PlanBuilder& make_plan, std::uint64_t seed);

// Batched traversals used for latent banks: one image per row, shared plan.
Eigen::MatrixXd invert_batch(const Eigen::MatrixXd& x0, const DenoiserParams& p,
                             const NoiseSchedule& s, const StepPlan& plan,
                             InversionVariant variant = InversionVariant::kOdeConsistent);
Eigen::MatrixXd denoise_batch(const Eigen::MatrixXd& x_t, const DenoiserParams& p,
                              const NoiseSchedule& s, const StepPlan& plan, Stochasticity eta,
                              std::uint64_t seed);

}  // namespace ldx

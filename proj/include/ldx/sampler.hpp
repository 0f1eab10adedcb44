#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ldx/geometry.hpp"
#include "ldx/trajectory.hpp"

namespace ldx {

// Spherical-Gaussian proxy for a latent bank: per-dimension mean plus one
// pooled variance.
struct GaussianEstimate {
    Eigen::VectorXd mu;
    double var = 0.0;
};

struct RejectionConfig {
    double omega_d = 0.3;   // relative half-width of the distance band around d_o
    double omega_a = 8.0;   // half-width in degrees of the 60-degree angle band
    int n_ref = 8;          // reference latents per filtering call
    int n_pairs = 1000;     // pairs used to estimate d_o (capped at all pairs)
    double lambda_lo = 0.2, lambda_hi = 0.8;
    int max_attempts = 1000;
    std::uint64_t seed = 0;
    // Optional extra rejection: drop candidates closer to the in-domain bank
    // center than the mode-separation threshold.
    bool anti_interference = false;
    Eigen::VectorXd id_center;
};

// Accept/reject verdict of one filtering call plus per-criterion tallies
// ("distance_low", "distance_high", "angle_low", "angle_high", "degenerate",
// "id_proximity"); only the first failing check of a candidate is tallied.
struct FilterOutcome {
    bool accepted = false;
    int checks_passed = 0;
    std::map<std::string, int> reasons;
};

struct SampleResult {
    Eigen::VectorXd latent;
    int attempts = 0;
    bool accepted = false;
    std::map<std::string, int> rejection_reasons;
    // Provenance of the returned candidate.
    int ref_index = -1;
    double lambda = 0.0;
    double d_o = 0.0;               // reference distance the filter ran against
    std::uint64_t filter_seed = 0;  // reuse with geometric_filter to re-verify
    int checks_passed = 0;
};

// Per-dimension mean and pooled unbiased scalar variance over all N*d
// entries.
GaussianEstimate estimate_gaussian(const LatentBank& bank);

// Great-circle interpolation; falls back to straight-line interpolation for
// (anti)parallel or zero inputs and reports that via *degenerate.
Eigen::VectorXd slerp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double lam,
                      bool* degenerate = nullptr);

// Mean distance over n_pairs seeded random distinct pairs.
double reference_distance(const LatentBank& bank, int n_pairs, std::uint64_t seed);

// Distance band [d_o(1-omega_d), d_o(1+omega_d)] against each of n_ref seeded
// references, then the angle at the candidate toward seeded reference pairs
// must stay within 60 +/- omega_a degrees. Deterministic given cfg.seed.
FilterOutcome geometric_filter(const Eigen::VectorXd& candidate, const LatentBank& bank,
                               double d_o, const RejectionConfig& cfg);

// Draw from the estimated Gaussian, interpolate toward a random bank member,
// filter; repeat up to max_attempts. On exhaustion returns the best-scoring
// candidate with accepted = false.
SampleResult sample_ood_latent(const LatentBank& bank, const GaussianEstimate& est,
                               const RejectionConfig& cfg);

// Unfiltered draws from the estimated Gaussian (the naive baseline).
std::vector<Eigen::VectorXd> sample_vanilla_gaussian(const GaussianEstimate& est, int n,
                                                     std::uint64_t seed);

struct GeneratedBatch {
    Eigen::MatrixXd images;   // one denoised accepted sample per row
    std::vector<SampleResult> results;  // one per requested sample, incl. failures
};

// Full sampling loop: n accepted latents, each denoised deterministically
// along the plan.
GeneratedBatch generate_ood(const LatentBank& bank, const DenoiserParams& p,
                            const NoiseSchedule& s, const StepPlan& plan, int n,
                            const RejectionConfig& cfg);

}  // namespace ldx

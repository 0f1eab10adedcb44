#include "ldx/sampler.hpp"

#include <cmath>
#include <unordered_set>

#include "ldx/rng.hpp"

namespace ldx {

namespace {

constexpr std::uint64_t kSaltDraw = 401;
constexpr std::uint64_t kSaltFilter = 402;
constexpr std::uint64_t kSaltDist = 403;
constexpr std::uint64_t kSaltPerSample = 404;

void validate_cfg(const RejectionConfig& cfg) {
    if (cfg.omega_d <= 0.0 || cfg.omega_a <= 0.0)
        throw ParamError("rejection config: tolerances must be positive");
    if (!(cfg.lambda_lo >= 0.0 && cfg.lambda_lo <= cfg.lambda_hi && cfg.lambda_hi <= 1.0))
        throw ParamError("rejection config: need 0 <= lambda_lo <= lambda_hi <= 1");
    if (cfg.max_attempts < 1) throw ParamError("rejection config: max_attempts must be >= 1");
    if (cfg.n_ref < 1) throw ParamError("rejection config: n_ref must be >= 1");
    if (cfg.n_pairs < 1) throw ParamError("rejection config: n_pairs must be >= 1");
}

}  // namespace

GaussianEstimate estimate_gaussian(const LatentBank& bank) {
    if (bank.n() < 2) throw DataError("estimate_gaussian: bank needs at least 2 vectors");
    GaussianEstimate est;
    est.mu = bank.vectors.colwise().mean();
    const double n_scalars = double(bank.n()) * bank.d();
    double ss = (bank.vectors.rowwise() - est.mu.transpose()).squaredNorm();
    est.var = ss / (n_scalars - 1.0);
    return est;
}

Eigen::VectorXd slerp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double lam,
                      bool* degenerate) {
    if (a.size() != b.size()) throw ShapeError("slerp: dimension mismatch");
    if (degenerate) *degenerate = false;
    const double na = a.norm(), nb = b.norm();
    auto lerp = [&] {
        if (degenerate) *degenerate = true;
        return ((1.0 - lam) * a + lam * b).eval();
    };
    if (na == 0.0 || nb == 0.0) return lerp();
    double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    double omega = std::acos(c);
    double so = std::sin(omega);
    if (so < 1e-9) return lerp();
    return (std::sin((1.0 - lam) * omega) * a + std::sin(lam * omega) * b) / so;
}

double reference_distance(const LatentBank& bank, int n_pairs, std::uint64_t seed) {
    const int n = bank.n();
    if (n < 2) throw DataError("reference_distance: bank needs at least 2 vectors");
    if (n_pairs < 1) throw ParamError("reference_distance: n_pairs must be >= 1");
    const std::int64_t all_pairs = std::int64_t(n) * (n - 1) / 2;

    double sum = 0.0;
    std::int64_t used = 0;
    if (n_pairs >= all_pairs) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                sum += (bank.vectors.row(i) - bank.vectors.row(j)).norm();
                ++used;
            }
    } else {
        Rng rng(mix64(seed, kSaltDist));
        std::unordered_set<std::int64_t> seen;
        while (used < n_pairs) {
            int i = static_cast<int>(rng.uniform_int(n));
            int j = static_cast<int>(rng.uniform_int(n));
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            if (!seen.insert(std::int64_t(i) * n + j).second) continue;
            sum += (bank.vectors.row(i) - bank.vectors.row(j)).norm();
            ++used;
        }
    }
    return sum / double(used);
}

FilterOutcome geometric_filter(const Eigen::VectorXd& candidate, const LatentBank& bank,
                               double d_o, const RejectionConfig& cfg) {
    if (candidate.size() != bank.d()) throw ShapeError("geometric_filter: dimension mismatch");
    validate_cfg(cfg);
    if (d_o <= 0.0) throw ParamError("geometric_filter: d_o must be positive");

    const int n = bank.n();
    const int n_ref = std::min(cfg.n_ref, n);

    // Draw all randomness up front so the pass/fail sequence depends on the
    // tolerances only through the band tests (widening a band can then never
    // flip an accept into a reject).
    Rng rng(mix64(cfg.seed, kSaltFilter));
    std::vector<int> refs = rng.distinct_indices(n, n_ref);
    std::vector<std::pair<int, int>> angle_pairs;
    angle_pairs.reserve(static_cast<std::size_t>(n_ref));
    for (int i = 0; i < n_ref; ++i) {
        if (n_ref < 2) {
            angle_pairs.emplace_back(0, 0);
            continue;
        }
        int p = static_cast<int>(rng.uniform_int(n_ref));
        int q = static_cast<int>(rng.uniform_int(n_ref - 1));
        if (q >= p) ++q;  // distinct pair within the reference subset
        angle_pairs.emplace_back(p, q);
    }

    FilterOutcome out;
    auto fail = [&out](const std::string& reason) {
        out.reasons[reason] += 1;
        out.accepted = false;
    };

    if (cfg.anti_interference) {
        if (cfg.id_center.size() != candidate.size())
            throw ShapeError("geometric_filter: id_center dimension mismatch");
        if ((candidate - cfg.id_center).norm() < separation_threshold(double(candidate.size()))) {
            fail("id_proximity");
            return out;
        }
        ++out.checks_passed;
    }

    const double lo = d_o * (1.0 - cfg.omega_d);
    const double hi = d_o * (1.0 + cfg.omega_d);
    for (int i = 0; i < n_ref; ++i) {
        double dist = (candidate - bank.vectors.row(refs[static_cast<std::size_t>(i)]).transpose()).norm();
        if (dist == 0.0) {
            fail("degenerate");
            return out;
        }
        if (dist < lo) {
            fail("distance_low");
            return out;
        }
        if (dist > hi) {
            fail("distance_high");
            return out;
        }
        ++out.checks_passed;
    }

    if (n_ref >= 2) {
        for (int i = 0; i < n_ref; ++i) {
            auto [pi, qi] = angle_pairs[static_cast<std::size_t>(i)];
            Eigen::VectorXd u =
                bank.vectors.row(refs[static_cast<std::size_t>(pi)]).transpose() - candidate;
            Eigen::VectorXd v =
                bank.vectors.row(refs[static_cast<std::size_t>(qi)]).transpose() - candidate;
            if (u.norm() == 0.0 || v.norm() == 0.0) {
                fail("degenerate");
                return out;
            }
            double ang = origin_angle(u, v);
            if (ang < 60.0 - cfg.omega_a) {
                fail("angle_low");
                return out;
            }
            if (ang > 60.0 + cfg.omega_a) {
                fail("angle_high");
                return out;
            }
            ++out.checks_passed;
        }
    }

    out.accepted = true;
    return out;
}

SampleResult sample_ood_latent(const LatentBank& bank, const GaussianEstimate& est,
                               const RejectionConfig& cfg) {
    validate_cfg(cfg);
    if (bank.d() != est.mu.size())
        throw ShapeError("sample_ood_latent: bank/estimate dimension mismatch");
    if (est.var <= 0.0) throw ParamError("sample_ood_latent: estimate variance must be positive");

    const double d_o = reference_distance(bank, cfg.n_pairs, cfg.seed);
    const double sd = std::sqrt(est.var);

    Rng draw(mix64(cfg.seed, kSaltDraw));
    SampleResult best;
    SampleResult result;
    result.d_o = d_o;
    best.d_o = d_o;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        Eigen::VectorXd xbar = est.mu + sd * draw.normal_vec(bank.d());
        int ref = static_cast<int>(draw.uniform_int(bank.n()));
        double lam = draw.uniform(cfg.lambda_lo, cfg.lambda_hi);
        Eigen::VectorXd cand = slerp(bank.vectors.row(ref).transpose(), xbar, lam);

        RejectionConfig fcfg = cfg;
        fcfg.seed = mix64(cfg.seed, kSaltFilter, static_cast<std::uint64_t>(attempt));
        FilterOutcome fo = geometric_filter(cand, bank, d_o, fcfg);

        for (const auto& [k, v] : fo.reasons) result.rejection_reasons[k] += v;
        if (fo.accepted) {
            result.latent = std::move(cand);
            result.attempts = attempt;
            result.accepted = true;
            result.ref_index = ref;
            result.lambda = lam;
            result.filter_seed = fcfg.seed;
            result.checks_passed = fo.checks_passed;
            return result;
        }
        if (best.latent.size() == 0 || fo.checks_passed > best.checks_passed) {
            best.latent = std::move(cand);
            best.ref_index = ref;
            best.lambda = lam;
            best.filter_seed = fcfg.seed;
            best.checks_passed = fo.checks_passed;
        }
    }
    result.latent = best.latent;
    result.attempts = cfg.max_attempts;
    result.accepted = false;
    result.ref_index = best.ref_index;
    result.lambda = best.lambda;
    result.filter_seed = best.filter_seed;
    result.checks_passed = best.checks_passed;
    return result;
}

std::vector<Eigen::VectorXd> sample_vanilla_gaussian(const GaussianEstimate& est, int n,
                                                     std::uint64_t seed) {
    if (n < 1) throw ParamError("sample_vanilla_gaussian: n must be >= 1");
    if (est.var < 0.0) throw ParamError("sample_vanilla_gaussian: negative variance");
    Rng rng(mix64(seed, kSaltDraw, 1));
    const double sd = std::sqrt(est.var);
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(est.mu + sd * rng.normal_vec(est.mu.size()));
    return out;
}

GeneratedBatch generate_ood(const LatentBank& bank, const DenoiserParams& p,
                            const NoiseSchedule& s, const StepPlan& plan, int n,
                            const RejectionConfig& cfg) {
    if (n < 0) throw ParamError("generate_ood: n must be >= 0");
    if (bank.t != plan.tau.back())
        throw ParamError("generate_ood: bank step does not match plan terminal step");

    GeneratedBatch batch;
    if (n == 0) {
        batch.images.resize(0, bank.d());
        return batch;
    }

    GaussianEstimate est = estimate_gaussian(bank);
    std::vector<Eigen::VectorXd> accepted;
    for (int i = 0; i < n; ++i) {
        RejectionConfig per = cfg;
        per.seed = mix64(cfg.seed, kSaltPerSample, static_cast<std::uint64_t>(i));
        SampleResult r = sample_ood_latent(bank, est, per);
        if (r.accepted) accepted.push_back(r.latent);
        batch.results.push_back(std::move(r));
    }

    Eigen::MatrixXd latents(static_cast<Eigen::Index>(accepted.size()), bank.d());
    for (std::size_t i = 0; i < accepted.size(); ++i) latents.row(static_cast<Eigen::Index>(i)) = accepted[i];
    batch.images = accepted.empty()
                       ? Eigen::MatrixXd(0, bank.d())
                       : denoise_batch(latents, p, s, plan, Stochasticity(0.0), cfg.seed);
    return batch;
}

}  // namespace ldx

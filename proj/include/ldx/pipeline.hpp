#pragma once

#include <map>
#include <optional>
#include <string>

#include "ldx/dataset.hpp"
#include "ldx/denoiser.hpp"
#include "ldx/sampler.hpp"
#include "ldx/schedule.hpp"

namespace ldx {

// Everything a full run needs; serializable to/from JSON so runs are
// reproducible from one file plus the seed.
struct RunConfig {
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    ScheduleKind schedule_kind = ScheduleKind::linear;
    int T = 200;
    double beta_min = 5e-4, beta_max = 0.1;

    int steps = 60;        // plan length
    double t_frac = 0.8;   // target latent step as a fraction of T

    int img_h = 16, img_w = 16;
    int n_train = 2000;
    int bank_n = 500;
    Domain id_domain = Domain::disks;
    Domain ood_domain = Domain::stripes;

    int hidden = 16;
    int temb_dim = 32;
    std::string model_path;  // load this checkpoint instead of training
    TrainConfig train{.epochs = 8};

    RejectionConfig sampler;

    int clf_epochs = 200;
    double clf_lr = 0.01;

    int n_generate = 64;
    int n_roundtrip = 100;
    int n_baseline = 64;

    int t_target() const;
    int dim() const { return img_h * img_w; }
};

RunConfig config_from_json(const std::string& text);
RunConfig config_from_json_file(const std::string& path);
std::string config_to_json(const RunConfig& cfg);

struct DomainRecon {
    double eta0 = 0.0;
    double eta1 = 0.0;
};

struct EvalReport {
    std::map<std::string, DomainRecon> reconstruction;  // keyed by domain label
    double interference_baseline = 0.0;  // pure-noise starts
    double interference_vanilla = 0.0;   // unfiltered Gaussian draws
    double interference_pipeline = 0.0;  // filtered slerp candidates
    double diversity_pairwise = 0.0;
    std::optional<double> diversity_to_reference;
    double diversity_train_reference = 0.0;  // raw out-of-domain set, as a ceiling
    std::string geometry_id_path, geometry_ood_path;
    double center_distance = 0.0;
    double separation_thresh = 0.0;
    double latent_accuracy = 0.0;
    double pixel_accuracy = 0.0;
    int samples_requested = 0;
    int samples_accepted = 0;
    double mean_attempts = 0.0;
    double rejection_rate = 0.0;
    std::map<std::string, int> rejection_reasons;
    std::map<std::string, double> timings;  // excluded from determinism claims
};

std::string report_to_json(const EvalReport& r);
void save_eval_report(const std::string& path, const EvalReport& r);

// Stage entry points; each reads missing inputs from cfg.out_dir and writes
// its artifacts there. run_pipeline chains them in memory.
void pipeline_train(const RunConfig& cfg);
void pipeline_invert(const RunConfig& cfg);
void pipeline_geometry(const RunConfig& cfg);
void pipeline_separability(const RunConfig& cfg);
void pipeline_sample(const RunConfig& cfg);
EvalReport pipeline_evaluate(const RunConfig& cfg);

// train (or load) -> invert banks -> geometry/separability reports ->
// filtered sampling -> baselines -> metrics. Deterministic given cfg.seed
// (timings aside); failures surface as StageError with partial artifacts
// left in place.
EvalReport run_pipeline(const RunConfig& cfg);

}  // namespace ldx

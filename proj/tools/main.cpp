#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldx/errors.hpp"
#include "ldx/metrics.hpp"
#include "ldx/pipeline.hpp"
#include "ldx/rng.hpp"
#include "ldx/tensor_io.hpp"
#include "ldx/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ldx::DataError("cannot open '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// CLI seed salts (module stages use 1..518).
constexpr std::uint64_t kSaltReconData = 601;
constexpr std::uint64_t kSaltReconEta = 602;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Out-of-domain sample synthesis from a frozen desk-scale diffusion model"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    auto* opt_config = app.add_option("--config", config_path, "JSON run configuration file");
    auto* opt_seed = app.add_option("--seed", seed, "master seed override");
    auto* opt_out = app.add_option("--out-dir", out_dir, "artifact directory override");

    auto* sc_train = app.add_subcommand("train", "fit the noise predictor on in-domain images");
    auto* sc_invert =
        app.add_subcommand("invert", "build in/out-of-domain latent banks by inversion");
    auto* sc_geometry = app.add_subcommand("geometry", "summarize latent bank geometry");
    auto* sc_separability =
        app.add_subcommand("separability", "fit linear domain classifiers, emit accuracies");
    auto* sc_reconstruct =
        app.add_subcommand("reconstruct", "roundtrip error of freshly drawn images");
    auto* sc_sample = app.add_subcommand("sample", "draw filtered latents and decode them");
    auto* sc_evaluate = app.add_subcommand("evaluate", "run baselines and write the report");
    auto* sc_pipeline = app.add_subcommand("pipeline", "run every stage end to end");

    int steps = 0;
    double t_frac = 0.0;
    auto* opt_steps = sc_invert->add_option("--steps", steps, "plan length");
    auto* opt_tfrac = sc_invert->add_option("--t-frac", t_frac, "target step fraction of T");
    auto* opt_steps_p = sc_pipeline->add_option("--steps", steps, "plan length");
    auto* opt_tfrac_p = sc_pipeline->add_option("--t-frac", t_frac, "target step fraction of T");

    double eta = 0.0;
    int recon_n = 16;
    std::string recon_domain;
    auto* opt_steps_r = sc_reconstruct->add_option("--steps", steps, "plan length");
    auto* opt_tfrac_r = sc_reconstruct->add_option("--t-frac", t_frac, "target step fraction");
    sc_reconstruct->add_option("--eta", eta, "stochasticity of the second decode")
        ->check(CLI::Range(0.0, 1.0));
    sc_reconstruct->add_option("--n", recon_n, "number of images")->check(CLI::PositiveNumber);
    sc_reconstruct->add_option("--domain", recon_domain,
                               "image family (defaults to the configured out-of-domain one)");

    int sample_n = 0;
    double omega_d = 0.0, omega_a = 0.0, lambda_lo = 0.0, lambda_hi = 0.0;
    int n_ref = 0, max_attempts = 0;
    bool anti_interference = false;
    auto* opt_n = sc_sample->add_option("--n", sample_n, "samples to generate");
    auto* opt_od = sc_sample->add_option("--omega-d", omega_d, "distance band half-width");
    auto* opt_oa = sc_sample->add_option("--omega-a", omega_a, "angle band half-width (deg)");
    auto* opt_nref = sc_sample->add_option("--n-ref", n_ref, "references per filter call");
    auto* opt_llo = sc_sample->add_option("--lambda-lo", lambda_lo, "interpolation lower bound");
    auto* opt_lhi = sc_sample->add_option("--lambda-hi", lambda_hi, "interpolation upper bound");
    auto* opt_max = sc_sample->add_option("--max-attempts", max_attempts, "attempts per sample");
    auto* opt_anti = sc_sample->add_flag("--anti-interference", anti_interference,
                                         "also reject candidates near the in-domain center");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        ldx::RunConfig cfg;
        if (*opt_config) cfg = ldx::config_from_json_file(config_path);
        if (*opt_seed) cfg.seed = seed;
        if (*opt_out) cfg.out_dir = out_dir;
        if (*opt_steps || *opt_steps_p || *opt_steps_r) cfg.steps = steps;
        if (*opt_tfrac || *opt_tfrac_p || *opt_tfrac_r) cfg.t_frac = t_frac;
        if (*opt_n) cfg.n_generate = sample_n;
        if (*opt_od) cfg.sampler.omega_d = omega_d;
        if (*opt_oa) cfg.sampler.omega_a = omega_a;
        if (*opt_nref) cfg.sampler.n_ref = n_ref;
        if (*opt_llo) cfg.sampler.lambda_lo = lambda_lo;
        if (*opt_lhi) cfg.sampler.lambda_hi = lambda_hi;
        if (*opt_max) cfg.sampler.max_attempts = max_attempts;
        if (*opt_anti) cfg.sampler.anti_interference = anti_interference;

        const auto artifact = [&cfg](const std::string& name) {
            return (fs::path(cfg.out_dir) / name).string();
        };

        if (*sc_train) {
            ldx::pipeline_train(cfg);
            std::cout << json{{"model", artifact("model.dnz1")}}.dump(2) << "\n";
        } else if (*sc_invert) {
            ldx::pipeline_invert(cfg);
            std::cout << json{{"id_bank", artifact("id_bank.ldt")},
                              {"ood_bank", artifact("ood_bank.ldt")}}
                             .dump(2)
                      << "\n";
        } else if (*sc_geometry) {
            ldx::pipeline_geometry(cfg);
            json out{{"id", json::parse(slurp(artifact("geometry_id.json")))},
                     {"ood", json::parse(slurp(artifact("geometry_ood.json")))}};
            std::cout << out.dump(2) << "\n";
        } else if (*sc_separability) {
            ldx::pipeline_separability(cfg);
            std::cout << slurp(artifact("classifier_summary.json"));
        } else if (*sc_reconstruct) {
            ldx::NoiseSchedule s = ldx::load_schedule(artifact("schedule.json"));
            ldx::DenoiserParams p = ldx::load_denoiser(artifact("model.dnz1"));
            const int tt =
                std::clamp(static_cast<int>(std::llround(cfg.t_frac * s.T)), 1, s.T);
            ldx::StepPlan plan = ldx::uniform_plan(s.T, cfg.steps, tt);
            ldx::Domain dom =
                recon_domain.empty() ? cfg.ood_domain : ldx::domain_from_string(recon_domain);
            auto imgs = ldx::make_synthetic_dataset({dom, p.arch.h, p.arch.w, recon_n,
                                                     ldx::mix64(cfg.seed, kSaltReconData)});
            Eigen::MatrixXd x0(recon_n, p.arch.h * p.arch.w);
            for (int i = 0; i < recon_n; ++i) x0.row(i) = imgs[static_cast<std::size_t>(i)];
            Eigen::MatrixXd lat = ldx::invert_batch(x0, p, s, plan);
            Eigen::MatrixXd det = ldx::denoise_batch(lat, p, s, plan, 0.0, 0);
            Eigen::MatrixXd sto =
                ldx::denoise_batch(lat, p, s, plan, eta, ldx::mix64(cfg.seed, kSaltReconEta));
            double mae0 = 0.0, mae_eta = 0.0;
            for (int i = 0; i < recon_n; ++i) {
                mae0 += ldx::mae(x0.row(i).transpose(), det.row(i).transpose());
                mae_eta += ldx::mae(x0.row(i).transpose(), sto.row(i).transpose());
            }
            json out{{"domain", ldx::to_string(dom)},     {"n", recon_n},
                     {"steps", plan.S()},                 {"t_target", plan.tau.back()},
                     {"eta", eta},                        {"mae_eta0", mae0 / recon_n},
                     {"mae_at_eta", mae_eta / recon_n}};
            std::cout << out.dump(2) << "\n";
        } else if (*sc_sample) {
            ldx::pipeline_sample(cfg);
            json prov = json::parse(slurp(artifact("provenance.json")));
            int accepted = 0;
            long attempts = 0;
            for (const json& r : prov.at("samples")) {
                accepted += r.at("accepted").get<bool>() ? 1 : 0;
                attempts += r.at("attempts").get<int>();
            }
            const auto n_req = prov.at("samples").size();
            json out{{"requested", n_req},
                     {"accepted", accepted},
                     {"mean_attempts", n_req ? static_cast<double>(attempts) / n_req : 0.0},
                     {"images", artifact("gen_images.ldt")},
                     {"provenance", artifact("provenance.json")}};
            std::cout << out.dump(2) << "\n";
        } else if (*sc_evaluate) {
            ldx::EvalReport rep = ldx::pipeline_evaluate(cfg);
            std::cout << ldx::report_to_json(rep);
        } else if (*sc_pipeline) {
            ldx::EvalReport rep = ldx::run_pipeline(cfg);
            std::cout << ldx::report_to_json(rep);
        }
        return 0;
    } catch (const ldx::ParamError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ldx::StageError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

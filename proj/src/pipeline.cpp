#include "ldx/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ldx/errors.hpp"
#include "ldx/metrics.hpp"
#include "ldx/rng.hpp"
#include "ldx/separability.hpp"
#include "ldx/tensor_io.hpp"
#include "ldx/trajectory.hpp"

namespace ldx {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stage stream salts; disjoint from module-internal salts by construction.
constexpr std::uint64_t kSaltTrainData = 501;
constexpr std::uint64_t kSaltInit = 502;
constexpr std::uint64_t kSaltTrain = 503;
constexpr std::uint64_t kSaltIdBank = 504;
constexpr std::uint64_t kSaltOodBank = 505;
constexpr std::uint64_t kSaltGeometry = 506;
constexpr std::uint64_t kSaltSplit = 507;
constexpr std::uint64_t kSaltClf = 508;
constexpr std::uint64_t kSaltPixSplit = 509;
constexpr std::uint64_t kSaltPixClf = 510;
constexpr std::uint64_t kSaltSample = 511;
constexpr std::uint64_t kSaltBaseNoise = 512;
constexpr std::uint64_t kSaltBaseDenoise = 513;
constexpr std::uint64_t kSaltVanilla = 514;
constexpr std::uint64_t kSaltVanDenoise = 515;
constexpr std::uint64_t kSaltEvalId = 516;
constexpr std::uint64_t kSaltEvalOod = 517;
constexpr std::uint64_t kSaltEtaOne = 518;

std::string apath(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw DataError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& v) {
    if (v.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), v[0].size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) = v[static_cast<std::size_t>(i)];
    return m;
}

std::vector<Eigen::VectorXd> split_rows(const Eigen::MatrixXd& m) {
    std::vector<Eigen::VectorXd> v;
    v.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v.push_back(m.row(i).transpose());
    return v;
}

void check_keys(const json& j, const std::string& scope, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ParamError("unknown config key '" +
                             (scope.empty() ? it.key() : scope + "." + it.key()) + "'");
    }
}

struct Ctx {
    RunConfig cfg;
    NoiseSchedule sched;
    StepPlan plan;
    DenoiserParams model;
    bool have_model = false;
    LatentBank id_bank, ood_bank;
    Eigen::MatrixXd id_imgs, ood_imgs;
    bool have_banks = false;
    LinearModel latent_clf, pixel_clf;
    double latent_acc = -1.0, pixel_acc = -1.0;
    bool have_clf = false;
    GeneratedBatch gen;
    bool have_gen = false;
    Eigen::MatrixXd baseline_imgs, vanilla_imgs;
    bool have_baselines = false;
    EvalReport report;
};

Ctx make_ctx(const RunConfig& cfg) {
    Ctx c;
    c.cfg = cfg;
    c.sched = build_schedule(cfg.schedule_kind, cfg.T, cfg.beta_min, cfg.beta_max);
    c.plan = uniform_plan(cfg.T, cfg.steps, cfg.t_target());
    fs::create_directories(cfg.out_dir);
    return c;
}

template <typename F>
void run_stage(const char* name, std::map<std::string, double>& timings, F&& body) {
    auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_model(Ctx& c) {
    if (c.have_model) return;
    c.model = load_denoiser(apath(c.cfg, "model.dnz1"));
    c.have_model = true;
}

void ensure_banks(Ctx& c) {
    if (c.have_banks) return;
    const int t = c.plan.tau.back();
    c.id_bank = load_bank(apath(c.cfg, "id_bank.ldt"), to_string(c.cfg.id_domain), t);
    c.ood_bank = load_bank(apath(c.cfg, "ood_bank.ldt"), to_string(c.cfg.ood_domain), t);
    c.id_imgs = load_matrix(apath(c.cfg, "id_bank_images.ldt"));
    c.ood_imgs = load_matrix(apath(c.cfg, "ood_bank_images.ldt"));
    c.have_banks = true;
}

void ensure_clf(Ctx& c) {
    if (c.have_clf) return;
    c.latent_clf = load_linear(apath(c.cfg, "latent_clf.bin"));
    c.pixel_clf = load_linear(apath(c.cfg, "pixel_clf.bin"));
    json j = json::parse(read_text(apath(c.cfg, "classifier_summary.json")));
    c.latent_acc = j.at("latent_accuracy").get<double>();
    c.pixel_acc = j.at("pixel_accuracy").get<double>();
    c.have_clf = true;
}

void ensure_generated(Ctx& c) {
    if (c.have_gen) return;
    c.gen.images = load_matrix(apath(c.cfg, "gen_images.ldt"));
    json prov = json::parse(read_text(apath(c.cfg, "provenance.json")));
    c.gen.results.clear();
    for (const json& r : prov.at("samples")) {
        SampleResult sr;
        sr.accepted = r.at("accepted").get<bool>();
        sr.attempts = r.at("attempts").get<int>();
        sr.ref_index = r.at("ref_index").get<int>();
        sr.lambda = r.at("lambda").get<double>();
        sr.d_o = r.at("d_o").get<double>();
        sr.filter_seed = r.at("filter_seed").get<std::uint64_t>();
        sr.checks_passed = r.at("checks_passed").get<int>();
        sr.rejection_reasons = r.at("reasons").get<std::map<std::string, int>>();
        c.gen.results.push_back(std::move(sr));
    }
    c.have_gen = true;
}

void stage_train(Ctx& c) {
    const RunConfig& cfg = c.cfg;
    save_schedule(apath(cfg, "schedule.json"), c.sched);
    if (!cfg.model_path.empty()) {
        c.model = load_denoiser(cfg.model_path);
        if (c.model.arch.h != cfg.img_h || c.model.arch.w != cfg.img_w)
            throw ShapeError("checkpoint image size does not match config");
    } else {
        auto data = make_synthetic_dataset(
            {cfg.id_domain, cfg.img_h, cfg.img_w, cfg.n_train, mix64(cfg.seed, kSaltTrainData)});
        Arch a{cfg.img_h, cfg.img_w, 1, cfg.hidden, cfg.temb_dim};
        DenoiserParams p0 = init_denoiser(a, mix64(cfg.seed, kSaltInit));
        TrainConfig tc = cfg.train;
        tc.seed = mix64(cfg.seed, cfg.train.seed, kSaltTrain);
        auto [trained, hist] = train_denoiser(p0, data, c.sched, tc);
        c.model = std::move(trained);
        write_text(apath(cfg, "loss_history.json"), json{{"epoch_loss", hist}}.dump(2) + "\n");
    }
    save_denoiser(apath(cfg, "model.dnz1"), c.model);
    c.have_model = true;
}

void stage_invert(Ctx& c) {
    ensure_model(c);
    const RunConfig& cfg = c.cfg;
    auto id = make_synthetic_dataset(
        {cfg.id_domain, cfg.img_h, cfg.img_w, cfg.bank_n, mix64(cfg.seed, kSaltIdBank)});
    auto ood = make_synthetic_dataset(
        {cfg.ood_domain, cfg.img_h, cfg.img_w, cfg.bank_n, mix64(cfg.seed, kSaltOodBank)});
    c.id_imgs = stack_rows(id);
    c.ood_imgs = stack_rows(ood);
    const int t = c.plan.tau.back();
    c.id_bank = {invert_batch(c.id_imgs, c.model, c.sched, c.plan), to_string(cfg.id_domain), t};
    c.ood_bank = {invert_batch(c.ood_imgs, c.model, c.sched, c.plan), to_string(cfg.ood_domain), t};
    save_matrix(apath(cfg, "id_bank_images.ldt"), c.id_imgs);
    save_matrix(apath(cfg, "ood_bank_images.ldt"), c.ood_imgs);
    save_bank(apath(cfg, "id_bank.ldt"), c.id_bank);
    save_bank(apath(cfg, "ood_bank.ldt"), c.ood_bank);
    c.have_banks = true;
}

void stage_geometry(Ctx& c) {
    ensure_banks(c);
    const RunConfig& cfg = c.cfg;
    GeometryReport gid = geometry_report(c.id_bank, cfg.sampler.n_pairs, &c.ood_bank,
                                         mix64(cfg.seed, kSaltGeometry, 0));
    GeometryReport good = geometry_report(c.ood_bank, cfg.sampler.n_pairs, &c.id_bank,
                                          mix64(cfg.seed, kSaltGeometry, 1));
    save_report(apath(cfg, "geometry_id.json"), gid);
    save_report(apath(cfg, "geometry_ood.json"), good);
    c.report.geometry_id_path = "geometry_id.json";
    c.report.geometry_ood_path = "geometry_ood.json";
    c.report.center_distance = gid.center_distance.value_or(0.0);
    c.report.separation_thresh = separation_threshold(static_cast<double>(c.id_bank.d()));
}

void stage_separability(Ctx& c) {
    ensure_banks(c);
    const RunConfig& cfg = c.cfg;
    auto [lm, lacc] = fit_linear(c.id_bank, c.ood_bank, {0.7, mix64(cfg.seed, kSaltSplit)},
                                 cfg.clf_epochs, cfg.clf_lr, mix64(cfg.seed, kSaltClf));
    LatentBank pix_id{c.id_imgs, to_string(cfg.id_domain), 0};
    LatentBank pix_ood{c.ood_imgs, to_string(cfg.ood_domain), 0};
    auto [pm, pacc] = fit_linear(pix_id, pix_ood, {0.7, mix64(cfg.seed, kSaltPixSplit)},
                                 cfg.clf_epochs, cfg.clf_lr, mix64(cfg.seed, kSaltPixClf));
    c.latent_clf = std::move(lm);
    c.latent_acc = lacc;
    c.pixel_clf = std::move(pm);
    c.pixel_acc = pacc;
    save_linear(apath(cfg, "latent_clf.bin"), c.latent_clf);
    save_linear(apath(cfg, "pixel_clf.bin"), c.pixel_clf);
    write_text(apath(cfg, "classifier_summary.json"),
               json{{"latent_accuracy", lacc}, {"pixel_accuracy", pacc}}.dump(2) + "\n");
    c.have_clf = true;
    c.report.latent_accuracy = lacc;
    c.report.pixel_accuracy = pacc;
}

void stage_sample(Ctx& c) {
    ensure_model(c);
    ensure_banks(c);
    const RunConfig& cfg = c.cfg;
    RejectionConfig rc = cfg.sampler;
    rc.seed = mix64(cfg.seed, kSaltSample);
    if (rc.anti_interference) rc.id_center = c.id_bank.vectors.colwise().mean().transpose();
    c.gen = generate_ood(c.ood_bank, c.model, c.sched, c.plan, cfg.n_generate, rc);

    int accepted = 0;
    for (const SampleResult& r : c.gen.results) accepted += r.accepted ? 1 : 0;
    Eigen::MatrixXd lat(accepted, c.ood_bank.d());
    json samples = json::array();
    int row = 0;
    for (const SampleResult& r : c.gen.results) {
        if (r.accepted) lat.row(row++) = r.latent.transpose();
        samples.push_back(json{{"accepted", r.accepted},
                               {"attempts", r.attempts},
                               {"ref_index", r.ref_index},
                               {"lambda", r.lambda},
                               {"d_o", r.d_o},
                               {"filter_seed", r.filter_seed},
                               {"checks_passed", r.checks_passed},
                               {"reasons", r.rejection_reasons}});
    }
    json prov{{"seed", rc.seed},
              {"omega_d", rc.omega_d},
              {"omega_a", rc.omega_a},
              {"n_ref", rc.n_ref},
              {"n_pairs", rc.n_pairs},
              {"lambda_lo", rc.lambda_lo},
              {"lambda_hi", rc.lambda_hi},
              {"max_attempts", rc.max_attempts},
              {"anti_interference", rc.anti_interference},
              {"samples", samples}};
    write_text(apath(cfg, "provenance.json"), prov.dump(2) + "\n");
    save_matrix(apath(cfg, "gen_latents.ldt"), lat);
    save_matrix(apath(cfg, "gen_images.ldt"), c.gen.images);
    const int previews = std::min<int>(16, static_cast<int>(c.gen.images.rows()));
    for (int i = 0; i < previews; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "gen_%02d.pgm", i);
        write_pgm(apath(cfg, name), c.gen.images.row(i).transpose(), cfg.img_h, cfg.img_w);
    }
    c.have_gen = true;
}

void stage_baseline(Ctx& c) {
    ensure_model(c);
    ensure_banks(c);
    const RunConfig& cfg = c.cfg;
    // Pure-noise starts denoised stochastically along a full-length plan:
    // ancestral sampling, the model's unconditional output, which should
    // land in-domain almost always.
    StepPlan full = uniform_plan(cfg.T, cfg.steps, cfg.T);
    Rng noise(mix64(cfg.seed, kSaltBaseNoise));
    Eigen::MatrixXd xT(cfg.n_baseline, cfg.dim());
    for (int i = 0; i < cfg.n_baseline; ++i) xT.row(i) = noise.normal_vec(cfg.dim()).transpose();
    c.baseline_imgs =
        denoise_batch(xT, c.model, c.sched, full, 1.0, mix64(cfg.seed, kSaltBaseDenoise));
    save_matrix(apath(cfg, "baseline_images.ldt"), c.baseline_imgs);

    // Unfiltered Gaussian draws at the working step, denoised like the
    // filtered samples.
    GaussianEstimate est = estimate_gaussian(c.ood_bank);
    Eigen::MatrixXd vlat =
        stack_rows(sample_vanilla_gaussian(est, cfg.n_baseline, mix64(cfg.seed, kSaltVanilla)));
    c.vanilla_imgs =
        denoise_batch(vlat, c.model, c.sched, c.plan, 0.0, mix64(cfg.seed, kSaltVanDenoise));
    save_matrix(apath(cfg, "vanilla_images.ldt"), c.vanilla_imgs);
    c.have_baselines = true;
}

void ensure_baselines(Ctx& c) {
    if (c.have_baselines) return;
    c.baseline_imgs = load_matrix(apath(c.cfg, "baseline_images.ldt"));
    c.vanilla_imgs = load_matrix(apath(c.cfg, "vanilla_images.ldt"));
    c.have_baselines = true;
}

DomainRecon roundtrip_errors(Ctx& c, Domain dom, std::uint64_t data_salt) {
    const RunConfig& cfg = c.cfg;
    auto imgs = make_synthetic_dataset(
        {dom, cfg.img_h, cfg.img_w, cfg.n_roundtrip, mix64(cfg.seed, data_salt)});
    Eigen::MatrixXd x0 = stack_rows(imgs);
    Eigen::MatrixXd lat = invert_batch(x0, c.model, c.sched, c.plan);
    Eigen::MatrixXd det = denoise_batch(lat, c.model, c.sched, c.plan, 0.0, 0);
    Eigen::MatrixXd sto =
        denoise_batch(lat, c.model, c.sched, c.plan, 1.0, mix64(cfg.seed, kSaltEtaOne, data_salt));
    DomainRecon r;
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
        r.eta0 += mae(x0.row(i).transpose(), det.row(i).transpose());
        r.eta1 += mae(x0.row(i).transpose(), sto.row(i).transpose());
    }
    r.eta0 /= static_cast<double>(x0.rows());
    r.eta1 /= static_cast<double>(x0.rows());
    return r;
}

void stage_evaluate(Ctx& c) {
    ensure_model(c);
    ensure_banks(c);
    ensure_clf(c);
    ensure_generated(c);
    ensure_baselines(c);
    const RunConfig& cfg = c.cfg;
    EvalReport& r = c.report;

    r.reconstruction[to_string(cfg.id_domain)] = roundtrip_errors(c, cfg.id_domain, kSaltEvalId);
    r.reconstruction[to_string(cfg.ood_domain)] = roundtrip_errors(c, cfg.ood_domain, kSaltEvalOod);

    r.interference_baseline = interference_rate(split_rows(c.baseline_imgs), c.pixel_clf);
    r.interference_vanilla = interference_rate(split_rows(c.vanilla_imgs), c.pixel_clf);
    if (c.gen.images.rows() >= 1)
        r.interference_pipeline = interference_rate(split_rows(c.gen.images), c.pixel_clf);

    if (c.gen.images.rows() >= 2)
        r.diversity_pairwise = diversity_score(split_rows(c.gen.images)).first;
    double to_ref = 0.0;
    int n_ref = 0;
    int img_row = 0;
    for (const SampleResult& sr : c.gen.results) {
        if (!sr.accepted) continue;
        const Eigen::Index row = img_row++;
        if (sr.ref_index >= 0 && sr.ref_index < c.ood_imgs.rows()) {
            to_ref += mae(c.gen.images.row(row).transpose(),
                          c.ood_imgs.row(sr.ref_index).transpose());
            ++n_ref;
        }
    }
    if (n_ref > 0) r.diversity_to_reference = to_ref / n_ref;
    const int ceil_n = std::min<int>(64, static_cast<int>(c.ood_imgs.rows()));
    r.diversity_train_reference = diversity_score(split_rows(c.ood_imgs.topRows(ceil_n))).first;

    r.geometry_id_path = "geometry_id.json";
    r.geometry_ood_path = "geometry_ood.json";
    r.center_distance = center_distance(c.id_bank, c.ood_bank);
    r.separation_thresh = separation_threshold(static_cast<double>(c.id_bank.d()));
    r.latent_accuracy = c.latent_acc;
    r.pixel_accuracy = c.pixel_acc;

    r.samples_requested = static_cast<int>(c.gen.results.size());
    r.samples_accepted = static_cast<int>(c.gen.images.rows());
    long total_attempts = 0;
    r.rejection_reasons.clear();
    for (const SampleResult& sr : c.gen.results) {
        total_attempts += sr.attempts;
        for (const auto& [k, v] : sr.rejection_reasons) r.rejection_reasons[k] += v;
    }
    if (!c.gen.results.empty())
        r.mean_attempts = static_cast<double>(total_attempts) / c.gen.results.size();
    if (total_attempts > 0)
        r.rejection_rate =
            1.0 - static_cast<double>(r.samples_accepted) / static_cast<double>(total_attempts);
}

}  // namespace

int RunConfig::t_target() const {
    const int t = static_cast<int>(std::llround(t_frac * T));
    return std::clamp(t, 1, T);
}

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParamError(std::string("config parse: ") + e.what());
    }
    if (!j.is_object()) throw ParamError("config root must be a JSON object");
    RunConfig cfg;
    try {
        check_keys(j, "", {"out_dir", "seed", "schedule", "plan", "data", "model", "train",
                           "classifier", "sampler", "eval"});
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("schedule")) {
            const json& s = j["schedule"];
            check_keys(s, "schedule", {"kind", "T", "beta_min", "beta_max"});
            if (s.contains("kind"))
                cfg.schedule_kind = schedule_kind_from_string(s["kind"].get<std::string>());
            if (s.contains("T")) cfg.T = s["T"].get<int>();
            if (s.contains("beta_min")) cfg.beta_min = s["beta_min"].get<double>();
            if (s.contains("beta_max")) cfg.beta_max = s["beta_max"].get<double>();
        }
        if (j.contains("plan")) {
            const json& p = j["plan"];
            check_keys(p, "plan", {"steps", "t_frac"});
            if (p.contains("steps")) cfg.steps = p["steps"].get<int>();
            if (p.contains("t_frac")) cfg.t_frac = p["t_frac"].get<double>();
        }
        if (j.contains("data")) {
            const json& d = j["data"];
            check_keys(d, "data", {"h", "w", "n_train", "bank_n", "id", "ood"});
            if (d.contains("h")) cfg.img_h = d["h"].get<int>();
            if (d.contains("w")) cfg.img_w = d["w"].get<int>();
            if (d.contains("n_train")) cfg.n_train = d["n_train"].get<int>();
            if (d.contains("bank_n")) cfg.bank_n = d["bank_n"].get<int>();
            if (d.contains("id")) cfg.id_domain = domain_from_string(d["id"].get<std::string>());
            if (d.contains("ood")) cfg.ood_domain = domain_from_string(d["ood"].get<std::string>());
        }
        if (j.contains("model")) {
            const json& m = j["model"];
            check_keys(m, "model", {"hidden", "temb_dim", "path"});
            if (m.contains("hidden")) cfg.hidden = m["hidden"].get<int>();
            if (m.contains("temb_dim")) cfg.temb_dim = m["temb_dim"].get<int>();
            if (m.contains("path")) cfg.model_path = m["path"].get<std::string>();
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            check_keys(t, "train", {"epochs", "batch_size", "learning_rate"});
            if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
            if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<int>();
            if (t.contains("learning_rate"))
                cfg.train.learning_rate = t["learning_rate"].get<double>();
        }
        if (j.contains("classifier")) {
            const json& t = j["classifier"];
            check_keys(t, "classifier", {"epochs", "learning_rate"});
            if (t.contains("epochs")) cfg.clf_epochs = t["epochs"].get<int>();
            if (t.contains("learning_rate")) cfg.clf_lr = t["learning_rate"].get<double>();
        }
        if (j.contains("sampler")) {
            const json& s = j["sampler"];
            check_keys(s, "sampler",
                       {"omega_d", "omega_a", "n_ref", "n_pairs", "lambda_lo", "lambda_hi",
                        "max_attempts", "anti_interference"});
            if (s.contains("omega_d")) cfg.sampler.omega_d = s["omega_d"].get<double>();
            if (s.contains("omega_a")) cfg.sampler.omega_a = s["omega_a"].get<double>();
            if (s.contains("n_ref")) cfg.sampler.n_ref = s["n_ref"].get<int>();
            if (s.contains("n_pairs")) cfg.sampler.n_pairs = s["n_pairs"].get<int>();
            if (s.contains("lambda_lo")) cfg.sampler.lambda_lo = s["lambda_lo"].get<double>();
            if (s.contains("lambda_hi")) cfg.sampler.lambda_hi = s["lambda_hi"].get<double>();
            if (s.contains("max_attempts"))
                cfg.sampler.max_attempts = s["max_attempts"].get<int>();
            if (s.contains("anti_interference"))
                cfg.sampler.anti_interference = s["anti_interference"].get<bool>();
        }
        if (j.contains("eval")) {
            const json& e = j["eval"];
            check_keys(e, "eval", {"n_generate", "n_roundtrip", "n_baseline"});
            if (e.contains("n_generate")) cfg.n_generate = e["n_generate"].get<int>();
            if (e.contains("n_roundtrip")) cfg.n_roundtrip = e["n_roundtrip"].get<int>();
            if (e.contains("n_baseline")) cfg.n_baseline = e["n_baseline"].get<int>();
        }
    } catch (const json::exception& e) {
        throw ParamError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig config_from_json_file(const std::string& path) {
    return config_from_json(read_text(path));
}

std::string config_to_json(const RunConfig& cfg) {
    json j{{"out_dir", cfg.out_dir},
           {"seed", cfg.seed},
           {"schedule",
            {{"kind", to_string(cfg.schedule_kind)},
             {"T", cfg.T},
             {"beta_min", cfg.beta_min},
             {"beta_max", cfg.beta_max}}},
           {"plan", {{"steps", cfg.steps}, {"t_frac", cfg.t_frac}}},
           {"data",
            {{"h", cfg.img_h},
             {"w", cfg.img_w},
             {"n_train", cfg.n_train},
             {"bank_n", cfg.bank_n},
             {"id", to_string(cfg.id_domain)},
             {"ood", to_string(cfg.ood_domain)}}},
           {"model",
            {{"hidden", cfg.hidden}, {"temb_dim", cfg.temb_dim}, {"path", cfg.model_path}}},
           {"train",
            {{"epochs", cfg.train.epochs},
             {"batch_size", cfg.train.batch_size},
             {"learning_rate", cfg.train.learning_rate}}},
           {"classifier", {{"epochs", cfg.clf_epochs}, {"learning_rate", cfg.clf_lr}}},
           {"sampler",
            {{"omega_d", cfg.sampler.omega_d},
             {"omega_a", cfg.sampler.omega_a},
             {"n_ref", cfg.sampler.n_ref},
             {"n_pairs", cfg.sampler.n_pairs},
             {"lambda_lo", cfg.sampler.lambda_lo},
             {"lambda_hi", cfg.sampler.lambda_hi},
             {"max_attempts", cfg.sampler.max_attempts},
             {"anti_interference", cfg.sampler.anti_interference}}},
           {"eval",
            {{"n_generate", cfg.n_generate},
             {"n_roundtrip", cfg.n_roundtrip},
             {"n_baseline", cfg.n_baseline}}}};
    return j.dump(2) + "\n";
}

std::string report_to_json(const EvalReport& r) {
    json recon = json::object();
    for (const auto& [domain, e] : r.reconstruction)
        recon[domain] = {{"eta0", e.eta0}, {"eta1", e.eta1}};
    json j{{"reconstruction", recon},
           {"interference",
            {{"baseline", r.interference_baseline},
             {"vanilla", r.interference_vanilla},
             {"pipeline", r.interference_pipeline}}},
           {"diversity",
            {{"pairwise", r.diversity_pairwise},
             {"to_reference",
              r.diversity_to_reference ? json(*r.diversity_to_reference) : json(nullptr)},
             {"train_reference", r.diversity_train_reference}}},
           {"geometry",
            {{"id_report", r.geometry_id_path},
             {"ood_report", r.geometry_ood_path},
             {"center_distance", r.center_distance},
             {"separation_threshold", r.separation_thresh}}},
           {"classifiers",
            {{"latent_accuracy", r.latent_accuracy}, {"pixel_accuracy", r.pixel_accuracy}}},
           {"sampling",
            {{"requested", r.samples_requested},
             {"accepted", r.samples_accepted},
             {"mean_attempts", r.mean_attempts},
             {"rejection_rate", r.rejection_rate},
             {"reasons", r.rejection_reasons}}},
           {"timings", r.timings}};
    return j.dump(2) + "\n";
}

void save_eval_report(const std::string& path, const EvalReport& r) {
    write_text(path, report_to_json(r));
}

void pipeline_train(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    run_stage("train", c.report.timings, [&] { stage_train(c); });
}

void pipeline_invert(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    run_stage("invert", c.report.timings, [&] { stage_invert(c); });
}

void pipeline_geometry(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    run_stage("geometry", c.report.timings, [&] { stage_geometry(c); });
}

void pipeline_separability(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    run_stage("separability", c.report.timings, [&] { stage_separability(c); });
}

void pipeline_sample(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    run_stage("sample", c.report.timings, [&] { stage_sample(c); });
}

EvalReport pipeline_evaluate(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    run_stage("baseline", c.report.timings, [&] { stage_baseline(c); });
    run_stage("evaluate", c.report.timings, [&] { stage_evaluate(c); });
    save_eval_report(apath(cfg, "report.json"), c.report);
    return c.report;
}

EvalReport run_pipeline(const RunConfig& cfg) {
    Ctx c = make_ctx(cfg);
    write_text(apath(cfg, "config.json"), config_to_json(cfg));
    run_stage("train", c.report.timings, [&] { stage_train(c); });
    run_stage("invert", c.report.timings, [&] { stage_invert(c); });
    run_stage("geometry", c.report.timings, [&] { stage_geometry(c); });
    run_stage("separability", c.report.timings, [&] { stage_separability(c); });
    run_stage("sample", c.report.timings, [&] { stage_sample(c); });
    run_stage("baseline", c.report.timings, [&] { stage_baseline(c); });
    run_stage("evaluate", c.report.timings, [&] { stage_evaluate(c); });
    save_eval_report(apath(cfg, "report.json"), c.report);
    return c.report;
}

}  // namespace ldx

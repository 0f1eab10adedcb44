#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include <Eigen/SVD>

#include "ldx/dataset.hpp"
#include "ldx/errors.hpp"
#include "ldx/metrics.hpp"
#include "ldx/pipeline.hpp"

using namespace ldx;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RunConfig mini_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.out_dir = out_dir;
    cfg.seed = 12;
    cfg.T = 50;
    cfg.beta_min = 1e-3;
    cfg.beta_max = 0.1;
    cfg.steps = 10;
    cfg.t_frac = 0.8;
    cfg.img_h = 8;
    cfg.img_w = 8;
    cfg.n_train = 64;
    cfg.bank_n = 24;
    cfg.hidden = 8;
    cfg.temb_dim = 8;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 16;
    cfg.clf_epochs = 40;
    cfg.sampler.n_pairs = 150;
    cfg.sampler.n_ref = 5;
    cfg.sampler.omega_a = 20.0;
    cfg.sampler.omega_d = 0.5;
    cfg.sampler.max_attempts = 300;
    cfg.n_generate = 4;
    cfg.n_roundtrip = 4;
    cfg.n_baseline = 4;
    return cfg;
}

}  // namespace

TEST_CASE("every image family stays in range and is seed-deterministic") {
    for (Domain dom : {Domain::disks, Domain::stripes, Domain::crosses, Domain::checker}) {
        auto a = make_synthetic_dataset({dom, 16, 16, 12, 5});
        auto b = make_synthetic_dataset({dom, 16, 16, 12, 5});
        auto c = make_synthetic_dataset({dom, 16, 16, 12, 6});
        REQUIRE(a.size() == 12);
        CHECK((a[0] - b[0]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a[0] - c[0]).cwiseAbs().maxCoeff() > 0.0);
        for (const auto& img : a) {
            REQUIRE(img.size() == 256);
            CHECK(img.minCoeff() >= -1.0);
            CHECK(img.maxCoeff() <= 1.0);
            CHECK(img.maxCoeff() > 0.0);   // some bright structure
            CHECK(img.minCoeff() < 0.0);   // on a dark background
        }
        CHECK(to_string(dom) == to_string(domain_from_string(to_string(dom))));
    }
    CHECK_THROWS_AS(make_synthetic_dataset({Domain::disks, 4, 16, 1, 0}), ParamError);
    CHECK_THROWS_AS(make_synthetic_dataset({Domain::disks, 16, 16, 0, 0}), ParamError);
    CHECK_THROWS_AS(domain_from_string("squares"), ParamError);
}

TEST_CASE("stripes are constant along one axis") {
    auto imgs = make_synthetic_dataset({Domain::stripes, 16, 16, 20, 77});
    for (const auto& img : imgs) {
        Eigen::Map<const Eigen::Matrix<double, 16, 16, Eigen::RowMajor>> m(img.data());
        bool rows_const = true, cols_const = true;
        for (int i = 0; i < 16 && rows_const; ++i)
            rows_const = (m.row(i).maxCoeff() - m.row(i).minCoeff()) < 1e-12;
        for (int j = 0; j < 16 && cols_const; ++j)
            cols_const = (m.col(j).maxCoeff() - m.col(j).minCoeff()) < 1e-12;
        CHECK((rows_const || cols_const));
    }
}

TEST_CASE("checkerboards factor into axis profiles") {
    auto imgs = make_synthetic_dataset({Domain::checker, 16, 16, 10, 3});
    for (const auto& img : imgs) {
        Eigen::Map<const Eigen::Matrix<double, 16, 16, Eigen::RowMajor>> m(img.data());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        CHECK(svd.singularValues()[1] < 1e-9 * std::max(1.0, svd.singularValues()[0]));
    }
}

TEST_CASE("error metrics match hand-computed values") {
    Eigen::VectorXd a(2), b(2);
    a << 1, 1;
    b << -1, 0;
    CHECK(mae(a, b) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(mae(a, a) == 0.0);
    Eigen::VectorXd wrong(3);
    CHECK_THROWS_AS(mae(a, wrong), ShapeError);

    LinearModel clf;
    clf.w = Eigen::VectorXd::Zero(2);
    clf.w[0] = 1.0;
    Eigen::VectorXd plus(2), minus(2);
    plus << 2, 0;
    minus << -2, 0;
    CHECK(interference_rate({plus, minus}, clf) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(interference_rate({}, clf), DataError);

    Eigen::VectorXd p(2), q(2), r(2);
    p << 0, 0;
    q << 2, 2;
    r << 0, 0;
    auto [pairwise, to_ref] = diversity_score({p, q, r}, &p);
    CHECK(pairwise == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(to_ref.has_value());
    CHECK(*to_ref == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(diversity_score({p}), DataError);
}

TEST_CASE("run configuration json roundtrips and rejects unknown keys") {
    RunConfig cfg = mini_config("x");
    RunConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.out_dir == cfg.out_dir);
    CHECK(back.seed == cfg.seed);
    CHECK(back.T == cfg.T);
    CHECK(back.steps == cfg.steps);
    CHECK(back.t_frac == cfg.t_frac);
    CHECK(back.img_h == cfg.img_h);
    CHECK(back.n_train == cfg.n_train);
    CHECK(back.bank_n == cfg.bank_n);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.train.epochs == cfg.train.epochs);
    CHECK(back.clf_epochs == cfg.clf_epochs);
    CHECK(back.sampler.omega_a == cfg.sampler.omega_a);
    CHECK(back.sampler.max_attempts == cfg.sampler.max_attempts);
    CHECK(back.n_generate == cfg.n_generate);

    CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), ParamError);
    CHECK_THROWS_AS(config_from_json(R"({"sampler": {"bogus": 1}})"), ParamError);
    CHECK_THROWS_AS(config_from_json(R"({"seed": "many"})"), ParamError);
    CHECK_THROWS_AS(config_from_json("not json at all"), ParamError);
    CHECK_THROWS_AS(config_from_json(R"({"data": {"id": "squares"}})"), ParamError);

    CHECK(config_from_json("{}").T == RunConfig{}.T);  // all keys optional
}

TEST_CASE("the target step clamps into the schedule range") {
    RunConfig cfg;
    cfg.T = 200;
    cfg.t_frac = 0.8;
    CHECK(cfg.t_target() == 160);
    cfg.t_frac = 0.0001;
    CHECK(cfg.t_target() == 1);
    cfg.t_frac = 1.0;
    CHECK(cfg.t_target() == 200);
}

TEST_CASE("a miniature end-to-end run writes every artifact coherently") {
    const std::string dir = (fs::temp_directory_path() / "ldx_mini_run").string();
    fs::remove_all(dir);
    RunConfig cfg = mini_config(dir);
    EvalReport rep = run_pipeline(cfg);

    for (const char* name :
         {"config.json", "schedule.json", "model.dnz1", "loss_history.json", "id_bank.ldt",
          "ood_bank.ldt", "id_bank_images.ldt", "ood_bank_images.ldt", "geometry_id.json",
          "geometry_ood.json", "latent_clf.bin", "pixel_clf.bin", "classifier_summary.json",
          "gen_latents.ldt", "gen_images.ldt", "provenance.json", "baseline_images.ldt",
          "vanilla_images.ldt", "report.json"}) {
        CHECK_MESSAGE(fs::exists(fs::path(dir) / name), name);
    }

    CHECK(rep.samples_requested == 4);
    CHECK(rep.samples_accepted >= 0);
    CHECK(rep.samples_accepted <= 4);
    CHECK(rep.interference_baseline >= 0.0);
    CHECK(rep.interference_baseline <= 1.0);
    CHECK(rep.interference_pipeline >= 0.0);
    CHECK(rep.interference_pipeline <= 1.0);
    CHECK(rep.reconstruction.count("disks") == 1);
    CHECK(rep.reconstruction.count("stripes") == 1);
    CHECK(rep.reconstruction.at("stripes").eta0 >= 0.0);
    CHECK(rep.center_distance > 0.0);
    CHECK(rep.separation_thresh == doctest::Approx(std::pow(64.0, 0.25)).epsilon(1e-12));
    CHECK(rep.latent_accuracy >= 0.0);
    CHECK(rep.latent_accuracy <= 1.0);
    CHECK(rep.timings.count("train") == 1);
    CHECK(rep.timings.count("evaluate") == 1);

    json parsed = json::parse(file_bytes((fs::path(dir) / "report.json").string()));
    CHECK(parsed.contains("reconstruction"));
    CHECK(parsed.contains("interference"));
    CHECK(parsed.contains("timings"));

    // standalone evaluate re-reads every artifact it needs from disk
    EvalReport rep2 = pipeline_evaluate(cfg);
    CHECK(rep2.interference_baseline == rep.interference_baseline);
    CHECK(rep2.reconstruction.at("stripes").eta0 ==
          doctest::Approx(rep.reconstruction.at("stripes").eta0).epsilon(1e-9));
}

TEST_CASE("identical configs reproduce identical artifacts") {
    const std::string dir_a = (fs::temp_directory_path() / "ldx_det_a").string();
    const std::string dir_b = (fs::temp_directory_path() / "ldx_det_b").string();
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    RunConfig ca = mini_config(dir_a);
    RunConfig cb = mini_config(dir_b);
    run_pipeline(ca);
    run_pipeline(cb);

    for (const char* name : {"model.dnz1", "id_bank.ldt", "ood_bank.ldt", "gen_images.ldt",
                             "gen_latents.ldt", "provenance.json", "geometry_id.json",
                             "geometry_ood.json", "latent_clf.bin", "pixel_clf.bin",
                             "baseline_images.ldt", "vanilla_images.ldt", "schedule.json"}) {
        CHECK_MESSAGE(file_bytes((fs::path(dir_a) / name).string()) ==
                          file_bytes((fs::path(dir_b) / name).string()),
                      name);
    }
    json ra = json::parse(file_bytes((fs::path(dir_a) / "report.json").string()));
    json rb = json::parse(file_bytes((fs::path(dir_b) / "report.json").string()));
    ra.erase("timings");
    rb.erase("timings");
    CHECK(ra.dump() == rb.dump());

    // the out_dir itself is config, so config.json may differ; everything else
    // in the directory must match file for file
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        const std::string name = entry.path().filename().string();
        if (name == "config.json" || name == "report.json") continue;
        CHECK_MESSAGE(file_bytes(entry.path().string()) ==
                          file_bytes((fs::path(dir_b) / name).string()),
                      name);
        ++compared;
    }
    CHECK(compared >= 13);
}

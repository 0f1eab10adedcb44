#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ldx/dataset.hpp"
#include "ldx/denoiser.hpp"
#include "ldx/errors.hpp"
#include "ldx/rng.hpp"

using namespace ldx;
namespace fs = std::filesystem;

namespace {

Arch tiny_arch() { return {8, 8, 1, 6, 8}; }

// Fill every tensor (including the zero output layer) with seeded noise so
// forward passes exercise all paths.
DenoiserParams noisy_params(const Arch& a, std::uint64_t seed) {
    DenoiserParams p = init_denoiser(a, seed);
    Rng rng(mix64(seed, 77));
    for (auto& w : p.conv_w)
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 * rng.normal();
    for (auto& b : p.conv_b)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * rng.normal();
    for (auto& w : p.temb_w)
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 * rng.normal();
    for (auto& b : p.temb_b)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * rng.normal();
    return p;
}

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("architecture validation rejects unusable sizes") {
    CHECK_THROWS_AS(init_denoiser({2, 8, 1, 4, 8}, 0), ParamError);
    CHECK_THROWS_AS(init_denoiser({8, 8, 1, 4, 7}, 0), ParamError);
    CHECK_THROWS_AS(init_denoiser({8, 8, 1, 0, 8}, 0), ParamError);
}

TEST_CASE("fresh models predict exactly zero noise") {
    DenoiserParams p = init_denoiser(tiny_arch(), 4);
    Rng rng(9);
    Eigen::VectorXd x = rng.normal_vec(64);
    Eigen::VectorXd e = predict_eps(p, x, 3);
    CHECK(e.size() == 64);
    CHECK(e.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initialization is seed-deterministic") {
    DenoiserParams a = init_denoiser(tiny_arch(), 5);
    DenoiserParams b = init_denoiser(tiny_arch(), 5);
    DenoiserParams c = init_denoiser(tiny_arch(), 6);
    CHECK((a.conv_w[0] - b.conv_w[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.conv_w[0] - c.conv_w[0]).cwiseAbs().maxCoeff() > 0.0);
    CHECK(a.param_count() == b.param_count());
}

TEST_CASE("single and batched prediction agree") {
    DenoiserParams p = noisy_params(tiny_arch(), 12);
    Rng rng(3);
    Eigen::MatrixXd xs(5, 64);
    std::vector<int> ts{1, 4, 9, 20, 50};
    for (int i = 0; i < 5; ++i) xs.row(i) = rng.normal_vec(64).transpose();
    Eigen::MatrixXd batch = predict_eps_batch(p, xs, ts);
    REQUIRE(batch.rows() == 5);
    for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd one = predict_eps(p, xs.row(i).transpose(), ts[i]);
        CHECK((batch.row(i).transpose() - one).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("prediction validates its inputs") {
    DenoiserParams p = noisy_params(tiny_arch(), 1);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(63);
    CHECK_THROWS_AS(predict_eps(p, x, 1), ShapeError);
    Eigen::VectorXd ok = Eigen::VectorXd::Zero(64);
    CHECK_THROWS_AS(predict_eps(p, ok, 0), IndexError);
    Eigen::VectorXd bad = ok;
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(predict_eps(p, bad, 1), NumericError);
}

TEST_CASE("time step changes the prediction") {
    DenoiserParams p = noisy_params(tiny_arch(), 8);
    Rng rng(2);
    Eigen::VectorXd x = rng.normal_vec(64);
    Eigen::VectorXd e1 = predict_eps(p, x, 1);
    Eigen::VectorXd e2 = predict_eps(p, x, 40);
    CHECK((e1 - e2).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("analytic gradients match finite differences") {
    Arch a = tiny_arch();
    DenoiserParams p = noisy_params(a, 21);
    Rng rng(33);
    const int batch = 2, d = a.h * a.w;
    Eigen::MatrixXd x(batch, d), target(batch, d);
    for (int i = 0; i < batch; ++i) {
        x.row(i) = rng.normal_vec(d).transpose();
        target.row(i) = rng.normal_vec(d).transpose();
    }
    std::vector<int> ts{3, 17};

    auto [loss0, grads] = loss_and_grads(p, x, ts, target);
    CHECK(std::isfinite(loss0));

    auto probe = [&](double* param, const double* grad) {
        const double h = 1e-5;
        const double orig = *param;
        *param = orig + h;
        double up = loss_and_grads(p, x, ts, target).first;
        *param = orig - h;
        double down = loss_and_grads(p, x, ts, target).first;
        *param = orig;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(*grad), 1e-8});
        return std::abs(fd - *grad) / denom;
    };

    int checked = 0, good = 0;
    Rng pick(55);
    for (int trial = 0; trial < 120; ++trial) {
        const int layer = static_cast<int>(pick.uniform_int(4));
        const int kind = static_cast<int>(pick.uniform_int(layer < 3 ? 4 : 2));
        double* base = nullptr;
        const double* gbase = nullptr;
        Eigen::Index count = 0;
        switch (kind) {
            case 0:
                base = p.conv_w[layer].data();
                gbase = grads.conv_w[layer].data();
                count = p.conv_w[layer].size();
                break;
            case 1:
                base = p.conv_b[layer].data();
                gbase = grads.conv_b[layer].data();
                count = p.conv_b[layer].size();
                break;
            case 2:
                base = p.temb_w[layer].data();
                gbase = grads.temb_w[layer].data();
                count = p.temb_w[layer].size();
                break;
            default:
                base = p.temb_b[layer].data();
                gbase = grads.temb_b[layer].data();
                count = p.temb_b[layer].size();
                break;
        }
        const Eigen::Index k = pick.uniform_int(count);
        const double rel = probe(base + k, gbase + k);
        ++checked;
        if (rel < 1e-3) ++good;
    }
    CHECK(checked == 120);
    CHECK(good >= checked - 1);  // allow one vanishing-gradient coincidence
}

TEST_CASE("training reduces the noise-matching loss") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear, 50, 1e-3, 0.1);
    auto data = make_synthetic_dataset({Domain::disks, 8, 8, 48, 10});
    DenoiserParams p0 = init_denoiser(tiny_arch(), 3);
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 16;
    tc.learning_rate = 2e-3;
    tc.seed = 5;
    auto [p, hist] = train_denoiser(p0, data, s, tc);
    REQUIRE(hist.size() == 4);
    CHECK(hist[0] == doctest::Approx(1.0).epsilon(0.15));  // zero-output start
    CHECK(hist.back() < hist.front());
    for (double v : hist) CHECK(std::isfinite(v));

    auto [p2, hist2] = train_denoiser(p0, data, s, tc);
    CHECK(hist2 == hist);
    CHECK((p.conv_w[1] - p2.conv_w[1]).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(train_denoiser(p0, {}, s, tc), DataError);
    TrainConfig bad = tc;
    bad.epochs = 0;
    CHECK_THROWS_AS(train_denoiser(p0, data, s, bad), ParamError);
}

TEST_CASE("checkpoints roundtrip through the container format") {
    DenoiserParams p = noisy_params(tiny_arch(), 40);
    auto p1 = tmp_path("ldx_net1.dnz1"), p2 = tmp_path("ldx_net2.dnz1");
    save_denoiser(p1, p);
    DenoiserParams back = load_denoiser(p1);
    CHECK(back.arch.h == p.arch.h);
    CHECK(back.arch.hidden == p.arch.hidden);
    REQUIRE(back.conv_w.size() == p.conv_w.size());
    for (std::size_t l = 0; l < p.conv_w.size(); ++l)
        for (Eigen::Index i = 0; i < p.conv_w[l].size(); ++i)
            CHECK(back.conv_w[l].data()[i] ==
                  static_cast<double>(static_cast<float>(p.conv_w[l].data()[i])));
    save_denoiser(p2, back);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    {
        std::ofstream f(p1, std::ios::binary | std::ios::trunc);
        f << "XXXX";
    }
    CHECK_THROWS_AS(load_denoiser(p1), FormatError);
}

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ldx/schedule.hpp"

namespace ldx {

// Small convolutional noise predictor over single-channel images:
// three 3x3 conv blocks (each adding a learned projection of a sinusoidal
// step embedding, then SiLU) followed by a zero-initialized 3x3 output
// projection back to one channel. No pooling; resolution is preserved.
struct Arch {
    int h = 16, w = 16;
    int in_ch = 1;
    int hidden = 32;    // channel width of the three blocks
    int temb_dim = 32;  // sinusoidal embedding size, must be even
};

struct DenoiserParams {
    Arch arch;
    // Per layer: weights (C_out x C_in*9) over flattened 3x3 patches, bias
    // (C_out). The three hidden layers also own a (hidden x temb_dim)
    // embedding projection with bias.
    std::vector<Eigen::MatrixXd> conv_w;
    std::vector<Eigen::VectorXd> conv_b;
    std::vector<Eigen::MatrixXd> temb_w;
    std::vector<Eigen::VectorXd> temb_b;

    std::size_t param_count() const;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    enum class Loss { eps_mse } loss_kind = Loss::eps_mse;
};

DenoiserParams init_denoiser(const Arch& arch, std::uint64_t seed);

// Predicted noise for one image at step t; pure in all arguments.
Eigen::VectorXd predict_eps(const DenoiserParams& p, const Eigen::VectorXd& x_t, int t);

// Batched variant: one image per row, one step per entry of ts.
Eigen::MatrixXd predict_eps_batch(const DenoiserParams& p, const Eigen::MatrixXd& x_t,
                                  const std::vector<int>& ts);

// Mean squared error between predictions and targets, averaged over every
// scalar (batch x dims), plus its gradient w.r.t. all parameters. Exposed so
// the optimizer and finite-difference checks share one definition.
std::pair<double, DenoiserParams> loss_and_grads(const DenoiserParams& p,
                                                 const Eigen::MatrixXd& x_t,
                                                 const std::vector<int>& ts,
                                                 const Eigen::MatrixXd& target_eps);

// Noise-matching training: each drawn example pairs a clean image with a
// fresh noise draw at a uniform step. Returns final parameters and the mean
// loss per epoch. Deterministic given cfg.seed.
std::pair<DenoiserParams, std::vector<double>> train_denoiser(
    const DenoiserParams& p, const std::vector<Eigen::VectorXd>& dataset,
    const NoiseSchedule& s, const TrainConfig& cfg);

// Checkpoint: magic "DNZ1" | u32 JSON descriptor length | descriptor |
// f32 weights in layer order.
void save_denoiser(const std::string& path, const DenoiserParams& p);
DenoiserParams load_denoiser(const std::string& path);

}  // namespace ldx

#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "ldx/geometry.hpp"

namespace ldx {

struct LinearModel {
    Eigen::VectorXd w;
    double b = 0.0;
    int epochs = 0;
    double final_loss = 0.0;
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

// Maximum-margin linear separator trained by seeded stochastic subgradient
// descent on the hinge loss with L2 regularization. Rows of bankA get label
// +1, rows of bankB get -1. Returns the model and held-out accuracy on the
// remaining (1 - train_fraction) of each bank.
std::pair<LinearModel, double> fit_linear(const LatentBank& bankA, const LatentBank& bankB,
                                          const SplitSpec& split, int epochs, double lr,
                                          std::uint64_t seed);

// (label in {+1, -1}, signed distance to the separating hyperplane).
std::pair<int, double> classify(const LinearModel& m, const Eigen::VectorXd& x);

// File layout: u32 JSON header length | JSON {b, d, epochs} | d x f32 weights.
void save_linear(const std::string& path, const LinearModel& m);
LinearModel load_linear(const std::string& path);

}  // namespace ldx

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ldx/separability.hpp"

namespace ldx {

// Mean absolute difference on [0,1]-rescaled pixels (inputs live in [-1,1]).
double mae(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Fraction of images the pixel-space classifier assigns to the in-domain
// class. The classifier must have been fit with in-domain rows as the +1
// class.
double interference_rate(const std::vector<Eigen::VectorXd>& images, const LinearModel& clf);

// (mean pairwise mae among the images, mean mae to the reference if given).
std::pair<double, std::optional<double>> diversity_score(
    const std::vector<Eigen::VectorXd>& images,
    const Eigen::VectorXd* reference = nullptr);

}  // namespace ldx

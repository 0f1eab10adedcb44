#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "ldx/errors.hpp"

namespace ldx {

// A labeled set of latent vectors, all taken at one diffusion step.
struct LatentBank {
    Eigen::MatrixXd vectors;  // N x d, one latent per row
    std::string domain_label;
    int t = 0;

    int n() const { return static_cast<int>(vectors.rows()); }
    int d() const { return static_cast<int>(vectors.cols()); }
};

void save_bank(const std::string& path, const LatentBank& bank);
LatentBank load_bank(const std::string& path, const std::string& label, int t);

struct SummaryStat {
    double mean = 0.0;
    double std = 0.0;
    int count = 0;
};

// Sampled-pair summary of a bank's shape: angles in degrees.
struct GeometryReport {
    SummaryStat pair_angle;     // angle at a third point between two others
    SummaryStat origin_angle;   // angle between two latents seen from 0
    SummaryStat pair_distance;
    std::optional<double> center_distance;
    int n_pairs = 0;
    int d = 0;
};

std::string report_to_json(const GeometryReport& r);
void save_report(const std::string& path, const GeometryReport& r);

// Angle (degrees) at vertex c between the edges to a and b.
double pair_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c);

// Angle (degrees) between a and b at the origin.
double origin_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

double pair_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Distance between the two bank means.
double center_distance(const LatentBank& a, const LatentBank& b);

// Minimum center separation at which two unit-variance modes stay
// statistically distinguishable: d^(1/4).
double separation_threshold(double d);

// Fraction of bank vectors whose radius (after centering on the bank mean
// and dividing by sigma) falls in [sqrt(d-1) - c, sqrt(d-1) + c].
double annulus_fraction(const LatentBank& bank, double c, double sigma);

// Sampled statistics over n_pairs random pairs/triples (exhaustive when the
// bank is small enough), deterministic given seed. center_distance is filled
// iff a reference bank is supplied.
GeometryReport geometry_report(const LatentBank& bank, int n_pairs,
                               const LatentBank* ref_bank, std::uint64_t seed);

}  // namespace ldx

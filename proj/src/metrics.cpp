#include "ldx/metrics.hpp"

#include "ldx/errors.hpp"

namespace ldx {

double mae(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw ShapeError("mae: size mismatch");
    return (a - b).cwiseAbs().mean() * 0.5;
}

double interference_rate(const std::vector<Eigen::VectorXd>& images, const LinearModel& clf) {
    if (images.empty()) throw DataError("interference_rate: no images");
    int in_domain = 0;
    for (const auto& img : images) {
        auto [label, margin] = classify(clf, img);
        (void)margin;
        if (label == +1) ++in_domain;
    }
    return double(in_domain) / double(images.size());
}

std::pair<double, std::optional<double>> diversity_score(
    const std::vector<Eigen::VectorXd>& images, const Eigen::VectorXd* reference) {
    if (images.size() < 2) throw DataError("diversity_score: need at least 2 images");
    double sum = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        for (std::size_t j = i + 1; j < images.size(); ++j) {
            sum += mae(images[i], images[j]);
            ++pairs;
        }
    std::optional<double> to_ref;
    if (reference) {
        double r = 0.0;
        for (const auto& img : images) r += mae(img, *reference);
        to_ref = r / double(images.size());
    }
    return {sum / double(pairs), to_ref};
}

}  // namespace ldx

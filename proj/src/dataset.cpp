#include "ldx/dataset.hpp"

#include <cmath>

#include "ldx/rng.hpp"

namespace ldx {

namespace {

// Length of {x in [a, b) : ((x - phase) mod period) < high} -- the bright
// share of a 1D square wave over an interval. Used for exact pixel coverage.
double bright_overlap(double a, double b, double period, double high, double phase) {
    auto cum = [&](double x) {
        double u = (x - phase) / period;
        double f = u - std::floor(u);
        return (std::floor(u) * high + std::min(f * period, high));
    };
    return cum(b) - cum(a);
}

Eigen::VectorXd make_disk(int h, int w, Rng& rng) {
    double r = rng.uniform(2.5, 5.5);
    double cx = rng.uniform(r, w - r);
    double cy = rng.uniform(r, h - r);
    Eigen::VectorXd img(h * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double dist = std::hypot(j + 0.5 - cx, i + 0.5 - cy);
            double cov = std::clamp(r - dist + 0.5, 0.0, 1.0);
            img[i * w + j] = 2.0 * cov - 1.0;
        }
    return img;
}

Eigen::VectorXd make_stripes(int h, int w, Rng& rng) {
    static const int periods[] = {4, 6, 8};
    double period = periods[rng.uniform_int(3)];
    bool horizontal = rng.uniform_int(2) == 0;  // bars run horizontally (vary over rows)
    double phase = rng.uniform(0.0, period);
    Eigen::VectorXd img(h * w);
    const int n = horizontal ? h : w;
    Eigen::VectorXd line(n);
    for (int k = 0; k < n; ++k)
        line[k] = std::clamp(2.0 * bright_overlap(k, k + 1, period, period / 2.0, phase) - 1.0,
                             -1.0, 1.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) img[i * w + j] = horizontal ? line[i] : line[j];
    return img;
}

Eigen::VectorXd make_cross(int h, int w, Rng& rng) {
    double bar = 2.0 + rng.uniform_int(2);  // bar width 2 or 3
    double cx = rng.uniform(3.0, w - 3.0);
    double cy = rng.uniform(3.0, h - 3.0);
    auto cov1d = [bar](double k, double c) {
        double lo = c - bar / 2.0, hi = c + bar / 2.0;
        return std::clamp(std::min(hi, k + 1.0) - std::max(lo, k), 0.0, 1.0);
    };
    Eigen::VectorXd img(h * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double a = cov1d(i, cy);  // horizontal bar: row coverage
            double b = cov1d(j, cx);  // vertical bar: column coverage
            double cov = std::clamp(a + b - a * b, 0.0, 1.0);
            img[i * w + j] = 2.0 * cov - 1.0;
        }
    return img;
}

Eigen::VectorXd make_checker(int h, int w, Rng& rng) {
    static const int cells[] = {4, 8};
    double cell = cells[rng.uniform_int(2)];
    double ox = rng.uniform(0.0, 2.0 * cell);
    double oy = rng.uniform(0.0, 2.0 * cell);
    // The pattern is a product of two square waves, so the pixel mean
    // factors into per-axis means.
    auto axis_mean = [cell](double k, double off) {
        return 2.0 * bright_overlap(k, k + 1, 2.0 * cell, cell, off) - 1.0;
    };
    Eigen::VectorXd img(h * w);
    Eigen::VectorXd mx(w), my(h);
    for (int j = 0; j < w; ++j) mx[j] = axis_mean(j, ox);
    for (int i = 0; i < h; ++i) my[i] = axis_mean(i, oy);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) img[i * w + j] = my[i] * mx[j];
    return img;
}

}  // namespace

std::string to_string(Domain d) {
    switch (d) {
        case Domain::disks: return "disks";
        case Domain::stripes: return "stripes";
        case Domain::crosses: return "crosses";
        case Domain::checker: return "checker";
    }
    throw ParamError("unknown domain enum value");
}

Domain domain_from_string(const std::string& s) {
    if (s == "disks") return Domain::disks;
    if (s == "stripes") return Domain::stripes;
    if (s == "crosses") return Domain::crosses;
    if (s == "checker") return Domain::checker;
    throw ParamError("unknown domain: " + s);
}

std::vector<Eigen::VectorXd> make_synthetic_dataset(const DatasetSpec& spec) {
    if (spec.count < 1) throw ParamError("dataset: count must be >= 1");
    if (spec.h < 8 || spec.w < 8) throw ParamError("dataset: images must be at least 8x8");
    Rng rng(mix64(spec.seed, static_cast<std::uint64_t>(spec.domain) + 211));
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        switch (spec.domain) {
            case Domain::disks: out.push_back(make_disk(spec.h, spec.w, rng)); break;
            case Domain::stripes: out.push_back(make_stripes(spec.h, spec.w, rng)); break;
            case Domain::crosses: out.push_back(make_cross(spec.h, spec.w, rng)); break;
            case Domain::checker: out.push_back(make_checker(spec.h, spec.w, rng)); break;
        }
    }
    return out;
}

}  // namespace ldx

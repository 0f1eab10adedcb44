#include "ldx/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "ldx/rng.hpp"
#include "ldx/tensor_io.hpp"

namespace ldx {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

double angle_deg(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw DataError("angle undefined for zero-length edge");
    double c = u.dot(v) / (nu * nv);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c) * kRadToDeg;
}

SummaryStat summarize(const std::vector<double>& xs) {
    SummaryStat s;
    s.count = static_cast<int>(xs.size());
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / xs.size();
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / xs.size());
    return s;
}

}  // namespace

void save_bank(const std::string& path, const LatentBank& bank) {
    save_matrix(path, bank.vectors);
}

LatentBank load_bank(const std::string& path, const std::string& label, int t) {
    LatentBank b;
    b.vectors = load_matrix(path);
    b.domain_label = label;
    b.t = t;
    return b;
}

double pair_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c) {
    if (a.size() != c.size() || b.size() != c.size())
        throw ShapeError("pair_angle: dimension mismatch");
    return angle_deg(a - c, b - c);
}

double origin_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw ShapeError("origin_angle: dimension mismatch");
    return angle_deg(a, b);
}

double pair_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw ShapeError("pair_distance: dimension mismatch");
    return (a - b).norm();
}

double center_distance(const LatentBank& a, const LatentBank& b) {
    if (a.d() != b.d()) throw ShapeError("center_distance: dimension mismatch");
    Eigen::VectorXd ma = a.vectors.colwise().mean();
    Eigen::VectorXd mb = b.vectors.colwise().mean();
    return (ma - mb).norm();
}

double separation_threshold(double d) { return std::pow(d, 0.25); }

double annulus_fraction(const LatentBank& bank, double c, double sigma) {
    if (c <= 0.0) throw ParamError("annulus_fraction: c must be positive");
    if (sigma <= 0.0) throw ParamError("annulus_fraction: sigma must be positive");
    const int n = bank.n();
    const double lo = std::sqrt(double(bank.d() - 1)) - c;
    const double hi = std::sqrt(double(bank.d() - 1)) + c;
    Eigen::VectorXd mean = bank.vectors.colwise().mean();
    int inside = 0;
    for (int i = 0; i < n; ++i) {
        double r = (bank.vectors.row(i).transpose() - mean).norm() / sigma;
        if (r >= lo && r <= hi) ++inside;
    }
    return double(inside) / n;
}

GeometryReport geometry_report(const LatentBank& bank, int n_pairs,
                               const LatentBank* ref_bank, std::uint64_t seed) {
    const int n = bank.n();
    if (n < 2) throw DataError("geometry_report: bank needs at least 2 vectors");
    if (n_pairs < 1) throw ParamError("geometry_report: n_pairs must be >= 1");

    const std::int64_t all_pairs = std::int64_t(n) * (n - 1) / 2;
    const bool exhaustive = n_pairs >= all_pairs;

    std::vector<double> dists, oangles, pangles;

    if (exhaustive) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                dists.push_back(pair_distance(bank.vectors.row(i), bank.vectors.row(j)));
                Eigen::VectorXd a = bank.vectors.row(i), b = bank.vectors.row(j);
                if (a.norm() > 0.0 && b.norm() > 0.0) oangles.push_back(origin_angle(a, b));
            }
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    if (i == k || j == k) continue;
                    Eigen::VectorXd a = bank.vectors.row(i), b = bank.vectors.row(j),
                                    c = bank.vectors.row(k);
                    if ((a - c).norm() > 0.0 && (b - c).norm() > 0.0)
                        pangles.push_back(pair_angle(a, b, c));
                }
    } else {
        // Distinct unordered pairs, then distinct (vertex, pair) triples,
        // each from its own derived stream.
        Rng prng(mix64(seed, 1));
        std::unordered_set<std::int64_t> seen;
        while (static_cast<int>(dists.size()) < n_pairs) {
            int i = static_cast<int>(prng.uniform_int(n));
            int j = static_cast<int>(prng.uniform_int(n));
            if (i == j) continue;
            if (i > j) std::swap(i, j);
            std::int64_t key = std::int64_t(i) * n + j;
            if (!seen.insert(key).second) continue;
            dists.push_back(pair_distance(bank.vectors.row(i), bank.vectors.row(j)));
            Eigen::VectorXd a = bank.vectors.row(i), b = bank.vectors.row(j);
            if (a.norm() > 0.0 && b.norm() > 0.0) oangles.push_back(origin_angle(a, b));
        }
        if (n >= 3) {
            Rng trng(mix64(seed, 2));
            std::unordered_set<std::int64_t> seen3;
            int want = n_pairs;
            while (static_cast<int>(pangles.size()) < want) {
                int k = static_cast<int>(trng.uniform_int(n));
                int i = static_cast<int>(trng.uniform_int(n));
                int j = static_cast<int>(trng.uniform_int(n));
                if (i == j || i == k || j == k) continue;
                if (i > j) std::swap(i, j);
                std::int64_t key = (std::int64_t(k) * n + i) * n + j;
                if (!seen3.insert(key).second) continue;
                Eigen::VectorXd a = bank.vectors.row(i), b = bank.vectors.row(j),
                                c = bank.vectors.row(k);
                if ((a - c).norm() > 0.0 && (b - c).norm() > 0.0)
                    pangles.push_back(pair_angle(a, b, c));
            }
        }
    }

    GeometryReport r;
    r.pair_distance = summarize(dists);
    r.origin_angle = summarize(oangles);
    r.pair_angle = summarize(pangles);
    r.n_pairs = static_cast<int>(dists.size());
    r.d = bank.d();
    if (ref_bank) r.center_distance = center_distance(bank, *ref_bank);
    return r;
}

std::string report_to_json(const GeometryReport& r) {
    nlohmann::json j;
    auto stat = [](const SummaryStat& s) {
        return nlohmann::json{{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
    };
    j["pair_angle"] = stat(r.pair_angle);
    j["angle_origin"] = stat(r.origin_angle);
    j["pair_distance"] = stat(r.pair_distance);
    if (r.center_distance)
        j["center_distance"] = *r.center_distance;
    else
        j["center_distance"] = nullptr;
    j["n_pairs"] = r.n_pairs;
    j["d"] = r.d;
    return j.dump(2) + "\n";
}

void save_report(const std::string& path, const GeometryReport& r) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << report_to_json(r);
}

}  // namespace ldx

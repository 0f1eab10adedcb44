#include "ldx/schedule.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ldx {

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw ParamError("unknown schedule kind: " + s);
}

NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_min, double beta_max) {
    if (T < 1) throw ParamError("schedule needs T >= 1");
    NoiseSchedule s;
    s.kind = kind;
    s.T = T;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.beta.resize(T);

    if (kind == ScheduleKind::linear) {
        if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
            throw ParamError("linear schedule needs 0 < beta_min <= beta_max < 1");
        for (int i = 0; i < T; ++i)
            s.beta[i] = T == 1 ? beta_min
                               : beta_min + (beta_max - beta_min) * i / double(T - 1);
    } else {
        // Squared-cosine retention profile with the conventional 0.008 offset;
        // beta bounds are not used. Per-step beta clamped to 0.999 and the
        // cumulative product recomputed from the clamped betas so the
        // product invariant holds exactly.
        auto f = [T](double t) {
            double v = std::cos((t / T + 0.008) / 1.008 * M_PI / 2.0);
            return v * v;
        };
        double f0 = f(0.0);
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            double cur = f(double(t)) / f0;
            double b = 1.0 - cur / prev;
            s.beta[t - 1] = std::min(b, 0.999);
            prev = cur;
        }
    }

    s.alpha_step = Eigen::VectorXd::Ones(T) - s.beta;
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        prod *= s.alpha_step[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

std::pair<double, double> marginal_params(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.T) throw IndexError("marginal_params: step out of range");
    double ab = s.alpha_bar[t - 1];
    return {std::sqrt(ab), 1.0 - ab};
}

double sigma_t(const NoiseSchedule& s, int t, int t_prev, Stochasticity eta) {
    if (t_prev >= t) throw IndexError("sigma_t: t_prev must precede t");
    double ab_t = s.abar(t);
    double ab_p = s.abar(t_prev);
    return eta.eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
}

Eigen::VectorXd forward_diffuse(const Eigen::VectorXd& x0, int t,
                                const Eigen::VectorXd& eps, const NoiseSchedule& s) {
    if (x0.size() != eps.size()) throw ShapeError("forward_diffuse: x0/eps size mismatch");
    double ab = s.abar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

std::string schedule_to_json(const NoiseSchedule& s) {
    nlohmann::json j;
    j["kind"] = to_string(s.kind);
    j["T"] = s.T;
    j["beta_min"] = s.beta_min;
    j["beta_max"] = s.beta_max;
    return j.dump(2) + "\n";
}

NoiseSchedule schedule_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("schedule JSON parse error: ") + e.what());
    }
    try {
        ScheduleKind kind = schedule_kind_from_string(j.at("kind").get<std::string>());
        int T = j.at("T").get<int>();
        double bmin = j.at("beta_min").get<double>();
        double bmax = j.at("beta_max").get<double>();
        return build_schedule(kind, T, bmin, bmax);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("schedule JSON: ") + e.what());
    }
}

void save_schedule(const std::string& path, const NoiseSchedule& s) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << schedule_to_json(s);
}

NoiseSchedule load_schedule(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return schedule_from_json(ss.str());
}

}  // namespace ldx

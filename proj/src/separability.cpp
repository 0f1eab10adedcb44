#include "ldx/separability.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "ldx/rng.hpp"

namespace ldx {

namespace {

constexpr double kL2 = 1e-4;

// Per-bank split keeps the classes balanced on both sides.
void split_bank(const LatentBank& bank, double frac, Rng& rng,
                std::vector<int>& train, std::vector<int>& test) {
    std::vector<int> idx(static_cast<std::size_t>(bank.n()));
    for (int i = 0; i < bank.n(); ++i) idx[static_cast<std::size_t>(i)] = i;
    rng.shuffle(idx);
    int n_train = static_cast<int>(std::llround(frac * bank.n()));
    n_train = std::clamp(n_train, 1, bank.n() - 1);
    train.assign(idx.begin(), idx.begin() + n_train);
    test.assign(idx.begin() + n_train, idx.end());
}

}  // namespace

std::pair<LinearModel, double> fit_linear(const LatentBank& bankA, const LatentBank& bankB,
                                          const SplitSpec& split, int epochs, double lr,
                                          std::uint64_t seed) {
    if (bankA.d() != bankB.d()) throw ShapeError("fit_linear: banks differ in dimension");
    if (bankA.n() < 10 || bankB.n() < 10)
        throw DataError("fit_linear: each bank needs at least 10 vectors");
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
        throw ParamError("fit_linear: train_fraction must lie in (0, 1)");
    if (epochs < 1 || lr <= 0.0) throw ParamError("fit_linear: bad epochs or learning rate");

    const int d = bankA.d();
    Rng split_rng(mix64(split.seed, 17));
    std::vector<int> trainA, testA, trainB, testB;
    split_bank(bankA, split.train_fraction, split_rng, trainA, testA);
    split_bank(bankB, split.train_fraction, split_rng, trainB, testB);

    struct Example { const LatentBank* bank; int row; double y; };
    std::vector<Example> train;
    train.reserve(trainA.size() + trainB.size());
    for (int i : trainA) train.push_back({&bankA, i, +1.0});
    for (int i : trainB) train.push_back({&bankB, i, -1.0});

    LinearModel m;
    m.w = Eigen::VectorXd::Zero(d);
    m.b = 0.0;
    m.epochs = epochs;

    Rng rng(mix64(seed, 23));
    std::vector<int> order(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) order[i] = static_cast<int>(i);

    for (int e = 1; e <= epochs; ++e) {
        double step = lr / e;
        rng.shuffle(order);
        for (int oi : order) {
            const Example& ex = train[static_cast<std::size_t>(oi)];
            Eigen::VectorXd x = ex.bank->vectors.row(ex.row);
            double margin = ex.y * (m.w.dot(x) + m.b);
            m.w *= (1.0 - step * kL2);
            if (margin < 1.0) {
                m.w += step * ex.y * x;
                m.b += step * ex.y;
            }
        }
    }

    double hinge = 0.0;
    for (const Example& ex : train) {
        Eigen::VectorXd x = ex.bank->vectors.row(ex.row);
        hinge += std::max(0.0, 1.0 - ex.y * (m.w.dot(x) + m.b));
    }
    m.final_loss = hinge / train.size() + 0.5 * kL2 * m.w.squaredNorm();

    int correct = 0, total = 0;
    auto eval = [&](const LatentBank& bank, const std::vector<int>& rows, int y) {
        for (int i : rows) {
            auto [label, margin] = classify(m, bank.vectors.row(i));
            (void)margin;
            if (label == y) ++correct;
            ++total;
        }
    };
    eval(bankA, testA, +1);
    eval(bankB, testB, -1);
    double acc = total > 0 ? double(correct) / total : 0.0;
    return {m, acc};
}

std::pair<int, double> classify(const LinearModel& m, const Eigen::VectorXd& x) {
    if (x.size() != m.w.size()) throw ShapeError("classify: dimension mismatch");
    double score = m.w.dot(x) + m.b;
    double nw = m.w.norm();
    double margin = nw > 0.0 ? score / nw : 0.0;
    return {score >= 0.0 ? +1 : -1, margin};
}

void save_linear(const std::string& path, const LinearModel& m) {
    nlohmann::json j;
    j["b"] = m.b;
    j["d"] = static_cast<int>(m.w.size());
    j["epochs"] = m.epochs;
    std::string header = j.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    std::uint32_t len = static_cast<std::uint32_t>(header.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (Eigen::Index i = 0; i < m.w.size(); ++i) {
        float v = static_cast<float>(m.w[i]);
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (!f) throw FormatError("write failed: " + path);
}

LinearModel load_linear(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open: " + path);
    std::uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    if (f.gcount() != 4) throw FormatError(path + ": unexpected end of file at offset 0");
    if (len > (1u << 20)) throw FormatError(path + ": implausible header length");
    std::string header(len, '\0');
    f.read(header.data(), len);
    if (static_cast<std::uint32_t>(f.gcount()) != len)
        throw FormatError(path + ": truncated header at offset 4");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": header parse error: " + e.what());
    }
    LinearModel m;
    m.b = j.at("b").get<double>();
    m.epochs = j.at("epochs").get<int>();
    int d = j.at("d").get<int>();
    m.w.resize(d);
    for (int i = 0; i < d; ++i) {
        float v = 0.f;
        f.read(reinterpret_cast<char*>(&v), 4);
        if (f.gcount() != 4)
            throw FormatError(path + ": truncated weights at offset " +
                              std::to_string(4 + len + 4ull * static_cast<unsigned>(i)));
        m.w[i] = v;
    }
    return m;
}

}  // namespace ldx

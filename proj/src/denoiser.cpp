#include "ldx/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "ldx/errors.hpp"
#include "ldx/rng.hpp"

namespace ldx {

namespace {

constexpr int kHiddenLayers = 3;  // blocks with embedding + activation
constexpr int kLayers = kHiddenLayers + 1;

void validate_arch(const Arch& a) {
    if (a.h < 3 || a.w < 3 || a.in_ch < 1 || a.hidden < 1)
        throw ParamError("denoiser arch: all dimensions must be positive (min 3x3 image)");
    if (a.temb_dim < 2 || a.temb_dim % 2 != 0)
        throw ParamError("denoiser arch: temb_dim must be even and >= 2");
}

int layer_in_ch(const Arch& a, int l) { return l == 0 ? a.in_ch : a.hidden; }
int layer_out_ch(const Arch& a, int l) { return l == kLayers - 1 ? a.in_ch : a.hidden; }

// Sinusoidal features of the step index: sin block then cos block.
Eigen::VectorXd time_embedding(int t, int dim) {
    int half = dim / 2;
    Eigen::VectorXd e(dim);
    for (int k = 0; k < half; ++k) {
        double freq = std::exp(-std::log(10000.0) * k / half);
        e[k] = std::sin(t * freq);
        e[half + k] = std::cos(t * freq);
    }
    return e;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }
double silu_grad(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// Activations are (channels, batch*h*w) with one column per pixel; im2col
// expands 3x3 zero-padded patches to rows grouped as channel*9 + offset.
Eigen::MatrixXd im2col(const Eigen::MatrixXd& a, int h, int w, int batch) {
    const int c_in = static_cast<int>(a.rows());
    const int hw = h * w;
    Eigen::MatrixXd k(c_in * 9, a.cols());
    for (int b = 0; b < batch; ++b) {
        const int base = b * hw;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const int p = base + i * w + j;
                for (int o = 0; o < 9; ++o) {
                    const int ii = i + o / 3 - 1;
                    const int jj = j + o % 3 - 1;
                    if (ii < 0 || ii >= h || jj < 0 || jj >= w) {
                        for (int c = 0; c < c_in; ++c) k(c * 9 + o, p) = 0.0;
                    } else {
                        const int q = base + ii * w + jj;
                        for (int c = 0; c < c_in; ++c) k(c * 9 + o, p) = a(c, q);
                    }
                }
            }
        }
    }
    return k;
}

// Adjoint of im2col: scatter patch-gradient rows back onto pixels.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& dk, int h, int w, int batch) {
    const int c_in = static_cast<int>(dk.rows()) / 9;
    const int hw = h * w;
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(c_in, dk.cols());
    for (int b = 0; b < batch; ++b) {
        const int base = b * hw;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const int p = base + i * w + j;
                for (int o = 0; o < 9; ++o) {
                    const int ii = i + o / 3 - 1;
                    const int jj = j + o % 3 - 1;
                    if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                    const int q = base + ii * w + jj;
                    for (int c = 0; c < c_in; ++c) da(c, q) += dk(c * 9 + o, p);
                }
            }
        }
    }
    return da;
}

// Images arrive as flat rows (channel-major); stand them up as column-per-
// pixel activation blocks, one block per batch element.
Eigen::MatrixXd rows_to_activation(const Eigen::MatrixXd& x, const Arch& a) {
    const int hw = a.h * a.w;
    const int batch = static_cast<int>(x.rows());
    Eigen::MatrixXd act(a.in_ch, batch * hw);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < a.in_ch; ++c)
            for (int p = 0; p < hw; ++p) act(c, b * hw + p) = x(b, c * hw + p);
    return act;
}

Eigen::MatrixXd activation_to_rows(const Eigen::MatrixXd& act, const Arch& a, int batch) {
    const int hw = a.h * a.w;
    Eigen::MatrixXd x(batch, a.in_ch * hw);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < a.in_ch; ++c)
            for (int p = 0; p < hw; ++p) x(b, c * hw + p) = act(c, b * hw + p);
    return x;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> cols;  // im2col of each layer input
    std::vector<Eigen::MatrixXd> pre;   // pre-activation of hidden layers
    std::vector<Eigen::VectorXd> embs;  // per batch element
    Eigen::MatrixXd out;                // (in_ch, batch*hw)
};

ForwardCache forward(const DenoiserParams& p, const Eigen::MatrixXd& x_rows,
                     const std::vector<int>& ts) {
    const Arch& a = p.arch;
    const int batch = static_cast<int>(x_rows.rows());
    const int hw = a.h * a.w;
    if (x_rows.cols() != static_cast<Eigen::Index>(a.in_ch) * hw)
        throw ShapeError("denoiser: input size does not match architecture");
    if (static_cast<int>(ts.size()) != batch)
        throw ShapeError("denoiser: one step index required per batch row");
    if (!x_rows.allFinite()) throw NumericError("denoiser: non-finite input");
    for (int t : ts)
        if (t < 1) throw IndexError("denoiser: step index must be >= 1");

    ForwardCache fc;
    fc.embs.reserve(ts.size());
    for (int t : ts) fc.embs.push_back(time_embedding(t, a.temb_dim));

    Eigen::MatrixXd act = rows_to_activation(x_rows, a);
    for (int l = 0; l < kLayers; ++l) {
        Eigen::MatrixXd cols = im2col(act, a.h, a.w, batch);
        Eigen::MatrixXd z = p.conv_w[l] * cols;
        z.colwise() += p.conv_b[l];
        fc.cols.push_back(std::move(cols));
        if (l < kHiddenLayers) {
            for (int b = 0; b < batch; ++b) {
                Eigen::VectorXd shift = p.temb_w[l] * fc.embs[b] + p.temb_b[l];
                z.middleCols(b * hw, hw).colwise() += shift;
            }
            fc.pre.push_back(z);
            act = z.unaryExpr([](double v) { return silu(v); });
        } else {
            fc.out = std::move(z);
        }
    }
    return fc;
}

DenoiserParams zeros_like(const DenoiserParams& p) {
    DenoiserParams g;
    g.arch = p.arch;
    for (const auto& w : p.conv_w) g.conv_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : p.conv_b) g.conv_b.push_back(Eigen::VectorXd::Zero(b.size()));
    for (const auto& w : p.temb_w) g.temb_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : p.temb_b) g.temb_b.push_back(Eigen::VectorXd::Zero(b.size()));
    return g;
}

}  // namespace

std::size_t DenoiserParams::param_count() const {
    std::size_t n = 0;
    for (const auto& w : conv_w) n += static_cast<std::size_t>(w.size());
    for (const auto& b : conv_b) n += static_cast<std::size_t>(b.size());
    for (const auto& w : temb_w) n += static_cast<std::size_t>(w.size());
    for (const auto& b : temb_b) n += static_cast<std::size_t>(b.size());
    return n;
}

DenoiserParams init_denoiser(const Arch& arch, std::uint64_t seed) {
    validate_arch(arch);
    DenoiserParams p;
    p.arch = arch;
    Rng rng(mix64(seed, 101));
    for (int l = 0; l < kLayers; ++l) {
        const int ci = layer_in_ch(arch, l) * 9;
        const int co = layer_out_ch(arch, l);
        Eigen::MatrixXd w(co, ci);
        if (l == kLayers - 1) {
            // Zero output projection: the untrained predictor returns 0,
            // which puts the initial noise-matching loss at ~1 per scalar.
            w.setZero();
        } else {
            const double sd = std::sqrt(2.0 / ci);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * rng.normal();
        }
        p.conv_w.push_back(std::move(w));
        p.conv_b.push_back(Eigen::VectorXd::Zero(co));
        if (l < kHiddenLayers) {
            Eigen::MatrixXd tw(arch.hidden, arch.temb_dim);
            const double sd = 1.0 / std::sqrt(double(arch.temb_dim));
            for (Eigen::Index i = 0; i < tw.size(); ++i) tw.data()[i] = sd * rng.normal();
            p.temb_w.push_back(std::move(tw));
            p.temb_b.push_back(Eigen::VectorXd::Zero(arch.hidden));
        }
    }
    return p;
}

Eigen::MatrixXd predict_eps_batch(const DenoiserParams& p, const Eigen::MatrixXd& x_t,
                                  const std::vector<int>& ts) {
    ForwardCache fc = forward(p, x_t, ts);
    return activation_to_rows(fc.out, p.arch, static_cast<int>(x_t.rows()));
}

Eigen::VectorXd predict_eps(const DenoiserParams& p, const Eigen::VectorXd& x_t, int t) {
    Eigen::MatrixXd x(1, x_t.size());
    x.row(0) = x_t;
    return predict_eps_batch(p, x, {t}).row(0);
}

std::pair<double, DenoiserParams> loss_and_grads(const DenoiserParams& p,
                                                 const Eigen::MatrixXd& x_t,
                                                 const std::vector<int>& ts,
                                                 const Eigen::MatrixXd& target_eps) {
    const Arch& a = p.arch;
    const int batch = static_cast<int>(x_t.rows());
    const int hw = a.h * a.w;
    if (target_eps.rows() != x_t.rows() || target_eps.cols() != x_t.cols())
        throw ShapeError("loss_and_grads: target shape mismatch");

    ForwardCache fc = forward(p, x_t, ts);
    Eigen::MatrixXd target_act = rows_to_activation(target_eps, a);

    const double denom = double(batch) * a.in_ch * hw;
    Eigen::MatrixXd diff = fc.out - target_act;
    double loss = diff.squaredNorm() / denom;

    DenoiserParams g = zeros_like(p);
    Eigen::MatrixXd dz = (2.0 / denom) * diff;  // gradient at the output layer

    for (int l = kLayers - 1; l >= 0; --l) {
        g.conv_w[l] = dz * fc.cols[static_cast<std::size_t>(l)].transpose();
        g.conv_b[l] = dz.rowwise().sum();
        if (l < kHiddenLayers) {
            for (int b = 0; b < batch; ++b) {
                Eigen::VectorXd s = dz.middleCols(b * hw, hw).rowwise().sum();
                g.temb_w[l] += s * fc.embs[static_cast<std::size_t>(b)].transpose();
                g.temb_b[l] += s;
            }
        }
        if (l == 0) break;
        Eigen::MatrixXd dcols = p.conv_w[l].transpose() * dz;
        Eigen::MatrixXd dact = col2im(dcols, a.h, a.w, batch);
        const Eigen::MatrixXd& z = fc.pre[static_cast<std::size_t>(l - 1)];
        dz = dact.binaryExpr(z, [](double go, double zz) { return go * silu_grad(zz); });
    }
    return {loss, g};
}

std::pair<DenoiserParams, std::vector<double>> train_denoiser(
    const DenoiserParams& p0, const std::vector<Eigen::VectorXd>& dataset,
    const NoiseSchedule& s, const TrainConfig& cfg) {
    if (dataset.empty()) throw DataError("train_denoiser: empty dataset");
    if (cfg.batch_size < 1) throw ParamError("train_denoiser: batch_size must be >= 1");
    if (cfg.learning_rate <= 0.0) throw ParamError("train_denoiser: learning_rate must be > 0");
    if (cfg.epochs < 1) throw ParamError("train_denoiser: epochs must be >= 1");

    const Arch& a = p0.arch;
    const int d = a.in_ch * a.h * a.w;
    for (const auto& img : dataset)
        if (img.size() != d) throw ShapeError("train_denoiser: image size mismatch");

    DenoiserParams p = p0;
    DenoiserParams m = zeros_like(p0), v = zeros_like(p0);
    const double b1 = 0.9, b2 = 0.999, eps_adam = 1e-8;
    long step = 0;

    auto tensors = [](DenoiserParams& q) {
        std::vector<std::pair<double*, std::size_t>> spans;
        for (auto& t : q.conv_w) spans.emplace_back(t.data(), t.size());
        for (auto& t : q.conv_b) spans.emplace_back(t.data(), t.size());
        for (auto& t : q.temb_w) spans.emplace_back(t.data(), t.size());
        for (auto& t : q.temb_b) spans.emplace_back(t.data(), t.size());
        return spans;
    };

    Rng rng(mix64(cfg.seed, 7));
    const int n = static_cast<int>(dataset.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int e = 1; e <= cfg.epochs; ++e) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        long seen = 0;
        for (int off = 0; off < n; off += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - off);
            Eigen::MatrixXd xb(bsz, d), epsb(bsz, d);
            std::vector<int> ts(static_cast<std::size_t>(bsz));
            for (int k = 0; k < bsz; ++k) {
                const Eigen::VectorXd& x0 = dataset[static_cast<std::size_t>(order[static_cast<std::size_t>(off + k)])];
                int t = 1 + static_cast<int>(rng.uniform_int(s.T));
                Eigen::VectorXd noise = rng.normal_vec(d);
                xb.row(k) = forward_diffuse(x0, t, noise, s);
                epsb.row(k) = noise;
                ts[static_cast<std::size_t>(k)] = t;
            }
            auto [loss, g] = loss_and_grads(p, xb, ts, epsb);
            if (!std::isfinite(loss))
                throw NumericError("train_denoiser: loss diverged at epoch " + std::to_string(e));
            loss_sum += loss * bsz;
            seen += bsz;

            ++step;
            auto ps = tensors(p), ms = tensors(m), vs = tensors(v), gs = tensors(g);
            const double corr1 = 1.0 - std::pow(b1, double(step));
            const double corr2 = 1.0 - std::pow(b2, double(step));
            for (std::size_t ti = 0; ti < ps.size(); ++ti) {
                double* pw = ps[ti].first;
                double* mw = ms[ti].first;
                double* vw = vs[ti].first;
                const double* gw = gs[ti].first;
                for (std::size_t i = 0; i < ps[ti].second; ++i) {
                    mw[i] = b1 * mw[i] + (1.0 - b1) * gw[i];
                    vw[i] = b2 * vw[i] + (1.0 - b2) * gw[i] * gw[i];
                    double mh = mw[i] / corr1;
                    double vh = vw[i] / corr2;
                    pw[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + eps_adam);
                }
            }
        }
        history.push_back(loss_sum / double(seen));
    }
    return {p, history};
}

void save_denoiser(const std::string& path, const DenoiserParams& p) {
    nlohmann::json j;
    j["arch"] = {{"h", p.arch.h},       {"w", p.arch.w},
                 {"in_ch", p.arch.in_ch}, {"hidden", p.arch.hidden},
                 {"temb_dim", p.arch.temb_dim}};
    nlohmann::json tensors = nlohmann::json::array();
    auto add = [&tensors](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        tensors.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
    };
    for (int l = 0; l < kLayers; ++l) {
        add("conv" + std::to_string(l) + ".w", p.conv_w[static_cast<std::size_t>(l)].rows(),
            p.conv_w[static_cast<std::size_t>(l)].cols());
        add("conv" + std::to_string(l) + ".b", p.conv_b[static_cast<std::size_t>(l)].size(), 1);
        if (l < kHiddenLayers) {
            add("temb" + std::to_string(l) + ".w", p.temb_w[static_cast<std::size_t>(l)].rows(),
                p.temb_w[static_cast<std::size_t>(l)].cols());
            add("temb" + std::to_string(l) + ".b", p.temb_b[static_cast<std::size_t>(l)].size(), 1);
        }
    }
    j["tensors"] = tensors;  // payload follows in this order, column-major f32
    std::string header = j.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f.write("DNZ1", 4);
    std::uint32_t len = static_cast<std::uint32_t>(header.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));

    auto dump = [&f](const double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            float x = static_cast<float>(data[i]);
            f.write(reinterpret_cast<const char*>(&x), 4);
        }
    };
    for (int l = 0; l < kLayers; ++l) {
        dump(p.conv_w[static_cast<std::size_t>(l)].data(), p.conv_w[static_cast<std::size_t>(l)].size());
        dump(p.conv_b[static_cast<std::size_t>(l)].data(), p.conv_b[static_cast<std::size_t>(l)].size());
        if (l < kHiddenLayers) {
            dump(p.temb_w[static_cast<std::size_t>(l)].data(), p.temb_w[static_cast<std::size_t>(l)].size());
            dump(p.temb_b[static_cast<std::size_t>(l)].data(), p.temb_b[static_cast<std::size_t>(l)].size());
        }
    }
    if (!f) throw FormatError("write failed: " + path);
}

DenoiserParams load_denoiser(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, "DNZ1", 4) != 0)
        throw FormatError(path + ": bad magic at offset 0, expected \"DNZ1\"");
    std::uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    if (f.gcount() != 4) throw FormatError(path + ": unexpected end of file at offset 4");
    if (len > (1u << 20)) throw FormatError(path + ": implausible descriptor length");
    std::string header(len, '\0');
    f.read(header.data(), len);
    if (static_cast<std::uint32_t>(f.gcount()) != len)
        throw FormatError(path + ": truncated descriptor at offset 8");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": descriptor parse error: " + e.what());
    }
    Arch a;
    a.h = j.at("arch").at("h").get<int>();
    a.w = j.at("arch").at("w").get<int>();
    a.in_ch = j.at("arch").at("in_ch").get<int>();
    a.hidden = j.at("arch").at("hidden").get<int>();
    a.temb_dim = j.at("arch").at("temb_dim").get<int>();
    validate_arch(a);

    DenoiserParams p = init_denoiser(a, 0);  // shapes only; weights overwritten below
    auto fill = [&f, &path](double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            float x = 0.f;
            f.read(reinterpret_cast<char*>(&x), 4);
            if (f.gcount() != 4) throw FormatError(path + ": truncated weight payload");
            data[i] = x;
        }
    };
    for (int l = 0; l < kLayers; ++l) {
        fill(p.conv_w[static_cast<std::size_t>(l)].data(), p.conv_w[static_cast<std::size_t>(l)].size());
        fill(p.conv_b[static_cast<std::size_t>(l)].data(), p.conv_b[static_cast<std::size_t>(l)].size());
        if (l < kHiddenLayers) {
            fill(p.temb_w[static_cast<std::size_t>(l)].data(), p.temb_w[static_cast<std::size_t>(l)].size());
            fill(p.temb_b[static_cast<std::size_t>(l)].data(), p.temb_b[static_cast<std::size_t>(l)].size());
        }
    }
    return p;
}

}  // namespace ldx

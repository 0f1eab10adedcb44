#include "ldx/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

namespace ldx {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path, std::size_t& offset) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (f.gcount() != 4)
        throw FormatError(path + ": unexpected end of file at offset " + std::to_string(offset));
    offset += 4;
    return v;
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
    if (t.size() != t.data.size())
        throw ShapeError("tensor payload size does not match dims");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f.write(kMagic, 4);
    write_u32(f, kVersion);
    write_u32(f, kDtypeF32);
    write_u32(f, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) write_u32(f, d);
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!f) throw FormatError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::size_t offset = 0;

    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": bad magic at offset 0, expected \"LDT1\"");
    offset = 4;

    std::uint32_t version = read_u32(f, path, offset);
    if (version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version) +
                          " at offset 4");
    std::uint32_t dtype = read_u32(f, path, offset);
    if (dtype != kDtypeF32)
        throw FormatError(path + ": unsupported dtype " + std::to_string(dtype) +
                          " at offset 8");
    std::uint32_t rank = read_u32(f, path, offset);
    if (rank > 8)
        throw FormatError(path + ": implausible rank " + std::to_string(rank) +
                          " at offset 12");

    Tensor t;
    t.dims.resize(rank);
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        t.dims[i] = read_u32(f, path, offset);
        numel *= t.dims[i];
        if (numel > (std::uint64_t(1) << 33))
            throw FormatError(path + ": dimension product overflow at offset " +
                              std::to_string(offset));
    }
    if (rank == 0) numel = 0;

    t.data.resize(numel);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(numel * sizeof(float)));
    if (static_cast<std::uint64_t>(f.gcount()) != numel * sizeof(float))
        throw FormatError(path + ": truncated payload at offset " +
                          std::to_string(offset + static_cast<std::size_t>(f.gcount())));
    return t;
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.resize(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t.data[k++] = static_cast<float>(m(i, j));
    save_tensor(path, t);
}

Eigen::MatrixXd load_matrix(const std::string& path) {
    Tensor t = load_tensor(path);
    if (t.dims.size() != 2)
        throw FormatError(path + ": expected rank 2, got rank " +
                          std::to_string(t.dims.size()));
    Eigen::MatrixXd m(t.dims[0], t.dims[1]);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.data[k++];
    return m;
}

void save_vector(const std::string& path, const Eigen::VectorXd& v) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.data.resize(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
    save_tensor(path, t);
}

Eigen::VectorXd load_vector(const std::string& path) {
    Tensor t = load_tensor(path);
    if (t.dims.size() != 1)
        throw FormatError(path + ": expected rank 1, got rank " +
                          std::to_string(t.dims.size()));
    Eigen::VectorXd v(t.dims[0]);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[static_cast<std::size_t>(i)];
    return v;
}

void write_pgm(const std::string& path, const Eigen::VectorXd& img, int h, int w) {
    if (static_cast<Eigen::Index>(h) * w != img.size())
        throw ShapeError("write_pgm: image size does not match h*w");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double v = (img[static_cast<Eigen::Index>(i) * w + j] + 1.0) * 0.5 * 255.0;
            row[static_cast<std::size_t>(j)] =
                static_cast<unsigned char>(std::clamp(v, 0.0, 255.0) + 0.5);
        }
        f.write(reinterpret_cast<const char*>(row.data()), w);
    }
    if (!f) throw FormatError("write failed: " + path);
}

}  // namespace ldx

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ldx/errors.hpp"

namespace ldx {

// In-memory mirror of the binary tensor container. Payload is float32; all
// computation elsewhere is double, quantization happens only at this
// boundary.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;  // row-major

    std::size_t size() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return dims.empty() ? 0 : n;
    }
};

// Layout: magic "LDT1" | u32 version (=1) | u32 dtype (0 = f32) | u32 rank |
// rank x u32 dims | row-major f32 payload. All little-endian.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Double-precision conveniences over the f32 container.
void save_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::string& path);
void save_vector(const std::string& path, const Eigen::VectorXd& v);
Eigen::VectorXd load_vector(const std::string& path);

// 8-bit binary PGM for eyeballing; maps [-1, 1] to [0, 255] with clamping.
// Never used as a computation input.
void write_pgm(const std::string& path, const Eigen::VectorXd& img, int h, int w);

}  // namespace ldx

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ldx/errors.hpp"

namespace ldx {

// Synthetic single-channel image families in [-1, 1]. Disks are the
// in-domain family; stripes/crosses/checker are structurally different
// out-of-domain families.
enum class Domain { disks, stripes, crosses, checker };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

struct DatasetSpec {
    Domain domain = Domain::disks;
    int h = 16, w = 16;
    int count = 1;
    std::uint64_t seed = 0;
};

// Deterministic given its descriptor; every image is anti-aliased via exact
// pixel coverage so values span [-1, 1] smoothly at shape boundaries.
std::vector<Eigen::VectorXd> make_synthetic_dataset(const DatasetSpec& spec);

}  // namespace ldx

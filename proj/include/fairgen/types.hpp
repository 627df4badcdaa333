#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

namespace fairgen {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Actions are opaque token identifiers. A multi-token action (chunk) is a
// short run of tokens committed in one decoding step.
using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// Log-space products: anything below exp(kLogUnderflow) rounds to zero.
inline constexpr double kLogUnderflow = -700.0;

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace fairgen

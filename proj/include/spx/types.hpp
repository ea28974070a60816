// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace spx {

using Scalar = double;

template <class T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
using Vec3 = Vec3T<Scalar>;
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
using Quat = Eigen::Quaternion<Scalar>;

template <class T>
using PointsT = Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points = PointsT<Scalar>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vec3List = std::vector<Vec3>;

// Errors split in two families: validation (bad input, exit code 1 in the
// CLI) and runtime (numerical failure during a computation, exit code 2).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what, bool validation)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)), validation_(validation) {}
    const std::string& kind() const noexcept { return kind_; }
    bool is_validation() const noexcept { return validation_; }

private:
    std::string kind_;
    bool validation_;
};

#define SPX_DEFINE_ERROR(Name, validation)                                              \
    class Name : public Error {                                                         \
    public:                                                                             \
        explicit Name(const std::string& what) : Error(#Name, what, validation) {}      \
    };

SPX_DEFINE_ERROR(ParseError, true)
SPX_DEFINE_ERROR(IndexError, true)
SPX_DEFINE_ERROR(ConfigError, true)
SPX_DEFINE_ERROR(DegenerateMesh, true)
SPX_DEFINE_ERROR(MissingBlendWeights, true)
SPX_DEFINE_ERROR(DimensionMismatch, true)
SPX_DEFINE_ERROR(MaskMismatch, true)
SPX_DEFINE_ERROR(ShapeMismatch, true)
SPX_DEFINE_ERROR(AssetMismatch, true)
SPX_DEFINE_ERROR(EmptyCalibration, true)
SPX_DEFINE_ERROR(DegenerateBone, true)
SPX_DEFINE_ERROR(SignUndecided, false)
SPX_DEFINE_ERROR(RayDegenerate, false)
SPX_DEFINE_ERROR(NonFiniteLoss, false)

#undef SPX_DEFINE_ERROR

}  // namespace spx

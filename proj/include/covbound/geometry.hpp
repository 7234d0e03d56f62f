#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

namespace covbound {

/// Banach norm on the ambient space E. The dual geometry is implied:
/// euclidean is self-dual, sup_norm (l-infinity) pairs with l1 on E*, and
/// one_norm (l1) pairs with l-infinity on E*.
enum class NormGeometry { euclidean, sup_norm, one_norm };

std::string to_string(NormGeometry geometry);
NormGeometry parse_geometry(std::string_view name);

/// Norm of a vector in the primal geometry.
double vector_norm(const Eigen::Ref<const Eigen::VectorXd>& x, NormGeometry geometry);

}  // namespace covbound

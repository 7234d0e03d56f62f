#include "covbound/geometry.hpp"

#include "covbound/errors.hpp"

namespace covbound {

std::string to_string(NormGeometry geometry) {
  switch (geometry) {
    case NormGeometry::euclidean:
      return "euclidean";
    case NormGeometry::sup_norm:
      return "sup_norm";
    case NormGeometry::one_norm:
      return "one_norm";
  }
  return "unknown";
}

NormGeometry parse_geometry(std::string_view name) {
  if (name == "euclidean" || name == "l2") return NormGeometry::euclidean;
  if (name == "sup_norm" || name == "linf") return NormGeometry::sup_norm;
  if (name == "one_norm" || name == "l1") return NormGeometry::one_norm;
  throw ConfigError("unknown geometry '" + std::string(name) +
                    "' (expected euclidean, sup_norm or one_norm)");
}

double vector_norm(const Eigen::Ref<const Eigen::VectorXd>& x, NormGeometry geometry) {
  if (x.size() == 0) return 0.0;
  switch (geometry) {
    case NormGeometry::euclidean:
      return x.norm();
    case NormGeometry::sup_norm:
      return x.cwiseAbs().maxCoeff();
    case NormGeometry::one_norm:
      return x.cwiseAbs().sum();
  }
  return 0.0;
}

}  // namespace covbound

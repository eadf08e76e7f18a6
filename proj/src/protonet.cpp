#include "fskws/protonet.hpp"

namespace fskws {

Distance distance_from_string(const std::string& s) {
  if (s == "squared_euclidean") return Distance::kSquaredEuclidean;
  if (s == "euclidean") return Distance::kEuclidean;
  throw ConfigError("unknown distance metric: " + s);
}

std::string distance_to_string(Distance d) {
  return d == Distance::kSquaredEuclidean ? "squared_euclidean" : "euclidean";
}

}  // namespace fskws

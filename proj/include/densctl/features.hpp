#pragma once

#include <string>

#include "densctl/matrix.hpp"

namespace densctl {

/// Per-sample feature vectors (N rows × D dims). At toy scale the feature
/// extractor is the identity, so rows are raw sample coordinates.
struct FeatureSet {
  Matrix features;
  std::string source_tag;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

}  // namespace densctl

#pragma once

#include <string>
#include <vector>

#include "surt/data.hpp"
#include "surt/sampler.hpp"

namespace surt {

// A chain bundled with the training schema it was fitted under, which later
// prediction runs validate new covariates against.
struct StoredChain {
  std::vector<std::string> x_names;
  std::vector<ColumnKind> x_kinds;
  std::vector<int> x_levels;
  std::vector<std::string> y_names;
  ChainResult chain;
};

// Versioned binary file. Writing the same chain twice produces identical
// bytes; there are no timestamps or environment echoes in the payload.
void save_chain(const std::string& path, const StoredChain& stored);

StoredChain load_chain(const std::string& path);

}  // namespace surt

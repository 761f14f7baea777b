#pragma once

#include <string>

#include "unlearn/esc.hpp"
#include "unlearn/esc_t.hpp"
#include "unlearn/transform.hpp"

namespace unlearn {

// Erasure transforms travel next to checkpoints as small JSON sidecars; the
// checkpoint itself is never modified.
struct LoadedSidecar {
  std::string kind;  // "esc" or "esc-t"
  std::size_t d = 0;
  FeatureMap map;
};

void save_sidecar(const std::string& path, const PrunedBasis& basis);
void save_sidecar(const std::string& path, const RefinedBasis& basis, double tau);
LoadedSidecar load_sidecar(const std::string& path);

}  // namespace unlearn

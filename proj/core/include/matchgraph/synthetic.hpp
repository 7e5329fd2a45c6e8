#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "matchgraph/embeddings.hpp"
#include "matchgraph/evaluation.hpp"
#include "matchgraph/trainer.hpp"

namespace matchgraph {

/// Cameras evenly spaced on a circle around an object with s-fold rotational
/// symmetry.
struct SceneConfig {
  std::size_t n_images = 360;
  std::size_t symmetry = 4;
  /// Pairs closer than this (circular angle, radians) overlap.
  double overlap_angle = std::numbers::pi / 12.0;
  /// Standard deviation of the per-coordinate Gaussian embedding noise.
  double noise_sigma = 0.05;
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  /// Weight of a view-dependent component that varies with the unfolded
  /// camera angle (background seen behind the object). 0 gives perfectly
  /// symmetric descriptors. Uses the last two embedding dimensions.
  double context_weight = 0.0;

  /// Throws InvalidArgument for out-of-range values.
  void validate() const;
};

struct Scene {
  EmbeddingMatrix embeddings;
  OverlapStore overlaps;
  /// Which of the s symmetric copies each camera sees; indexed by image id.
  std::vector<int> symmetry_class;
  /// Camera angle in radians; indexed by image id.
  std::vector<double> angle;

  SymmetryClasses classes() const;
};

/// Image ids are 0..n-1. Descriptors are a harmonic map of the folded angle
/// (camera angle modulo 2 pi / s), so cameras at the same folded angle in
/// different copies collide, plus seeded noise. Pairs within overlap_angle
/// get a record with mo = ct = 1 - gap / overlap_angle.
Scene generate_scene(const SceneConfig& config);

/// `id class` per line.
void write_classes(const SymmetryClasses& classes, std::ostream& out);
SymmetryClasses read_classes(std::istream& in);
SymmetryClasses read_classes_file(const std::string& path);

}  // namespace matchgraph

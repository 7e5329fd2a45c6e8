#include "matchgraph/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "matchgraph/error.hpp"
#include "matchgraph/random.hpp"

namespace matchgraph {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f'6973'65ULL;  // "noise"

}  // namespace

void SceneConfig::validate() const {
  if (n_images < 1) throw InvalidArgument("scene needs at least one image");
  if (symmetry < 1) throw InvalidArgument("symmetry must be >= 1");
  if (!(overlap_angle > 0.0 && overlap_angle < std::numbers::pi)) {
    throw InvalidArgument("overlap angle must lie in (0, pi)");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidArgument("noise sigma must be a finite non-negative number");
  }
  if (dim < 2) throw InvalidArgument("embedding dimension must be >= 2");
  if (!(context_weight >= 0.0 && context_weight < 1.0)) {
    throw InvalidArgument("context weight must lie in [0, 1)");
  }
  if (context_weight > 0.0 && dim < 4) {
    throw InvalidArgument("a context component needs dimension >= 4");
  }
}

SymmetryClasses Scene::classes() const {
  SymmetryClasses out;
  for (std::size_t i = 0; i < symmetry_class.size(); ++i) out.emplace(i, symmetry_class[i]);
  return out;
}

Scene generate_scene(const SceneConfig& config) {
  config.validate();
  const std::size_t n = config.n_images;
  const std::size_t s = config.symmetry;
  const double two_pi = 2.0 * std::numbers::pi;

  // Harmonics m = 1..M of the folded phase, weighted 1/m so the chord
  // distance grows monotonically with the phase gap up to half a period.
  const bool with_context = config.context_weight > 0.0;
  const std::size_t harmonic_dims = with_context ? config.dim - 2 : config.dim;
  const std::size_t harmonics = harmonic_dims / 2;
  double weight_norm = 0.0;
  for (std::size_t m = 1; m <= harmonics; ++m) weight_norm += 1.0 / static_cast<double>(m * m);
  const double fold_scale = std::sqrt(1.0 - config.context_weight * config.context_weight) /
                            std::sqrt(weight_norm);

  Scene scene;
  scene.symmetry_class.resize(n);
  scene.angle.resize(n);
  std::vector<ImageId> ids(n);
  RowMatrix vectors = RowMatrix::Zero(static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(config.dim));
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = i;
    scene.angle[i] = two_pi * static_cast<double>(i) / static_cast<double>(n);
    scene.symmetry_class[i] = static_cast<int>((i * s) / n);

    // s * theta folded into [0, 2 pi) through integer arithmetic, so that
    // cameras in different copies at the same folded angle get identical
    // phases.
    const double phase = two_pi * static_cast<double>((i * s) % n) / static_cast<double>(n);
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t m = 1; m <= harmonics; ++m) {
      const double w = fold_scale / static_cast<double>(m);
      const double a = static_cast<double>(m) * phase;
      vectors(row, static_cast<Eigen::Index>(2 * (m - 1))) = w * std::cos(a);
      vectors(row, static_cast<Eigen::Index>(2 * (m - 1) + 1)) = w * std::sin(a);
    }
    if (with_context) {
      const auto c = static_cast<Eigen::Index>(config.dim - 2);
      vectors(row, c) = config.context_weight * std::cos(scene.angle[i]);
      vectors(row, c + 1) = config.context_weight * std::sin(scene.angle[i]);
    }
    if (config.noise_sigma > 0.0) {
      Rng rng = make_rng(config.seed, kNoiseStream, i);
      std::normal_distribution<double> noise(0.0, config.noise_sigma);
      for (std::size_t j = 0; j < config.dim; ++j) {
        vectors(row, static_cast<Eigen::Index>(j)) += noise(rng);
      }
    }
  }
  // The embedding file stores 32-bit floats; round here so a scene written
  // to disk and read back is the same scene.
  vectors = vectors.cast<float>().cast<double>();
  scene.embeddings = EmbeddingMatrix(std::move(ids), std::move(vectors));

  // Overlap in whole camera steps; the small slack keeps e.g. pi/12 at
  // n = 360 at exactly 15 steps despite rounding.
  const double step = two_pi / static_cast<double>(n);
  const auto max_steps = static_cast<std::size_t>(std::floor(config.overlap_angle / step + 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 1; g <= max_steps && g <= n / 2; ++g) {
      const std::size_t j = (i + g) % n;
      if (j == i) continue;
      const double gap = static_cast<double>(g) * step;
      const double overlap = std::clamp(1.0 - gap / config.overlap_angle, 0.0, 1.0);
      scene.overlaps.add({i, j, overlap, overlap});
    }
  }
  return scene;
}

void write_classes(const SymmetryClasses& classes, std::ostream& out) {
  std::map<ImageId, int> sorted(classes.begin(), classes.end());
  for (const auto& [id, c] : sorted) out << id << ' ' << c << '\n';
}

SymmetryClasses read_classes(std::istream& in) {
  SymmetryClasses out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    ImageId id = 0;
    int c = 0;
    std::string extra;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!(fields >> id >> c) || (fields >> extra)) {
      throw MalformedRecord("expected `id class`", ParseError::npos, line_no);
    }
    if (!out.emplace(id, c).second) {
      throw DuplicateId("duplicate image id " + std::to_string(id), ParseError::npos, line_no);
    }
  }
  return out;
}

SymmetryClasses read_classes_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedHeader("cannot open class file '" + path + "'", ParseError::npos);
  return read_classes(in);
}

}  // namespace matchgraph

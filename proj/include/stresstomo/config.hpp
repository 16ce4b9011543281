#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stresstomo/errors.hpp"
#include "stresstomo/fields.hpp"
#include "stresstomo/grid.hpp"
#include "stresstomo/material.hpp"

namespace stresstomo {

/// Invalid experiment configuration, located in the source text (1-based; 0 when unknown).
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& file, int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Source positions of every member and element of a JSON document, keyed by JSON pointer.
class JsonLocator {
 public:
  JsonLocator() = default;
  /// The text must already be valid JSON.
  explicit JsonLocator(const std::string& text);
  /// Position of the pointer or of its nearest located ancestor.
  std::pair<int, int> locate(const std::string& pointer) const;

 private:
  std::map<std::string, std::pair<int, int>> positions_;
};

struct RaySpec {
  int angles = 96;
  int offsets = 64;
  /// 0 places one slice on every grid plane.
  int slices = 0;
  /// Euclidean quadrature step; 0 selects half the smallest spacing.
  double step = 0.0;
  int dense_directions = 60;
  int dense_offsets = 48;
  double dense_frame_rotation = 0.0;
};

struct SourceSpec {
  int bumps = 3;
  double width = 0.1;
  double center_radius = 0.15;
  Bump::Profile profile = Bump::Profile::gaussian;
};

struct Tolerances {
  double condition_floor = 1e-6;
  double cg_tolerance = 1e-6;
  double cg_lambda_factor = 1e-6;
  int cg_max_iterations = 500;
  int refinement_iterations = 6;
  double refinement_tolerance = 1e-4;
  double unitarity = 1e-8;
};

struct ExportSpec {
  std::vector<double> noise_levels{0.0, 0.005, 0.01};
  std::vector<double> born_scales{1e-2, 1e-3, 1e-4};
  /// Rays of the first family sampled for the Born table.
  int born_rays = 200;
};

/// Fully resolved experiment description. Every omitted key takes the default shown here.
struct ExperimentConfig {
  int n = 32;
  double half_width = 1.1;
  Domain domain = Domain::ball({0.0, 0.0, 0.0}, 1.0);
  MaterialParams material;
  nlohmann::json material_json = {{"lambda", 1.0}, {"mu", 1.0}, {"rho", 1.0}};
  RaySpec rays;
  /// pwave, swave or verify.
  std::string pipeline = "pwave";
  std::uint64_t seed = 1;
  SourceSpec source;
  double noise = 0.0;
  double born_scale = 1e-3;
  Tolerances tolerances;
  ExportSpec exports;
  std::string out = "out";
  /// Directory of the config file; relative file references resolve against it.
  std::string base_dir;

  Grid3 grid() const;
  /// Canonical JSON of every resolved setting.
  nlohmann::json to_json() const;
  /// Hash of to_json() without the output directory.
  std::string hash() const;
};

/// Parses and validates; throws ConfigError with the offending line.
ExperimentConfig parse_config(const std::string& text, const std::string& file = "<config>");
ExperimentConfig load_config(const std::string& path);

}  // namespace stresstomo

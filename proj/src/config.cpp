#include "stresstomo/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <limits>

#include "stresstomo/io.hpp"

namespace stresstomo {

using nlohmann::json;

ConfigError::ConfigError(const std::string& file, int line, int column, const std::string& message)
    : InvalidInput(line > 0 ? file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message
                            : file + ": " + message),
      line_(line),
      column_(column) {}

// ---------------------------------------------------------------- locator

namespace {

/// Walks already-validated JSON text and records where each value's key (or element) starts.
class Scanner {
 public:
  Scanner(const std::string& text, std::map<std::string, std::pair<int, int>>& out) : s_(text), out_(out) {}

  void run() {
    skip_ws();
    out_[""] = {line_, col_};
    value("");
  }

 private:
  const std::string& s_;
  std::map<std::string, std::pair<int, int>>& out_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;

  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void advance() {
    if (i_ >= s_.size()) return;
    if (s_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }
  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r')) advance();
  }
  std::string string_token() {
    std::string raw;
    advance();  // opening quote
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') {
        raw += s_[i_];
        advance();
      }
      raw += s_[i_];
      advance();
    }
    advance();
    // Decoding through the parser handles every escape form.
    return json::parse("\"" + raw + "\"").get<std::string>();
  }
  static std::string escape_pointer(const std::string& key) {
    std::string r;
    for (char c : key) {
      if (c == '~') {
        r += "~0";
      } else if (c == '/') {
        r += "~1";
      } else {
        r += c;
      }
    }
    return r;
  }
  void value(const std::string& ptr) {
    skip_ws();
    const char c = peek();
    if (c == '{') {
      advance();
      skip_ws();
      while (peek() != '}' && i_ < s_.size()) {
        const std::pair<int, int> at{line_, col_};
        const std::string child = ptr + "/" + escape_pointer(string_token());
        out_[child] = at;
        skip_ws();
        advance();  // ':'
        value(child);
        skip_ws();
        if (peek() == ',') advance();
        skip_ws();
      }
      advance();
    } else if (c == '[') {
      advance();
      skip_ws();
      for (int k = 0; peek() != ']' && i_ < s_.size(); ++k) {
        const std::string child = ptr + "/" + std::to_string(k);
        out_[child] = {line_, col_};
        value(child);
        skip_ws();
        if (peek() == ',') advance();
        skip_ws();
      }
      advance();
    } else if (c == '"') {
      string_token();
    } else {
      while (i_ < s_.size() && std::string(",]} \t\r\n").find(s_[i_]) == std::string::npos) advance();
    }
  }
};

}  // namespace

JsonLocator::JsonLocator(const std::string& text) { Scanner(text, positions_).run(); }

std::pair<int, int> JsonLocator::locate(const std::string& pointer) const {
  std::string p = pointer;
  for (;;) {
    const auto it = positions_.find(p);
    if (it != positions_.end()) return it->second;
    if (p.empty()) return {0, 0};
    p = p.substr(0, p.rfind('/'));
  }
}

// ---------------------------------------------------------------- validation

namespace {

/// Typed access with located errors.
class Reader {
 public:
  Reader(const json& root, const JsonLocator& loc, std::string file) : root_(root), loc_(loc), file_(std::move(file)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& message) const {
    const auto [line, col] = loc_.locate(ptr);
    throw ConfigError(file_, line, col, message);
  }

  const json& at(const std::string& ptr) const { return root_.at(json::json_pointer(ptr)); }
  bool has(const std::string& ptr) const { return root_.contains(json::json_pointer(ptr)); }

  void require_object(const std::string& ptr, std::initializer_list<const char*> keys) const {
    const json& o = at(ptr);
    if (!o.is_object()) fail(ptr, "'" + name(ptr) + "' must be an object");
    for (const auto& item : o.items()) {
      const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; });
      if (!known) fail(ptr + "/" + item.key(), "unknown key '" + item.key() + "'");
    }
  }

  double number(const std::string& ptr, double fallback) const {
    if (!has(ptr)) return fallback;
    const json& v = at(ptr);
    if (!v.is_number()) fail(ptr, "'" + name(ptr) + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(ptr, "'" + name(ptr) + "' must be finite");
    return x;
  }
  double positive(const std::string& ptr, double fallback) const {
    const double x = number(ptr, fallback);
    if (!(x > 0.0)) fail(ptr, "'" + name(ptr) + "' must be positive");
    return x;
  }
  double nonnegative(const std::string& ptr, double fallback) const {
    const double x = number(ptr, fallback);
    if (x < 0.0) fail(ptr, "'" + name(ptr) + "' must be nonnegative");
    return x;
  }
  int integer(const std::string& ptr, int fallback, int min_value) const {
    if (!has(ptr)) return fallback;
    const json& v = at(ptr);
    if (!v.is_number_integer()) fail(ptr, "'" + name(ptr) + "' must be an integer");
    const auto x = v.get<long long>();
    if (x < min_value || x > std::numeric_limits<int>::max()) {
      fail(ptr, "'" + name(ptr) + "' must be at least " + std::to_string(min_value));
    }
    return static_cast<int>(x);
  }
  std::string string(const std::string& ptr, const std::string& fallback) const {
    if (!has(ptr)) return fallback;
    const json& v = at(ptr);
    if (!v.is_string()) fail(ptr, "'" + name(ptr) + "' must be a string");
    return v.get<std::string>();
  }
  Vec3 vec3(const std::string& ptr, const Vec3& fallback) const {
    if (!has(ptr)) return fallback;
    const json& v = at(ptr);
    if (!v.is_array() || v.size() != 3) fail(ptr, "'" + name(ptr) + "' must be an array of 3 numbers");
    Vec3 r;
    for (int k = 0; k < 3; ++k) r[k] = number(ptr + "/" + std::to_string(k), 0.0);
    return r;
  }
  std::vector<double> numbers(const std::string& ptr, const std::vector<double>& fallback) const {
    if (!has(ptr)) return fallback;
    const json& v = at(ptr);
    if (!v.is_array() || v.empty()) fail(ptr, "'" + name(ptr) + "' must be a nonempty array of numbers");
    std::vector<double> r;
    for (std::size_t k = 0; k < v.size(); ++k) r.push_back(number(ptr + "/" + std::to_string(k), 0.0));
    return r;
  }

 private:
  const json& root_;
  const JsonLocator& loc_;
  std::string file_;

  static std::string name(const std::string& ptr) { return ptr.empty() ? "config" : ptr.substr(1); }
};

const char* const kMaterialKeys[] = {"lambda", "mu", "rho", "nu1", "nu2", "nu3", "nu4"};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& file) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offsets of the parser are 1-based and point just past the offending character.
    const std::size_t byte = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, text.size()) : 0;
    int line = 1;
    int col = 1;
    for (std::size_t k = 0; k < byte; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto colon = what.find("syntax error");
    throw ConfigError(file, line, col, colon != std::string::npos ? what.substr(colon) : what);
  }
  const JsonLocator loc(text);
  const Reader r(root, loc, file);
  r.require_object("", {"grid", "domain", "material", "rays", "pipeline", "seed", "source", "noise", "born_scale",
                        "tolerances", "export", "out"});

  ExperimentConfig c;
  std::filesystem::path fp(file);
  c.base_dir = fp.has_parent_path() ? fp.parent_path().string() : "";

  if (r.has("/grid")) {
    r.require_object("/grid", {"n", "half_width"});
    c.n = r.integer("/grid/n", c.n, 8);
    c.half_width = r.positive("/grid/half_width", c.half_width);
  }

  if (r.has("/domain")) {
    r.require_object("/domain", {"kind", "center", "radius", "lower", "upper"});
    const std::string kind = r.string("/domain/kind", "ball");
    if (kind == "ball") {
      if (r.has("/domain/lower") || r.has("/domain/upper")) r.fail("/domain/kind", "a ball takes center and radius");
      c.domain = Domain::ball(r.vec3("/domain/center", {0.0, 0.0, 0.0}), r.positive("/domain/radius", 1.0));
    } else if (kind == "box") {
      if (r.has("/domain/center") || r.has("/domain/radius")) r.fail("/domain/kind", "a box takes lower and upper");
      const Vec3 lo = r.vec3("/domain/lower", {-0.8, -0.8, -0.8});
      const Vec3 hi = r.vec3("/domain/upper", {0.8, 0.8, 0.8});
      for (int k = 0; k < 3; ++k) {
        if (!(hi[k] > lo[k])) r.fail("/domain/upper", "box upper corner must exceed the lower corner");
      }
      c.domain = Domain::box(lo, hi);
    } else {
      r.fail("/domain/kind", "domain kind must be 'ball' or 'box', got '" + kind + "'");
    }
  }
  if (!r.has("/material")) r.fail("", "missing 'material'");
  {
    r.require_object("/material", {"lambda", "mu", "rho", "nu1", "nu2", "nu3", "nu4"});
    json resolved = json::object();
    for (const char* key : kMaterialKeys) {
      const std::string ptr = std::string("/material/") + key;
      if (!r.has(ptr)) continue;
      const json& v = r.at(ptr);
      if (v.is_number()) {
        resolved[key] = r.number(ptr, 0.0);
      } else if (v.is_object()) {
        r.require_object(ptr, {"file"});
        const std::string f = r.string(ptr + "/file", "");
        std::filesystem::path path(f);
        if (path.is_relative() && !c.base_dir.empty()) path = std::filesystem::path(c.base_dir) / path;
        if (f.empty() || !std::filesystem::exists(path)) r.fail(ptr + "/file", "referenced file '" + f + "' does not exist");
        resolved[key] = {{"file", f}};
      } else {
        r.fail(ptr, std::string("'") + key + "' must be a number or {\"file\": path}");
      }
    }
    try {
      c.material = MaterialParams::from_json(resolved, c.base_dir);
    } catch (const InvalidInput& e) {
      r.fail("/material", e.what());
    }
    for (const char* key : {"nu1", "nu2", "nu3", "nu4"}) {
      if (!resolved.contains(key)) resolved[key] = 0.0;
    }
    c.material_json = resolved;
  }

  if (r.has("/rays")) {
    r.require_object("/rays", {"angles", "offsets", "slices", "step", "dense_directions", "dense_offsets",
                               "dense_frame_rotation"});
    c.rays.angles = r.integer("/rays/angles", c.rays.angles, 3);
    c.rays.offsets = r.integer("/rays/offsets", c.rays.offsets, 2);
    c.rays.slices = r.integer("/rays/slices", c.rays.slices, 0);
    c.rays.step = r.nonnegative("/rays/step", c.rays.step);
    c.rays.dense_directions = r.integer("/rays/dense_directions", c.rays.dense_directions, 1);
    c.rays.dense_offsets = r.integer("/rays/dense_offsets", c.rays.dense_offsets, 2);
    c.rays.dense_frame_rotation = r.number("/rays/dense_frame_rotation", c.rays.dense_frame_rotation);
  }
  if (c.rays.slices != 0 && c.rays.slices != c.n) {
    r.fail("/rays/slices", "slices must be 0 or equal to the grid size " + std::to_string(c.n) +
                               " (slice-wise backprojection needs one slice per grid plane)");
  }

  c.pipeline = r.string("/pipeline", c.pipeline);
  if (c.pipeline != "pwave" && c.pipeline != "swave" && c.pipeline != "verify") {
    r.fail("/pipeline", "pipeline must be one of pwave, swave, verify; got '" + c.pipeline + "'");
  }
  if (r.has("/seed")) {
    const json& s = r.at("/seed");
    if (!s.is_number_unsigned()) r.fail("/seed", "'seed' must be a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }

  if (r.has("/source")) {
    r.require_object("/source", {"bumps", "width", "center_radius", "profile"});
    c.source.bumps = r.integer("/source/bumps", c.source.bumps, 1);
    c.source.width = r.positive("/source/width", c.source.width);
    c.source.center_radius = r.nonnegative("/source/center_radius", c.source.center_radius);
    const std::string prof = r.string("/source/profile", "gaussian");
    if (prof == "gaussian") {
      c.source.profile = Bump::Profile::gaussian;
    } else if (prof == "polynomial") {
      c.source.profile = Bump::Profile::polynomial;
    } else {
      r.fail("/source/profile", "profile must be 'gaussian' or 'polynomial'");
    }
  }

  c.noise = r.nonnegative("/noise", c.noise);
  c.born_scale = r.positive("/born_scale", c.born_scale);

  if (r.has("/tolerances")) {
    r.require_object("/tolerances", {"condition_floor", "cg_tolerance", "cg_lambda_factor", "cg_max_iterations",
                                      "refinement_iterations", "refinement_tolerance", "unitarity"});
    Tolerances& t = c.tolerances;
    t.condition_floor = r.positive("/tolerances/condition_floor", t.condition_floor);
    t.cg_tolerance = r.positive("/tolerances/cg_tolerance", t.cg_tolerance);
    t.cg_lambda_factor = r.positive("/tolerances/cg_lambda_factor", t.cg_lambda_factor);
    t.cg_max_iterations = r.integer("/tolerances/cg_max_iterations", t.cg_max_iterations, 1);
    t.refinement_iterations = r.integer("/tolerances/refinement_iterations", t.refinement_iterations, 0);
    t.refinement_tolerance = r.positive("/tolerances/refinement_tolerance", t.refinement_tolerance);
    t.unitarity = r.positive("/tolerances/unitarity", t.unitarity);
  }

  if (r.has("/export")) {
    r.require_object("/export", {"noise_levels", "born_scales", "born_rays"});
    c.exports.noise_levels = r.numbers("/export/noise_levels", c.exports.noise_levels);
    for (std::size_t k = 0; k < c.exports.noise_levels.size(); ++k) {
      if (c.exports.noise_levels[k] < 0.0) r.fail("/export/noise_levels/" + std::to_string(k), "noise levels must be nonnegative");
    }
    c.exports.born_scales = r.numbers("/export/born_scales", c.exports.born_scales);
    if (c.exports.born_scales.size() < 2) r.fail("/export/born_scales", "the Born table needs at least two scales");
    for (std::size_t k = 0; k < c.exports.born_scales.size(); ++k) {
      if (!(c.exports.born_scales[k] > 0.0)) r.fail("/export/born_scales/" + std::to_string(k), "Born scales must be positive");
    }
    c.exports.born_rays = r.integer("/export/born_rays", c.exports.born_rays, 1);
  }

  c.out = r.string("/out", c.out);
  if (c.out.empty()) r.fail("/out", "'out' must not be empty");

  try {
    (void)c.grid();
  } catch (const InvalidInput& e) {
    r.fail("/grid", e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const InvalidInput& e) {
    throw ConfigError(path, 0, 0, e.what());
  }
  return parse_config(text, path);
}

Grid3 ExperimentConfig::grid() const { return Grid3::cube(n, half_width, domain); }

json ExperimentConfig::to_json() const {
  json d = domain.kind == Domain::Kind::ball
               ? json{{"kind", "ball"}, {"center", {domain.center[0], domain.center[1], domain.center[2]}},
                      {"radius", domain.radius}}
               : json{{"kind", "box"},
                      {"lower", {domain.lower[0], domain.lower[1], domain.lower[2]}},
                      {"upper", {domain.upper[0], domain.upper[1], domain.upper[2]}}};
  return {{"grid", {{"n", n}, {"half_width", half_width}}},
          {"domain", d},
          {"material", material_json},
          {"rays",
           {{"angles", rays.angles},
            {"offsets", rays.offsets},
            {"slices", rays.slices},
            {"step", rays.step},
            {"dense_directions", rays.dense_directions},
            {"dense_offsets", rays.dense_offsets},
            {"dense_frame_rotation", rays.dense_frame_rotation}}},
          {"pipeline", pipeline},
          {"seed", seed},
          {"source",
           {{"bumps", source.bumps},
            {"width", source.width},
            {"center_radius", source.center_radius},
            {"profile", source.profile == Bump::Profile::gaussian ? "gaussian" : "polynomial"}}},
          {"noise", noise},
          {"born_scale", born_scale},
          {"tolerances",
           {{"condition_floor", tolerances.condition_floor},
            {"cg_tolerance", tolerances.cg_tolerance},
            {"cg_lambda_factor", tolerances.cg_lambda_factor},
            {"cg_max_iterations", tolerances.cg_max_iterations},
            {"refinement_iterations", tolerances.refinement_iterations},
            {"refinement_tolerance", tolerances.refinement_tolerance},
            {"unitarity", tolerances.unitarity}}},
          {"export",
           {{"noise_levels", exports.noise_levels},
            {"born_scales", exports.born_scales},
            {"born_rays", exports.born_rays}}},
          {"out", out}};
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("out");
  return hash_hex(config_hash(j));
}

}  // namespace stresstomo

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stresstomo/config.hpp"
#include "stresstomo/fields.hpp"
#include "stresstomo/forward.hpp"
#include "stresstomo/geometry.hpp"
#include "stresstomo/inversion.hpp"
#include "stresstomo/io.hpp"
#include "stresstomo/material.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stresstomo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitCondition = 2;
constexpr int kExitNumerical = 3;

/// Independent random streams per stage, all derived from the configured seed.
enum class Stream : std::uint32_t { source = 1, noise = 2, sweep = 3, verify = 4 };

std::mt19937_64 stream(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

struct Context {
  ExperimentConfig cfg;
  std::string hash;
  fs::path out;
  bool dry_run = false;

  json meta(const std::string& artifact) const {
    return {{"artifact", artifact}, {"config_hash", hash}, {"seed", cfg.seed}, {"pipeline", cfg.pipeline}};
  }
};

void require_hash(const json& meta, const Context& ctx, const std::string& what) {
  const std::string h = meta.is_object() ? meta.value("config_hash", std::string()) : std::string();
  if (h != ctx.hash) {
    throw InvalidInput(what + " was produced by config hash '" + h + "', current config hash is '" + ctx.hash +
                       "'; regenerate it");
  }
}

fs::path truth_path(const Context& ctx) { return ctx.out / "R_true.stf"; }
fs::path sinogram_dir(const Context& ctx) { return ctx.out / "sinograms"; }

void write_field_artifact(const fs::path& path, const SymField2& f, const json& meta) {
  write_field(path.string(), f);
  write_json_file(path.string() + ".json", meta);
}

SymField2 read_field_artifact(const fs::path& path, const Context& ctx) {
  if (!fs::exists(path)) throw InvalidInput("missing artifact '" + path.string() + "'");
  const fs::path meta = path.string() + ".json";
  if (!fs::exists(meta)) throw InvalidInput("artifact '" + path.string() + "' has no provenance sidecar");
  require_hash(read_json_file(meta.string()), ctx, "'" + path.string() + "'");
  return read_field<6>(path.string());
}

std::vector<std::shared_ptr<CoordinatePlaneFamily>> plane_families(const ExperimentConfig& c, const Grid3& grid) {
  return build_line_families(grid, c.rays.angles, c.rays.offsets, c.rays.slices, c.rays.step);
}

DenseSphereFamily dense_family(const ExperimentConfig& c, const Grid3& grid) {
  return DenseSphereFamily(grid, c.rays.dense_directions, c.rays.dense_offsets, c.rays.step,
                           c.rays.dense_frame_rotation);
}

std::vector<std::string> pwave_files() {
  return {"pwave_family_1.csv", "pwave_family_2.csv", "pwave_family_3.csv"};
}
const char* const kSwaveDense = "swave_dense.csv";
const char* const kSwavePlane = "swave_plane_3.csv";

Sinogram load_sinogram(const fs::path& path, const Context& ctx, const RayFamily& family) {
  if (!fs::exists(path)) throw InvalidInput("missing sinogram '" + path.string() + "'; run forward first");
  Sinogram s = Sinogram::read(path.string());
  require_hash(s.meta, ctx, "'" + path.string() + "'");
  if (s.manifest != family.manifest()) {
    throw InvalidInput("'" + path.string() + "' does not match the configured ray geometry");
  }
  return s;
}

void print_plan(const Context& ctx, const std::string& command, const json& steps) {
  json plan = {{"command", command}, {"config_hash", ctx.hash}, {"config", ctx.cfg.to_json()}, {"steps", steps}};
  std::cout << plan.dump(2) << "\n";
}

void fail_conditions(const ConditionReport& report) {
  for (const ConditionResult& c : report.items) {
    if (c.pass) continue;
    std::ostringstream os;
    os << "condition " << c.name << " fails: " << c.detail << " (value " << c.value << ", floor " << c.floor << ")";
    if (c.name == "uniqueness") {
      os << "; nu1+nu2+nu3+nu4 = -1 leaves S(alpha g) in the kernel of the data";
      throw NonUniqueError(os.str());
    }
    throw ConditionError(os.str());
  }
}

void require_constants(const ExperimentConfig& c, const std::string& what) {
  if (!c.material.constants_mode()) throw InvalidInput(what + " needs constant material parameters");
}

// ---------------------------------------------------------------- generate

int cmd_generate(const Context& ctx) {
  const fs::path path = truth_path(ctx);
  if (ctx.dry_run) {
    print_plan(ctx, "generate",
               {{{"op", "random_residual_stress"}, {"bumps", ctx.cfg.source.bumps}, {"writes", path.string()}}});
    return kExitOk;
  }
  const Grid3 grid = ctx.cfg.grid();
  auto rng = stream(ctx.cfg.seed, Stream::source);
  BumpSpec spec;
  spec.profile = ctx.cfg.source.profile;
  spec.count = ctx.cfg.source.bumps;
  spec.width_min = spec.width_max = ctx.cfg.source.width;
  spec.center_radius = ctx.cfg.source.center_radius;
  SymField2 R;
  try {
    R = random_residual_stress(grid, rng, spec);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(e.what()) + "; reduce source.width or source.center_radius");
  }
  fs::create_directories(ctx.out);
  json meta = ctx.meta("R_true");
  meta["divergence_residual"] = relative_divergence(R);
  meta["max_abs"] = R.max_abs();
  write_field_artifact(path, R, meta);
  write_json_file((ctx.out / "config.resolved.json").string(), {{"config_hash", ctx.hash}, {"config", ctx.cfg.to_json()}});
  std::printf("generate: wrote %s (divergence residual %.3e)\n", path.string().c_str(),
              meta["divergence_residual"].get<double>());
  return kExitOk;
}

// ---------------------------------------------------------------- forward

void finish_sinogram(Sinogram& s, const Context& ctx, double noise, std::mt19937_64& rng) {
  if (noise > 0.0) add_noise(s, noise, rng);
  json meta = ctx.meta("sinogram");
  meta["noise"] = noise;
  meta.update(s.meta);
  meta["config_hash"] = ctx.hash;
  s.meta = meta;
}

int cmd_forward(const Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  if (c.pipeline == "verify") throw InvalidInput("forward needs pipeline 'pwave' or 'swave'");
  require_constants(c, "forward synthesis");
  const fs::path dir = sinogram_dir(ctx);
  if (ctx.dry_run) {
    json steps = json::array();
    if (c.pipeline == "pwave") {
      for (const auto& f : pwave_files()) steps.push_back({{"op", "pwave_data"}, {"writes", (dir / f).string()}});
    } else {
      steps.push_back({{"op", "propagator_sinogram"}, {"family", "dense_sphere"}, {"writes", (dir / kSwaveDense).string()}});
      steps.push_back({{"op", "propagator_sinogram"}, {"family", "plane_3"}, {"writes", (dir / kSwavePlane).string()}});
    }
    print_plan(ctx, "forward", steps);
    return kExitOk;
  }
  const Grid3 grid = c.grid();
  const SymField2 R = read_field_artifact(truth_path(ctx), ctx);
  if (!(R.grid() == grid)) throw InvalidInput("R_true grid does not match the configured grid");
  fs::create_directories(dir);
  auto rng = stream(c.seed, Stream::noise);
  const auto planes = plane_families(c, grid);
  if (c.pipeline == "pwave") {
    const auto files = pwave_files();
    for (std::size_t k = 0; k < planes.size(); ++k) {
      Sinogram s = pwave_data(R, c.material, *planes[k], Exec::omp, c.tolerances.condition_floor);
      finish_sinogram(s, ctx, c.noise, rng);
      s.write((dir / files[k]).string());
      std::printf("forward: %s (%zu rays)\n", (dir / files[k]).string().c_str(), s.size());
    }
    return kExitOk;
  }
  RytovOptions ro;
  ro.unitarity_tol = c.tolerances.unitarity;
  const DenseSphereFamily dense = dense_family(c, grid);
  Sinogram d = propagator_sinogram(R, c.material, dense, c.born_scale, Exec::omp, ro);
  finish_sinogram(d, ctx, c.noise, rng);
  d.write((dir / kSwaveDense).string());
  Sinogram p = propagator_sinogram(R, c.material, *planes[2], c.born_scale, Exec::omp, ro);
  finish_sinogram(p, ctx, c.noise, rng);
  p.write((dir / kSwavePlane).string());
  std::printf("forward: %s (%zu rays), %s (%zu rays)\n", (dir / kSwaveDense).string().c_str(), d.size(),
              (dir / kSwavePlane).string().c_str(), p.size());
  return kExitOk;
}

// ---------------------------------------------------------------- invert

PWaveOptions pwave_options(const ExperimentConfig& c) {
  PWaveOptions o;
  o.condition_floor = c.tolerances.condition_floor;
  o.refinement_iterations = c.tolerances.refinement_iterations;
  o.refinement_tolerance = c.tolerances.refinement_tolerance;
  return o;
}

SWaveOptions swave_options(const ExperimentConfig& c) {
  SWaveOptions o;
  o.scale = c.born_scale;
  o.condition_floor = c.tolerances.condition_floor;
  o.cg.tolerance = c.tolerances.cg_tolerance;
  o.cg.lambda_factor = c.tolerances.cg_lambda_factor;
  o.cg.max_iterations = c.tolerances.cg_max_iterations;
  return o;
}

std::optional<SymField2> optional_truth(const Context& ctx) {
  const fs::path p = truth_path(ctx);
  if (!fs::exists(p) || !fs::exists(p.string() + ".json")) return std::nullopt;
  if (read_json_file(p.string() + ".json").value("config_hash", std::string()) != ctx.hash) return std::nullopt;
  return read_field<6>(p.string());
}

PipelineResult run_pipeline(const Context& ctx, const std::string& pipeline, const std::vector<Sinogram>& data,
                            const SymField2* truth) {
  const ExperimentConfig& c = ctx.cfg;
  const Grid3 grid = c.grid();
  const auto planes = plane_families(c, grid);
  if (pipeline == "pwave") return pwave_pipeline(data, planes, c.material, pwave_options(c), truth);
  const DenseSphereFamily dense = dense_family(c, grid);
  return swave_pipeline(data.at(0), dense, data.at(1), *planes[2], c.material, swave_options(c), truth);
}

std::vector<Sinogram> load_pipeline_data(const Context& ctx, const std::string& pipeline) {
  const Grid3 grid = ctx.cfg.grid();
  const auto planes = plane_families(ctx.cfg, grid);
  const fs::path dir = sinogram_dir(ctx);
  std::vector<Sinogram> data;
  if (pipeline == "pwave") {
    const auto files = pwave_files();
    for (std::size_t k = 0; k < planes.size(); ++k) data.push_back(load_sinogram(dir / files[k], ctx, *planes[k]));
  } else {
    data.push_back(load_sinogram(dir / kSwaveDense, ctx, dense_family(ctx.cfg, grid)));
    data.push_back(load_sinogram(dir / kSwavePlane, ctx, *planes[2]));
  }
  return data;
}

int cmd_invert(const Context& ctx, std::string pipeline) {
  const ExperimentConfig& c = ctx.cfg;
  if (pipeline.empty()) pipeline = c.pipeline;
  if (pipeline != "pwave" && pipeline != "swave") throw InvalidInput("invert needs 'pwave' or 'swave'");
  require_constants(c, "reconstruction");
  // Solvability is a property of the parameters alone; check it before touching data.
  if (pipeline == "pwave") {
    fail_conditions(check_pwave_conditions(c.material, c.tolerances.condition_floor));
  } else {
    fail_conditions(check_swave_conditions(c.material, c.tolerances.condition_floor));
  }
  const fs::path rec = ctx.out / ("R_rec_" + pipeline + ".stf");
  const fs::path report_path = ctx.out / ("report_" + pipeline + ".json");
  if (ctx.dry_run) {
    print_plan(ctx, "invert",
               {{{"op", pipeline + "_pipeline"}, {"reads", sinogram_dir(ctx).string()},
                 {"writes", {rec.string(), report_path.string()}}}});
    return kExitOk;
  }
  const std::vector<Sinogram> data = load_pipeline_data(ctx, pipeline);
  const std::optional<SymField2> truth = optional_truth(ctx);
  PipelineResult res = run_pipeline(ctx, pipeline, data, truth ? &*truth : nullptr);
  json report = res.report.to_json();
  report["config_hash"] = ctx.hash;
  report["seed"] = c.seed;
  report["config"] = c.to_json();
  report["artifact"] = "report";
  write_field_artifact(rec, res.R, ctx.meta("R_rec"));
  write_json_file(report_path.string(), report);
  std::printf("invert %s: wrote %s", pipeline.c_str(), report_path.string().c_str());
  if (report.contains("relative_error")) std::printf(" (relative error %.4f)", report["relative_error"].get<double>());
  std::printf("\n");
  return kExitOk;
}

// ---------------------------------------------------------------- verify

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  /// Condition checks map to exit 2, numerical invariants to exit 3; informational checks never fail the run.
  std::string kind;
};

json to_json(const Check& c) {
  return {{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}, {"kind", c.kind}};
}

Sym3 random_sym(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Sym3 s;
  for (double& v : s) v = n(rng);
  return s;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 v{n(rng), n(rng), n(rng)};
    if (norm(v) > 1e-8) return normalized(v);
  }
}

/// Polynomial bumps of support radius 0.6 centered within 0.3 of the domain centroid, scaled to the domain.
CovectorField interior_covector(const Grid3& grid, std::mt19937_64& rng) {
  const double r = grid.domain().bounding_radius();
  BumpSpec spec;
  spec.profile = Bump::Profile::polynomial;
  spec.count = 3;
  spec.width_min = spec.width_max = 0.6 * r;
  spec.center_radius = 0.3 * r;
  auto bumps = random_bumps(rng, spec, 3);
  for (Bump& b : bumps) b.center = b.center + grid.domain().centroid();
  return sample_bumps<3>(grid, bumps);
}

double spectral_rel(const std::vector<Complex>& a, double scale) {
  double m = 0.0;
  for (const Complex& z : a) m = std::max(m, std::abs(z));
  return scale > 0.0 ? m / scale : m;
}

double spectral_max(const FourierSymField2& f) {
  double m = 0.0;
  for (std::size_t n = 0; n < f.spectrum().padded_count(); ++n) {
    for (int c = 0; c < 6; ++c) m = std::max(m, std::abs(f.node(n)[c]));
  }
  return m;
}

int cmd_verify(const Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const fs::path path = ctx.out / "verify.json";
  if (ctx.dry_run) {
    print_plan(ctx, "verify",
               {{{"op", "conditions"}}, {{"op", "contraction_identity"}, {"draws", 100}},
                {{"op", "solenoidal_calculus"}}, {{"op", "poincare"}, {"fields", 5}},
                {{"op", "kernel_of_I"}, {"fields", 3}}, {{"op", "unitarity"}}, {{"writes", path.string()}}});
    return kExitOk;
  }
  const Grid3 grid = c.grid();
  auto rng = stream(c.seed, Stream::verify);
  const double floor = c.tolerances.condition_floor;
  std::vector<Check> checks;
  const bool shear = c.pipeline == "swave";

  for (const ConditionResult& r : check_pwave_conditions(c.material, floor).items) {
    checks.push_back({"pwave." + r.name, r.value, r.floor, r.pass, "condition"});
  }
  // Shear conditions only gate the shear pipeline: with nu4 = 0 there is no shear signal to invert.
  for (const ConditionResult& r : check_swave_conditions(c.material, floor).items) {
    checks.push_back({"swave." + r.name, r.value, r.floor, r.pass, shear ? "condition" : "info"});
  }
  const double D = grid.domain().diameter();
  const VariableConditionReport vc = check_variable_conditions(c.material, D, &grid, floor);
  checks.push_back({"variable.determinate", vc.indeterminate ? 1.0 : 0.0, 0.0, !vc.indeterminate, "condition"});
  checks.push_back({"variable.bound", vc.bound, 1.0, vc.bound_pass, "condition"});
  checks.push_back({"variable.symbol_positive", vc.kappa_min, -1.0, vc.symbol_positive, "condition"});
  checks.push_back({"variable.ellipticity_strict", vc.kappa_min, -1.0, vc.ellipticity_pass, "info"});

  {
    double worst = 0.0;
    const std::size_t samples = c.material.sample_count();
    std::uniform_int_distribution<std::size_t> pick(0, samples - 1);
    for (int k = 0; k < 100; ++k) {
      const PointParams p = c.material.constants_mode() ? c.material.point() : c.material.at(pick(rng));
      worst = std::max(worst, contraction_identity_check(random_sym(rng), p, p.vp() * random_unit(rng)).relative());
    }
    checks.push_back({"contraction_identity", worst, 1e-12, worst <= 1e-12, "numerical"});
  }

  {
    BumpSpec spec;
    spec.profile = Bump::Profile::polynomial;
    spec.width_min = spec.width_max = 0.5 * grid.domain().bounding_radius();
    spec.center_radius = 0.3 * grid.domain().bounding_radius();
    auto bumps = random_bumps(rng, spec, 6);
    for (Bump& b : bumps) b.center = b.center + grid.domain().centroid();
    FourierSymField2 u = FourierSymField2::transform(sample_bumps<6>(grid, bumps));
    solenoidal_project(u);
    FourierSymField2 uu = u;
    solenoidal_project(uu);
    double diff = 0.0;
    for (std::size_t n = 0; n < u.spectrum().padded_count(); ++n) {
      for (int k = 0; k < 6; ++k) diff = std::max(diff, std::abs(uu.node(n)[k] - u.node(n)[k]));
    }
    const double scale = spectral_max(u);
    checks.push_back({"solenoidal.idempotent", diff / scale, 1e-10, diff <= 1e-10 * scale, "numerical"});
    // Divergence carries one factor of frequency; normalize by the Nyquist frequency times the field scale.
    const double ymax = std::acos(-1.0) / grid.max_spacing();
    const double div = spectral_rel(divergence_fourier(u), scale * ymax);
    checks.push_back({"solenoidal.divergence_free", div, 1e-8, div <= 1e-8, "numerical"});
    FourierSymField2 dv = inner_derivative_fourier(interior_covector(grid, rng));
    const double dscale = spectral_max(dv);
    solenoidal_project(dv);
    const double pot = spectral_max(dv) / dscale;
    checks.push_back({"solenoidal.kills_potential", pot, 1e-8, pot <= 1e-8, "numerical"});
    double tr_err = 0.0;
    for (int k = 0; k < 10; ++k) {
      const Sym3 P = tangential_projector(random_unit(rng));
      tr_err = std::max(tr_err, std::abs(P[0] + P[1] + P[2] - 2.0));
    }
    checks.push_back({"tangential_projector.trace", tr_err, 1e-14, tr_err <= 1e-14, "numerical"});
  }

  {
    double worst = 0.0;
    double worst_excess = -1.0;
    const ConformalMetric metric = ConformalMetric::constant(1.0);
    for (int k = 0; k < 5; ++k) {
      const PoincareResult p = verify_poincare(interior_covector(grid, rng), metric, D);
      worst = std::max(worst, p.ratio);
      worst_excess = std::max(worst_excess, p.pointwise_excess);
    }
    checks.push_back({"poincare.ratio", worst, 1.0, worst <= 1.0, "numerical"});
    checks.push_back({"poincare.pointwise_codifferential", worst_excess, 1e-10, worst_excess <= 1e-10, "numerical"});
  }

  {
    // The kernel bound is discretization-limited; it is stated for at least 48 nodes per axis.
    const Grid3 fine = Grid3::cube(std::max(c.n, 48), c.half_width, c.domain);
    const auto planes = build_line_families(fine, c.rays.angles, c.rays.offsets, 0, c.rays.step);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      const SymField2 dv = inner_derivative(interior_covector(fine, rng));
      const Sinogram s = longitudinal_transform(dv, *planes[static_cast<std::size_t>(k)]);
      double m = 0.0;
      for (double v : s.values) m = std::max(m, std::abs(v));
      worst = std::max(worst, m / (dv.max_abs() * D));
    }
    checks.push_back({"kernel_of_I", worst, 1e-5, worst <= 1e-5, "numerical"});
  }

  {
    BumpSpec spec;
    auto bumps = random_bumps(rng, spec, 6);
    for (Bump& b : bumps) b.center = b.center + grid.domain().centroid();
    const SymField2 R = inc_potential(sample_bumps<6>(grid, bumps));
    const auto planes = plane_families(c, grid);
    RytovOptions ro;
    ro.unitarity_tol = c.tolerances.unitarity;
    double worst = 0.0;
    const CoordinatePlaneFamily& fam = *planes[2];
    Ray ray;
    for (std::size_t s = 0; s < fam.size(); s += std::max<std::size_t>(1, fam.size() / 200)) {
      if (!fam.make_ray(s, ray)) continue;
      worst = std::max(worst, unitarity_defect(rytov_propagate(R, c.material, ray, c.born_scale, ro)));
    }
    checks.push_back({"propagator_unitarity", worst, c.tolerances.unitarity, worst <= c.tolerances.unitarity,
                      "numerical"});
  }

  bool condition_fail = false;
  bool numerical_fail = false;
  json list = json::array();
  for (const Check& ch : checks) {
    list.push_back(to_json(ch));
    std::printf("%-36s %-4s value %.3e (tolerance %.3e)%s\n", ch.name.c_str(), ch.pass ? "PASS" : "FAIL", ch.value,
                ch.tolerance, ch.kind == "info" ? " [info]" : "");
    if (!ch.pass && ch.kind == "condition") condition_fail = true;
    if (!ch.pass && ch.kind == "numerical") numerical_fail = true;
  }
  fs::create_directories(ctx.out);
  json doc = ctx.meta("verify");
  doc["checks"] = list;
  doc["pass"] = !condition_fail && !numerical_fail;
  write_json_file(path.string(), doc);
  if (condition_fail) return kExitCondition;
  if (numerical_fail) return kExitNumerical;
  return kExitOk;
}

// ---------------------------------------------------------------- report

int cmd_report(const fs::path& out, std::vector<std::string> files, bool dry_run) {
  if (files.empty()) {
    if (fs::is_directory(out)) {
      for (const auto& e : fs::directory_iterator(out)) {
        const std::string name = e.path().filename().string();
        if ((name.rfind("report_", 0) == 0 && e.path().extension() == ".json") || name == "verify.json") {
          files.push_back(e.path().string());
        }
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw InvalidInput("no reports to merge in '" + out.string() + "'");
  if (dry_run) {
    std::cout << json{{"command", "report"}, {"reads", files}, {"writes", {(out / "summary.json").string(),
                                                                          (out / "summary.csv").string()}}}
                     .dump(2)
              << "\n";
    return kExitOk;
  }
  json merged = json::object();
  std::string hash;
  std::string first;
  for (const std::string& f : files) {
    const json r = read_json_file(f);
    const std::string h = r.is_object() ? r.value("config_hash", std::string()) : std::string();
    if (h.empty()) throw InvalidInput("'" + f + "' carries no config hash; refusing to merge");
    if (hash.empty()) {
      hash = h;
      first = f;
    } else if (h != hash) {
      throw InvalidInput("refusing to merge: '" + f + "' has config hash " + h + " but '" + first + "' has " + hash);
    }
    merged[fs::path(f).filename().string()] = r;
  }
  fs::create_directories(out);
  write_json_file((out / "summary.json").string(), {{"config_hash", hash}, {"reports", merged}});
  std::ostringstream csv;
  csv << "artifact,pipeline,config_hash,relative_error,divergence_residual,seconds,pass\n";
  auto num = [](const json& r, const char* key) {
    if (!r.contains(key) || !r[key].is_number()) return std::string();
    std::ostringstream os;
    os.precision(10);
    os << r[key].get<double>();
    return os.str();
  };
  for (const auto& [name, r] : merged.items()) {
    const std::string pass = r.contains("pass") ? (r["pass"].get<bool>() ? "1" : "0") : "";
    csv << name << "," << r.value("pipeline", std::string()) << "," << hash << "," << num(r, "relative_error") << ","
        << num(r, "divergence_residual") << "," << num(r, "seconds") << "," << pass << "\n";
  }
  write_text_file((out / "summary.csv").string(), csv.str());
  std::printf("report: merged %zu reports into %s\n", merged.size(), (out / "summary.csv").string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- export

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

/// Max over sampled rays of |U - (E - i s integral G)|; the Born remainder.
double born_remainder(const SymField2& R, const MaterialParams& params, const RayFamily& family,
                      const std::vector<std::size_t>& slots, double scale, const RytovOptions& ro) {
  double worst = 0.0;
  Ray ray;
  for (std::size_t s : slots) {
    if (!family.make_ray(s, ray)) continue;
    const RytovGenerator gen = RytovGenerator::build(R, params, ray);
    const Mat2c U = rytov_propagate(gen, ray, scale, ro);
    const Gen2 g = integrate_generator(gen, ray);
    const std::complex<double> mi(0.0, -scale);
    const Mat2c first{1.0 + mi * g[0], mi * g[2], mi * g[2], 1.0 + mi * g[1]};
    double d = 0.0;
    for (int e = 0; e < 4; ++e) d += std::norm(U[e] - first[e]);
    worst = std::max(worst, std::sqrt(d));
  }
  return worst;
}

int cmd_export(const Context& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const fs::path dir = sinogram_dir(ctx);
  std::vector<fs::path> sinos;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".csv") sinos.push_back(e.path());
    }
  }
  if (sinos.empty()) throw InvalidInput("no sinograms in '" + dir.string() + "'; run forward first");
  if (!fs::exists(truth_path(ctx))) throw InvalidInput("missing artifact '" + truth_path(ctx).string() + "'");
  require_constants(c, "export");
  const fs::path tables = ctx.out / "tables";
  if (ctx.dry_run) {
    print_plan(ctx, "export",
               {{{"op", "born_slope"}, {"writes", (tables / "born_slope.csv").string()}},
                {{"op", "noise_sweep"}, {"writes", (tables / "noise_sweep.csv").string()}},
                {{"op", "condition_landscape"}, {"writes", (tables / "condition_landscape.csv").string()}}});
    return kExitOk;
  }
  for (const fs::path& p : sinos) {
    const fs::path m = p.string() + ".manifest.json";
    if (!fs::exists(m)) throw InvalidInput("sinogram '" + p.string() + "' has no manifest");
    require_hash(read_json_file(m.string()).value("meta", json::object()), ctx, "'" + p.string() + "'");
  }
  fs::create_directories(tables);
  const Grid3 grid = c.grid();
  const SymField2 R = read_field_artifact(truth_path(ctx), ctx);
  const auto planes = plane_families(c, grid);

  {
    std::vector<std::size_t> present;
    Ray ray;
    for (std::size_t s = 0; s < planes[0]->size(); ++s) {
      if (planes[0]->make_ray(s, ray)) present.push_back(s);
    }
    std::vector<std::size_t> slots;
    const std::size_t stride = std::max<std::size_t>(1, present.size() / static_cast<std::size_t>(c.exports.born_rays));
    for (std::size_t k = 0; k < present.size(); k += stride) slots.push_back(present[k]);
    RytovOptions ro;
    ro.unitarity_tol = c.tolerances.unitarity;
    std::vector<double> scales = c.exports.born_scales;
    std::vector<double> rem;
    for (double s : scales) rem.push_back(born_remainder(R, c.material, *planes[0], slots, s, ro));
    std::ostringstream csv;
    csv << "scale,remainder,slope,config_hash\n";
    for (std::size_t k = 0; k < scales.size(); ++k) {
      // Slope against the neighbouring scale (the next one, or the previous for the last row).
      const std::size_t j = k + 1 < scales.size() ? k + 1 : k - 1;
      const double slope = std::log(rem[k] / rem[j]) / std::log(scales[k] / scales[j]);
      csv << fmt(scales[k]) << "," << fmt(rem[k]) << "," << fmt(slope) << "," << ctx.hash << "\n";
    }
    write_text_file((tables / "born_slope.csv").string(), csv.str());
  }

  {
    const bool pw = fs::exists(dir / pwave_files()[0]);
    const std::string pipeline = pw ? "pwave" : "swave";
    if (pw) {
      fail_conditions(check_pwave_conditions(c.material, c.tolerances.condition_floor));
    } else {
      fail_conditions(check_swave_conditions(c.material, c.tolerances.condition_floor));
    }
    const std::vector<Sinogram> base = load_pipeline_data(ctx, pipeline);
    std::ostringstream csv;
    csv << "pipeline,noise,relative_error,divergence_residual,config_hash\n";
    for (double level : c.exports.noise_levels) {
      // One stream per level so each row is reproducible on its own.
      auto rng = stream(c.seed ^ std::hash<double>{}(level), Stream::sweep);
      std::vector<Sinogram> data = base;
      for (Sinogram& s : data) {
        if (level > 0.0) add_noise(s, level, rng);
      }
      const PipelineResult res = run_pipeline(ctx, pipeline, data, &R);
      const json& r = res.report.json();
      csv << pipeline << "," << fmt(level) << "," << fmt(r["relative_error"].get<double>()) << ","
          << fmt(r["divergence_residual"].get<double>()) << "," << ctx.hash << "\n";
      std::printf("export: noise %.4f relative error %.4f\n", level, r["relative_error"].get<double>());
    }
    write_text_file((tables / "noise_sweep.csv").string(), csv.str());
  }

  {
    const PointParams base = c.material.point();
    std::ostringstream csv;
    csv << "nu1,nu2,nu3,nu4,pwave_a,nzero1,nzero2,uniqueness,swave_a,nu4_nonzero,trace_recovery,bound,bound_pass,"
           "ellipticity_strict,symbol_positive,indeterminate,config_hash\n";
    const double D = grid.domain().diameter();
    for (int i = 0; i <= 6; ++i) {
      for (int j = 0; j <= 4; ++j) {
        PointParams p = base;
        p.nu[0] = -1.5 + 0.5 * i;
        p.nu[3] = -1.0 + 0.5 * j;
        const MaterialParams m = MaterialParams::constants(p.lambda, p.mu, p.rho, p.nu);
        const ConditionReport pc = check_pwave_conditions(m, c.tolerances.condition_floor);
        const ConditionReport sc = check_swave_conditions(m, c.tolerances.condition_floor);
        const VariableConditionReport vc = check_variable_conditions(m, D, nullptr, c.tolerances.condition_floor);
        const double one_nu = 1.0 + p.nu[2] + p.nu[3];
        const double ap = std::abs(one_nu) > 0.0 ? pwave_a(p) : std::nan("");
        const double as = p.nu[3] != 0.0 ? swave_a(p) : std::nan("");
        auto b = [](bool v) { return v ? "1" : "0"; };
        csv << fmt(p.nu[0]) << "," << fmt(p.nu[1]) << "," << fmt(p.nu[2]) << "," << fmt(p.nu[3]) << "," << fmt(ap)
            << "," << b(pc.get("nzero1").pass) << "," << b(pc.get("nzero2").pass) << ","
            << b(pc.get("uniqueness").pass) << "," << fmt(as) << "," << b(sc.get("nu4_nonzero").pass) << ","
            << b(sc.get("trace_recovery").pass) << "," << fmt(vc.bound) << "," << b(vc.bound_pass) << ","
            << b(vc.ellipticity_pass) << "," << b(vc.symbol_positive) << "," << b(vc.indeterminate) << ","
            << ctx.hash << "\n";
      }
    }
    write_text_file((tables / "condition_landscape.csv").string(), csv.str());
  }
  std::printf("export: wrote tables to %s\n", tables.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-stress tensor tomography: synthesis, reconstruction and verification"};
  app.require_subcommand(1);
  std::string config_path;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool dry_run = false;
  app.add_option("--config", config_path, "Experiment configuration (JSON)");
  app.add_option("--threads", threads, "Worker threads (0 keeps the OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", out, "Override the output directory");
  app.add_flag("--dry-run", dry_run, "Print the resolved plan and exit");

  auto* gen = app.add_subcommand("generate", "Synthesize R from a random incompatibility potential")->fallthrough();
  auto* fwd = app.add_subcommand("forward", "Compute sinograms for the configured pipeline")->fallthrough();
  auto* inv = app.add_subcommand("invert", "Reconstruct R and write a report")->fallthrough();
  std::string pipeline;
  inv->add_option("pipeline", pipeline, "pwave or swave (default: the configured pipeline)")
      ->check(CLI::IsMember({"pwave", "swave"}));
  auto* ver = app.add_subcommand("verify", "Run the invariant and condition suite")->fallthrough();
  auto* rep = app.add_subcommand("report", "Merge reports that share a config hash")->fallthrough();
  std::vector<std::string> report_files;
  rep->add_option("files", report_files, "Report files (default: every report in the output directory)");
  auto* exp = app.add_subcommand("export", "Write plottable CSV tables")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (rep->parsed() && config_path.empty()) {
      if (out.empty()) throw InvalidInput("report needs --config or --out");
      return cmd_report(out, report_files, dry_run);
    }
    if (config_path.empty()) throw InvalidInput("--config is required");
    Context ctx;
    ctx.cfg = load_config(config_path);
    if (seed) ctx.cfg.seed = *seed;
    if (!out.empty()) ctx.cfg.out = out;
    ctx.hash = ctx.cfg.hash();
    ctx.out = ctx.cfg.out;
    ctx.dry_run = dry_run;
    if (gen->parsed()) return cmd_generate(ctx);
    if (fwd->parsed()) return cmd_forward(ctx);
    if (inv->parsed()) return cmd_invert(ctx, pipeline);
    if (ver->parsed()) return cmd_verify(ctx);
    if (rep->parsed()) return cmd_report(ctx.out, report_files, dry_run);
    if (exp->parsed()) return cmd_export(ctx);
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const ConditionError& e) {
    std::fprintf(stderr, "condition failure: %s\n", e.what());
    return kExitCondition;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitInvalid;
}

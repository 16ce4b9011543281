#include "stresstomo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stresstomo/errors.hpp"
#include "stresstomo/fields.hpp"
#include "stresstomo/io.hpp"

namespace stresstomo {
namespace {

const double kGoldenAngle = std::numbers::pi * (3.0 - std::sqrt(5.0));

void fill_trapezoid(Ray& ray, const std::vector<double>& dtau) {
  const std::size_t n = ray.points.size();
  ray.weight.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ray.weight[i] += 0.5 * dtau[i];
    ray.weight[i + 1] += 0.5 * dtau[i];
    total += dtau[i];
  }
  ray.length = total;
}

double default_step(const Grid3& grid) {
  const auto& h = grid.spacing();
  return 0.5 * std::min({h[0], h[1], h[2]});
}

Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

/// Geodesic state: position, covector p (|p| = n = 1/v), and a parallel vector Y orthogonal to the velocity.
struct GeoState {
  Vec3 x, p, y;
};

GeoState geo_rhs(const ConformalMetric& metric, const GeoState& s) {
  Vec3 gv;
  const double v = metric.speed_and_gradient(s.x, gv);
  if (!(v > 0.0)) throw NumericalError("metric speed is not positive along the ray");
  const double p2 = dot(s.p, s.p);
  const Vec3 X = (v * v) * s.p;
  // H = v^2 |p|^2 / 2: dp/dtau = -v |p|^2 grad v.
  const Vec3 dp = (-v * p2) * gv;
  // phi = log n = -log v; Christoffel symbols of e^{2 phi} g.
  const Vec3 gphi = (-1.0 / v) * gv;
  const Vec3 dy = -1.0 * (dot(s.y, gphi) * X + dot(X, gphi) * s.y - dot(X, s.y) * gphi);
  return {X, dp, dy};
}

GeoState geo_axpy(const GeoState& s, double h, const GeoState& k) {
  return {s.x + h * k.x, s.p + h * k.p, s.y + h * k.y};
}

GeoState rk4(const ConformalMetric& metric, const GeoState& s, double h) {
  const GeoState k1 = geo_rhs(metric, s);
  const GeoState k2 = geo_rhs(metric, geo_axpy(s, 0.5 * h, k1));
  const GeoState k3 = geo_rhs(metric, geo_axpy(s, 0.5 * h, k2));
  const GeoState k4 = geo_rhs(metric, geo_axpy(s, h, k3));
  GeoState out;
  out.x = s.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  out.p = s.p + (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  out.y = s.y + (h / 6.0) * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
  // Restore the invariants |p| = n, <Y, X> = 0 and |Y|_h = 1.
  const double v = metric.speed(out.x);
  out.p = (1.0 / (v * norm(out.p))) * out.p;
  const Vec3 t = normalized(out.p);
  out.y = out.y - dot(out.y, t) * t;
  out.y = (v / norm(out.y)) * out.y;
  return out;
}

void push_node(Ray& ray, const ConformalMetric& metric, const GeoState& s) {
  const Vec3 t = normalized(s.p);
  const Vec3 f1 = normalized(s.y);
  ray.points.push_back(s.x);
  ray.tangent.push_back(t);
  ray.speed.push_back(metric.speed(s.x));
  ray.frame1.push_back(f1);
  ray.frame2.push_back(cross(t, f1));
}

}  // namespace

void Ray::clear() {
  points.clear();
  tangent.clear();
  speed.clear();
  weight.clear();
  frame1.clear();
  frame2.clear();
  step = 0.0;
  length = 0.0;
}

void Ray::set_line(const Vec3& p0, const Vec3& dir, double L, std::size_t n, const Vec3& e1, const Vec3& e2) {
  if (n < 2) n = 2;
  const double h = L / static_cast<double>(n - 1);
  points.resize(n);
  tangent.assign(n, dir);
  speed.assign(n, 1.0);
  frame1.assign(n, e1);
  frame2.assign(n, e2);
  weight.assign(n, h);
  weight.front() = 0.5 * h;
  weight.back() = 0.5 * h;
  for (std::size_t i = 0; i < n; ++i) points[i] = p0 + (static_cast<double>(i) * h) * dir;
  step = h;
  length = L;
}

// ---------------------------------------------------------------- coordinate-plane family

CoordinatePlaneFamily::CoordinatePlaneFamily(const Grid3& grid, int axis, int angles, int offsets, int slices,
                                             double step)
    : grid_(grid), axis_(axis), angles_(angles), offsets_(offsets), slices_(slices), step_(step) {
  if (axis < 0 || axis > 2) throw InvalidInput("family axis must be 0, 1 or 2");
  if (angles < 3) throw InvalidInput("line families need at least 3 angles");
  if (offsets < 2) throw InvalidInput("line families need at least 2 offsets");
  if (slices < 1) throw InvalidInput("line families need at least 1 slice");
  if (step_ <= 0.0) step_ = default_step(grid);
  radius_ = grid.domain().bounding_radius();
}

double CoordinatePlaneFamily::angle(int j) const { return std::numbers::pi * j / angles_; }

double CoordinatePlaneFamily::slice_coordinate(int s) const {
  const double lo = grid_.origin()[axis_];
  if (slices_ == 1) return grid_.domain().centroid()[axis_];
  const double hi = grid_.upper()[axis_];
  if (slices_ == grid_.dims()[axis_]) return lo + s * grid_.spacing()[axis_];
  return lo + (hi - lo) * s / (slices_ - 1);
}

double CoordinatePlaneFamily::offset_coordinate(int o) const { return -radius_ + o * offset_spacing(); }

double CoordinatePlaneFamily::offset_spacing() const { return 2.0 * radius_ / (offsets_ - 1); }

Vec3 CoordinatePlaneFamily::direction(int j) const {
  const double th = angle(j);
  Vec3 d{0.0, 0.0, 0.0};
  d[axis_u()] = std::cos(th);
  d[axis_w()] = std::sin(th);
  return d;
}

Vec3 CoordinatePlaneFamily::normal(int j) const {
  const double th = angle(j);
  Vec3 d{0.0, 0.0, 0.0};
  d[axis_u()] = -std::sin(th);
  d[axis_w()] = std::cos(th);
  return d;
}

bool CoordinatePlaneFamily::make_ray(std::size_t slot, Ray& out) const {
  const RayId r = id(slot);
  Vec3 p = center();
  p[axis_] = slice_coordinate(r.slice);
  const Vec3 nrm = normal(r.angle);
  p = p + offset_coordinate(r.offset) * nrm;
  const Vec3 dir = direction(r.angle);
  const auto chord = grid_.domain().chord(p, dir);
  if (!chord) return false;
  const double L = chord->second - chord->first;
  if (!(L > 0.0)) return false;
  const auto n = static_cast<std::size_t>(std::ceil(L / step_ - 1e-12)) + 1;
  const Vec3 e1 = unit(axis_);
  out.set_line(p + chord->first * dir, dir, L, n, e1, cross(dir, e1));
  return true;
}

RayId CoordinatePlaneFamily::id(std::size_t slot) const {
  RayId r;
  r.family = axis_ + 1;
  r.offset = static_cast<int>(slot % offsets_);
  r.angle = static_cast<int>((slot / offsets_) % angles_);
  r.slice = static_cast<int>(slot / (static_cast<std::size_t>(offsets_) * angles_));
  return r;
}

nlohmann::json CoordinatePlaneFamily::manifest() const {
  return {{"kind", kind()},     {"axis", axis_},     {"angles", angles_},
          {"offsets", offsets_}, {"slices", slices_}, {"step", step_},
          {"offset_radius", radius_}, {"domain", domain_to_json(grid_.domain())}};
}

// ---------------------------------------------------------------- dense-sphere family

DenseSphereFamily::DenseSphereFamily(const Grid3& grid, int directions, int offsets, double step,
                                     double frame_rotation)
    : grid_(grid), directions_(directions), offsets_(offsets), step_(step), frame_rotation_(frame_rotation) {
  if (directions < 1) throw InvalidInput("dense-sphere family needs at least one direction");
  if (offsets < 2) throw InvalidInput("dense-sphere family needs at least 2 offsets");
  if (step_ <= 0.0) step_ = default_step(grid);
  radius_ = grid.domain().bounding_radius();
  for (int i = 0; i < directions; ++i) {
    const double z = 1.0 - (i + 0.5) / directions;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * i;
    const Vec3 d{r * std::cos(phi), r * std::sin(phi), z};
    const Vec3 a = any_orthogonal(d);
    dirs_.push_back(d);
    axis_a_.push_back(a);
    axis_b_.push_back(cross(d, a));
  }
}

bool DenseSphereFamily::make_ray(std::size_t slot, Ray& out) const {
  const RayId r = id(slot);
  const auto d = static_cast<std::size_t>(r.angle);
  const double h = 2.0 * radius_ / (offsets_ - 1);
  const double u = -radius_ + r.slice * h;
  const double w = -radius_ + r.offset * h;
  const Vec3 p = grid_.domain().centroid() + u * axis_a_[d] + w * axis_b_[d];
  const Vec3& dir = dirs_[d];
  const auto chord = grid_.domain().chord(p, dir);
  if (!chord) return false;
  const double L = chord->second - chord->first;
  if (!(L > 0.0)) return false;
  const auto n = static_cast<std::size_t>(std::ceil(L / step_ - 1e-12)) + 1;
  const double c = std::cos(frame_rotation_);
  const double s = std::sin(frame_rotation_);
  const Vec3 e1 = c * axis_a_[d] + s * axis_b_[d];
  out.set_line(p + chord->first * dir, dir, L, n, e1, cross(dir, e1));
  return true;
}

RayId DenseSphereFamily::id(std::size_t slot) const {
  RayId r;
  r.family = 0;
  r.offset = static_cast<int>(slot % offsets_);
  r.slice = static_cast<int>((slot / offsets_) % offsets_);
  r.angle = static_cast<int>(slot / (static_cast<std::size_t>(offsets_) * offsets_));
  return r;
}

nlohmann::json DenseSphereFamily::manifest() const {
  return {{"kind", kind()},
          {"directions", directions_},
          {"offsets", offsets_},
          {"step", step_},
          {"frame_rotation", frame_rotation_},
          {"offset_radius", radius_},
          {"domain", domain_to_json(grid_.domain())}};
}

// ---------------------------------------------------------------- conformal metric

ConformalMetric ConformalMetric::constant(double v) {
  if (!(v > 0.0)) throw InvalidInput("speed must be positive");
  ConformalMetric m;
  m.kind_ = Kind::constant;
  m.v0_ = v;
  return m;
}

ConformalMetric ConformalMetric::radial(double v0, double kappa, const Vec3& center) {
  if (!(v0 > 0.0) || kappa < 0.0) throw InvalidInput("radial speed needs v0 > 0 and kappa >= 0");
  ConformalMetric m;
  m.kind_ = Kind::radial;
  m.v0_ = v0;
  m.kappa_ = kappa;
  m.center_ = center;
  return m;
}

ConformalMetric ConformalMetric::from_field(const ScalarField& speed, const std::string& source) {
  for (double v : speed.values()) {
    if (!(v > 0.0)) throw InvalidInput("speed field must be positive at every node");
  }
  ConformalMetric m;
  m.kind_ = Kind::field;
  m.field_ = std::make_shared<ScalarField>(speed);
  m.gradient_ = std::make_shared<CovectorField>(gradient(speed, DerivativeBackend::centered));
  m.source_ = source;
  return m;
}

ConformalMetric ConformalMetric::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return constant(j.at("v").get<double>());
  if (kind == "radial") return radial(j.at("v0").get<double>(), j.at("kappa").get<double>(), json_vec(j.at("center")));
  if (kind == "field") {
    const std::string path = j.at("source").get<std::string>();
    if (path.empty()) throw InvalidInput("field metric has no source file");
    return from_field(read_field<1>(path), path);
  }
  throw InvalidInput("unknown metric kind '" + kind + "'");
}

Vec3 ConformalMetric::clamp(const Vec3& x) const {
  const Grid3& g = field_->grid();
  const Vec3 hi = g.upper();
  return {std::clamp(x[0], g.origin()[0], hi[0]), std::clamp(x[1], g.origin()[1], hi[1]),
          std::clamp(x[2], g.origin()[2], hi[2])};
}

double ConformalMetric::speed(const Vec3& x) const {
  switch (kind_) {
    case Kind::constant:
      return v0_;
    case Kind::radial: {
      const Vec3 r = x - center_;
      return v0_ * (1.0 + kappa_ * dot(r, r));
    }
    case Kind::field: {
      double v;
      field_->interpolate(clamp(x), &v);
      return v;
    }
  }
  return v0_;
}

Vec3 ConformalMetric::speed_gradient(const Vec3& x) const {
  Vec3 g;
  speed_and_gradient(x, g);
  return g;
}

double ConformalMetric::speed_and_gradient(const Vec3& x, Vec3& grad) const {
  switch (kind_) {
    case Kind::constant:
      grad = {0.0, 0.0, 0.0};
      return v0_;
    case Kind::radial: {
      const Vec3 r = x - center_;
      grad = (2.0 * v0_ * kappa_) * r;
      return v0_ * (1.0 + kappa_ * dot(r, r));
    }
    case Kind::field: {
      const Vec3 c = clamp(x);
      const Stencil s = make_stencil(field_->grid(), c);
      double v;
      field_->interpolate(s, &v);
      gradient_->interpolate(s, grad.data());
      return v;
    }
  }
  return v0_;
}

nlohmann::json ConformalMetric::describe() const {
  switch (kind_) {
    case Kind::constant:
      return {{"kind", "constant"}, {"v", v0_}};
    case Kind::radial:
      return {{"kind", "radial"}, {"v0", v0_}, {"kappa", kappa_}, {"center", center_}};
    case Kind::field:
      return {{"kind", "field"}, {"source", source_}};
  }
  return {};
}

// ---------------------------------------------------------------- geodesics

Ray trace_geodesic(const ConformalMetric& metric, const Domain& domain, const Vec3& x0, const Vec3& dir,
                   const GeodesicOptions& options) {
  if (!(options.step > 0.0)) throw InvalidInput("geodesic step must be positive");
  const double dn = norm(dir);
  if (!(dn > 0.0)) throw InvalidInput("geodesic direction must be nonzero");
  const Vec3 t0 = (1.0 / dn) * dir;
  if (dot(t0, domain.outward_normal(x0)) >= 0.0) throw InvalidInput("geodesic direction must point into the domain");
  const double budget =
      options.budget_factor * (options.box_diagonal > 0.0 ? options.box_diagonal : domain.diameter());

  const double v0 = metric.speed(x0);
  if (!(v0 > 0.0)) throw InvalidInput("metric speed must be positive at the start point");
  GeoState s{x0, (1.0 / v0) * t0, {}};
  Vec3 y = options.frame_hint ? *options.frame_hint : any_orthogonal(t0);
  y = y - dot(y, t0) * t0;
  if (norm(y) < 1e-12) throw InvalidInput("frame hint is parallel to the direction");
  s.y = (v0 / norm(y)) * y;

  Ray ray;
  ray.step = options.step;
  std::vector<double> dtau;
  push_node(ray, metric, s);
  double travelled = 0.0;
  for (;;) {
    const GeoState next = rk4(metric, s, options.step);
    if (domain.signed_distance(next.x) > 0.0) {
      double lo = 0.0;
      double hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (domain.signed_distance(rk4(metric, s, mid * options.step).x) > 0.0) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      const double frac = 0.5 * (lo + hi);
      if (frac * options.step > 1e-14) {
        push_node(ray, metric, rk4(metric, s, frac * options.step));
        dtau.push_back(frac * options.step);
      } else if (ray.points.size() == 1) {
        throw InvalidInput("geodesic leaves the domain immediately");
      }
      break;
    }
    travelled += norm(next.x - s.x);
    if (travelled > budget) throw NumericalError("geodesic exceeded the step budget (possibly trapped ray)");
    s = next;
    push_node(ray, metric, s);
    dtau.push_back(options.step);
  }
  fill_trapezoid(ray, dtau);
  return ray;
}

// ---------------------------------------------------------------- geodesic fan family

GeodesicFanFamily::GeodesicFanFamily(const Grid3& grid, const ConformalMetric& metric, int sources, int fan,
                                     double max_tilt, double step)
    : grid_(grid), metric_(metric.describe()), sources_(sources), fan_(fan), max_tilt_(max_tilt), step_(step) {
  if (sources < 1 || fan < 1) throw InvalidInput("geodesic fan needs at least one source and one direction");
  if (!(max_tilt >= 0.0 && max_tilt < 0.5 * std::numbers::pi)) {
    throw InvalidInput("fan tilt must lie in [0, pi/2)");
  }
  if (step_ <= 0.0) step_ = default_step(grid);
  const Domain& dom = grid.domain();
  const Vec3 c = dom.centroid();
  GeodesicOptions opt;
  opt.step = step_ / metric.speed(c);
  opt.box_diagonal = grid.box_diagonal();
  rays_.reserve(static_cast<std::size_t>(sources) * fan);
  for (int i = 0; i < sources; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / sources;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * i;
    const Vec3 s{r * std::cos(phi), r * std::sin(phi), z};
    const auto chord = dom.chord(c, -1.0 * s);
    if (!chord) throw InvalidInput("geodesic fan source misses the domain");
    const Vec3 x0 = c + chord->second * (-1.0 * s);
    const Vec3 inward = -1.0 * dom.outward_normal(x0);
    const Vec3 a = any_orthogonal(inward);
    const Vec3 b = cross(inward, a);
    for (int j = 0; j < fan; ++j) {
      const double tilt = fan == 1 ? 0.0 : max_tilt * j / (fan - 1);
      const double az = kGoldenAngle * j;
      const Vec3 d = std::cos(tilt) * inward + std::sin(tilt) * (std::cos(az) * a + std::sin(az) * b);
      rays_.push_back(trace_geodesic(metric, dom, x0, d, opt));
    }
  }
}

bool GeodesicFanFamily::make_ray(std::size_t slot, Ray& out) const {
  out = rays_.at(slot);
  return !out.empty();
}

RayId GeodesicFanFamily::id(std::size_t slot) const {
  RayId r;
  r.family = 4;
  r.slice = static_cast<int>(slot / fan_);
  r.angle = static_cast<int>(slot % fan_);
  r.offset = 0;
  return r;
}

nlohmann::json GeodesicFanFamily::manifest() const {
  return {{"kind", kind()},         {"metric", metric_},  {"sources", sources_},
          {"fan", fan_},            {"max_tilt", max_tilt_}, {"step", step_},
          {"domain", domain_to_json(grid_.domain())}};
}

// ---------------------------------------------------------------- transport and diameter

Vec3 parallel_transport(const Ray& ray, const Vec3& vector, double tolerance) {
  if (ray.empty()) throw InvalidInput("cannot transport along an empty ray");
  const Vec3& t0 = ray.tangent.front();
  const double len = norm(vector);
  if (std::abs(dot(vector, t0)) > tolerance * std::max(len, 1.0)) {
    throw InvalidInput("transported vector must be orthogonal to the initial tangent");
  }
  const double a = dot(vector, ray.frame1.front());
  const double b = dot(vector, ray.frame2.front());
  const double scale = ray.speed.back() / ray.speed.front();
  return scale * (a * ray.frame1.back() + b * ray.frame2.back());
}

DiameterEstimate diameter(const ConformalMetric& metric, const Domain& domain, int samples,
                          const GeodesicOptions& options) {
  if (samples < 1) throw InvalidInput("diameter needs at least one sample");
  DiameterEstimate est;
  est.samples = samples;
  const Vec3 c = domain.centroid();
  const double rho = domain.bounding_radius();
  const double shifts[3] = {0.0, rho / 3.0, -rho / 3.0};
  for (int i = 0; i < samples; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / samples;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * i;
    const Vec3 d{r * std::cos(phi), r * std::sin(phi), z};
    const Vec3 a = any_orthogonal(d);
    const Vec3 b = cross(d, a);
    for (double sa : shifts) {
      for (double sb : shifts) {
        const Vec3 p = c + sa * a + sb * b;
        const auto chord = domain.chord(p, d);
        if (!chord || chord->second - chord->first <= 1e-9) continue;
        const Ray ray = trace_geodesic(metric, domain, p + chord->first * d, d, options);
        est.value = std::max(est.value, ray.length);
        ++est.rays;
      }
    }
  }
  return est;
}

std::array<std::optional<Vec3>, 3> line_family_directions(const Vec3& y) {
  std::array<std::optional<Vec3>, 3> out;
  const double ny = norm(y);
  if (ny == 0.0) return out;
  for (int k = 0; k < 3; ++k) {
    const Vec3 w = cross(unit(k), y);
    const double nw = norm(w);
    if (nw > 1e-12 * ny) out[k] = (1.0 / nw) * w;
  }
  return out;
}

std::vector<std::shared_ptr<CoordinatePlaneFamily>> build_line_families(const Grid3& grid, int angles, int offsets,
                                                                         int slices, double step) {
  std::vector<std::shared_ptr<CoordinatePlaneFamily>> out;
  Ray probe;
  for (int k = 0; k < 3; ++k) {
    const int sl = slices > 0 ? slices : grid.dims()[k];
    auto fam = std::make_shared<CoordinatePlaneFamily>(grid, k, angles, offsets, sl, step);
    bool any = false;
    for (std::size_t s = 0; s < fam->size() && !any; ++s) any = fam->make_ray(s, probe);
    if (!any) throw InvalidInput("line family does not intersect the domain");
    out.push_back(std::move(fam));
  }
  return out;
}

nlohmann::json domain_to_json(const Domain& d) {
  if (d.kind == Domain::Kind::ball) return {{"kind", "ball"}, {"center", d.center}, {"radius", d.radius}};
  return {{"kind", "box"}, {"lower", d.lower}, {"upper", d.upper}};
}

Domain domain_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ball") return Domain::ball(json_vec(j.at("center")), j.at("radius").get<double>());
  if (kind == "box") return Domain::box(json_vec(j.at("lower")), json_vec(j.at("upper")));
  throw InvalidInput("unknown domain kind '" + kind + "'");
}

RayFamilyPtr family_from_manifest(const nlohmann::json& m, const Grid3& grid) {
  if (m.contains("domain") && !(domain_from_json(m.at("domain")) == grid.domain())) {
    throw InvalidInput("family manifest domain does not match the grid domain");
  }
  const std::string kind = m.at("kind").get<std::string>();
  if (kind == "coordinate_plane") {
    return std::make_shared<CoordinatePlaneFamily>(grid, m.at("axis").get<int>(), m.at("angles").get<int>(),
                                                   m.at("offsets").get<int>(), m.at("slices").get<int>(),
                                                   m.at("step").get<double>());
  }
  if (kind == "dense_sphere") {
    return std::make_shared<DenseSphereFamily>(grid, m.at("directions").get<int>(), m.at("offsets").get<int>(),
                                               m.at("step").get<double>(), m.at("frame_rotation").get<double>());
  }
  if (kind == "geodesic_fan") {
    return std::make_shared<GeodesicFanFamily>(grid, ConformalMetric::from_json(m.at("metric")),
                                               m.at("sources").get<int>(), m.at("fan").get<int>(),
                                               m.at("max_tilt").get<double>(), m.at("step").get<double>());
  }
  throw InvalidInput("unknown ray family kind '" + kind + "'");
}

}  // namespace stresstomo

// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "splatjoint/config.hpp"
#include "splatjoint/fusion.hpp"
#include "splatjoint/motion.hpp"
#include "splatjoint/sh.hpp"

namespace splatjoint {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kEmbSeed = 0x5eedfacef00dULL;
constexpr std::uint64_t kDenseSeed = 0xd15ef00dULL;
constexpr std::uint64_t kPosSeed = 0x9051e5ULL;
constexpr double kDensePosScale = 20.0;
constexpr int kMinMaskPixels = 12;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Eigen::VectorXd named_unit_vector(const std::string& name, int dim, std::uint64_t salt) {
  RandomStream rng(salt ^ fnv1a(name));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v.normalized();
}

Eigen::MatrixXd positional_code_matrix(const std::string& name, int dim) {
  RandomStream rng(kPosSeed ^ fnv1a(name));
  Eigen::MatrixXd a(dim, 3);
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) a(i, j) = rng.normal();
  // Column norms ~ sqrt(dim); rescale so a 1 m local offset moves the code
  // by ~kDensePosScale.
  return a * (kDensePosScale / std::sqrt(static_cast<double>(dim)));
}

// Forced float32 rounding. The volatile round trip stops the optimizer from
// folding the cast chain back into full double precision.
double f32(double x) {
  volatile float f = static_cast<float>(x);
  return static_cast<double>(f);
}
Vec3 round_f32(const Vec3& v) { return Vec3(f32(v.x()), f32(v.y()), f32(v.z())); }

// --- local-frame surface geometry -----------------------------------------

struct RayHit {
  double t = 0.0;  // world distance along the unit ray
  Vec3 local;      // hit point in part-local coordinates
};

Vec3 sample_box_surface(const Vec3& size, RandomStream& rng) {
  const double ax = size.y() * size.z(), ay = size.x() * size.z(), az = size.x() * size.y();
  const double total = 2.0 * (ax + ay + az);
  double pick = rng.uniform() * total;
  const double sgn = rng.uniform() < 0.5 ? -0.5 : 0.5;
  const double u = rng.uniform() - 0.5, v = rng.uniform() - 0.5;
  if ((pick -= 2.0 * ax) < 0.0) return {sgn * size.x(), u * size.y(), v * size.z()};
  if ((pick -= 2.0 * ay) < 0.0) return {u * size.x(), sgn * size.y(), v * size.z()};
  return {u * size.x(), v * size.y(), sgn * size.z()};
}

// Panel of a cylinder: mid-surface {(r sin phi, r cos phi - R, z)}, axis +z,
// outward normal +y at phi = 0. size = (arc width, thickness, height).
Vec3 sample_panel_surface(const Vec3& size, double radius, RandomStream& rng) {
  const double span = size.x() / radius;
  const double phi = (rng.uniform() - 0.5) * span;
  const double r = radius + (rng.uniform() - 0.5) * size.y();
  const double z = (rng.uniform() - 0.5) * size.z();
  return {r * std::sin(phi), r * std::cos(phi) - radius, z};
}

std::optional<RayHit> raycast_box(const Vec3& o, const Vec3& d, const Vec3& size) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double half = 0.5 * size[a];
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a]) > half) return std::nullopt;
      continue;
    }
    double lo = (-half - o[a]) / d[a], hi = (half - o[a]) / d[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= 1e-9) return std::nullopt;
  return RayHit{t0, o + t0 * d};
}

std::optional<RayHit> raycast_panel(const Vec3& o, const Vec3& d, const Vec3& size,
                                    double radius) {
  // Intersect with the mid-surface cylinder |(x, y + R)| = R.
  const double ox = o.x(), oy = o.y() + radius;
  const double dx = d.x(), dy = d.y();
  const double a = dx * dx + dy * dy;
  if (a < 1e-14) return std::nullopt;
  const double b = 2.0 * (ox * dx + oy * dy);
  const double c = ox * ox + oy * oy - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double span = size.x() / radius;
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= 1e-9) continue;
    const Vec3 p = o + t * d;
    const double phi = std::atan2(p.x(), p.y() + radius);
    if (std::abs(phi) > 0.5 * span || std::abs(p.z()) > 0.5 * size.z()) continue;
    return RayHit{t, p};
  }
  return std::nullopt;
}

std::optional<RayHit> raycast_part(const OraclePartSpec& part, const Sim3Transform& placement,
                                   const Vec3& origin_w, const Vec3& dir_w) {
  const Sim3Transform inv = placement.inverse();
  const Vec3 o = inv.apply(origin_w);
  const Vec3 d = (inv.rotation * dir_w).normalized();
  // Inflate the lateral extents by about one pixel's world footprint so that
  // the pixel-center ray of any sampled point still hits its own surface;
  // thickness stays exact to keep the depth test tight.
  constexpr double kLateralSlop = 0.024;
  Vec3 size = part.size;
  std::optional<RayHit> hit;
  if (part.shape == "cylinder-panel") {
    size.x() += kLateralSlop;
    size.z() += kLateralSlop;
    hit = raycast_panel(o, d, size, part.panel_radius);
  } else {
    int thin = 0;
    if (size.y() < size[thin]) thin = 1;
    if (size.z() < size[thin]) thin = 2;
    for (int a = 0; a < 3; ++a)
      if (a != thin) size[a] += kLateralSlop;
    hit = raycast_box(o, d, size);
  }
  if (!hit) return std::nullopt;
  // Local distance back to world units (uniform scale).
  hit->t *= placement.scale;
  return hit;
}

// --- convex hull rasterization ---------------------------------------------

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return pts;
  const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_hull(const std::vector<Vec2>& hull, double x, double y) {
  const int n = static_cast<int>(hull.size());
  if (n < 3) {
    for (const auto& p : hull)
      if (std::abs(p.x() - x) < 0.5 && std::abs(p.y() - y) < 0.5) return true;
    return false;
  }
  for (int i = 0; i < n; ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % n];
    if ((b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x()) < -1e-9) return false;
  }
  return true;
}

// --- cameras ----------------------------------------------------------------

Camera orbit_camera(const Vec3& target, double radius, double azimuth_deg, double elev_deg,
                    int image_size) {
  const double az = azimuth_deg * M_PI / 180.0, el = elev_deg * M_PI / 180.0;
  const Vec3 pos = target + radius * Vec3(std::cos(el) * std::cos(az),
                                          std::cos(el) * std::sin(az), std::sin(el));
  const Vec3 forward = (target - pos).normalized();
  const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = forward.cross(right).normalized();
  Eigen::Matrix3d r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  Camera cam;
  cam.width = cam.height = image_size;
  cam.fx = cam.fy = 0.85 * image_size;
  cam.cx = cam.cy = 0.5 * (image_size - 1);
  cam.world_to_camera.rotation = canonicalized(Quat(r));
  cam.world_to_camera.translation = -(r * pos);
  return cam;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec / GT JSON

std::string OracleSpec::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["cameras"] = cameras;
  j["orbit_radius"] = orbit_radius;
  j["image_size"] = image_size;
  j["feature_sigma"] = feature_sigma;
  j["position_sigma"] = position_sigma;
  j["random_global"] = random_global;
  j["scale_min"] = scale_min;
  j["scale_max"] = scale_max;
  j["seed"] = seed;
  j["sh_order"] = sh_order;
  j["d_latent"] = d_latent;
  j["d_feat"] = d_feat;
  j["d_dense"] = d_dense;
  j["parts"] = ordered_json::array();
  for (const auto& p : parts) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["object_name"] = p.object_name;
    pj["shape"] = p.shape;
    pj["gaussian_count"] = p.gaussian_count;
    pj["size"] = {p.size.x(), p.size.y(), p.size.z()};
    pj["panel_radius"] = p.panel_radius;
    pj["center"] = {p.center.x(), p.center.y(), p.center.z()};
    pj["orientation"] = {p.orientation.w(), p.orientation.x(), p.orientation.y(),
                         p.orientation.z()};
    pj["base_color"] = {p.base_color.x(), p.base_color.y(), p.base_color.z()};
    if (p.joint) {
      pj["joint"] = {{"kind", p.joint->kind == JointKind::Revolute ? "revolute" : "prismatic"},
                     {"axis", {p.joint->axis.x(), p.joint->axis.y(), p.joint->axis.z()}},
                     {"pivot", {p.joint->pivot.x(), p.joint->pivot.y(), p.joint->pivot.z()}},
                     {"magnitude", p.joint->magnitude}};
    }
    pj["presence"] = static_cast<int>(p.presence);
    j["parts"].push_back(pj);
  }
  return j.dump(2);
}

OracleSpec OracleSpec::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("oracle spec parse failure: ") + e.what());
  }
  OracleSpec s;
  s.name = j.value("name", "custom");
  s.cameras = j.value("cameras", s.cameras);
  s.orbit_radius = j.value("orbit_radius", s.orbit_radius);
  s.image_size = j.value("image_size", s.image_size);
  s.feature_sigma = j.value("feature_sigma", s.feature_sigma);
  s.position_sigma = j.value("position_sigma", s.position_sigma);
  s.random_global = j.value("random_global", s.random_global);
  s.scale_min = j.value("scale_min", s.scale_min);
  s.scale_max = j.value("scale_max", s.scale_max);
  s.seed = j.value("seed", s.seed);
  s.sh_order = j.value("sh_order", s.sh_order);
  s.d_latent = j.value("d_latent", s.d_latent);
  s.d_feat = j.value("d_feat", s.d_feat);
  s.d_dense = j.value("d_dense", s.d_dense);
  for (const auto& pj : j.value("parts", ordered_json::array())) {
    OraclePartSpec p;
    p.name = pj.at("name").get<std::string>();
    p.object_name = pj.value("object_name", p.name);
    p.shape = pj.value("shape", "box");
    p.gaussian_count = pj.value("gaussian_count", 300);
    const auto size = pj.at("size");
    p.size = Vec3(size[0], size[1], size[2]);
    p.panel_radius = pj.value("panel_radius", 0.5);
    const auto c = pj.at("center");
    p.center = Vec3(c[0], c[1], c[2]);
    if (pj.contains("orientation")) {
      const auto q = pj.at("orientation");
      p.orientation = Quat(q[0], q[1], q[2], q[3]);
    }
    if (pj.contains("base_color")) {
      const auto col = pj.at("base_color");
      p.base_color = Vec3(col[0], col[1], col[2]);
    }
    if (pj.contains("joint")) {
      JointParams jp;
      jp.kind = pj["joint"].at("kind").get<std::string>() == "prismatic" ? JointKind::Prismatic
                                                                         : JointKind::Revolute;
      const auto ax = pj["joint"].at("axis");
      jp.axis = Vec3(ax[0], ax[1], ax[2]).normalized();
      const auto pv = pj["joint"].at("pivot");
      jp.pivot = Vec3(pv[0], pv[1], pv[2]);
      jp.magnitude = pj["joint"].at("magnitude").get<double>();
      p.joint = jp;
    }
    p.presence = static_cast<PartPresence>(pj.value("presence", 0));
    s.parts.push_back(std::move(p));
  }
  return s;
}

namespace {

ordered_json se3_json(const SE3Transform& t) {
  return {{"rotation", {t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z()}},
          {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

SE3Transform se3_from_json(const ordered_json& j) {
  const auto& r = j.at("rotation");
  const auto& t = j.at("translation");
  return {Quat(r[0], r[1], r[2], r[3]), Vec3(t[0], t[1], t[2])};
}

ordered_json joint_json(const JointParams& jp) {
  return {{"kind", jp.kind == JointKind::Revolute ? "revolute" : "prismatic"},
          {"axis", {jp.axis.x(), jp.axis.y(), jp.axis.z()}},
          {"pivot", {jp.pivot.x(), jp.pivot.y(), jp.pivot.z()}},
          {"magnitude", jp.magnitude}};
}

JointParams joint_from_json(const ordered_json& j) {
  JointParams jp;
  jp.kind =
      j.at("kind").get<std::string>() == "prismatic" ? JointKind::Prismatic : JointKind::Revolute;
  const auto& a = j.at("axis");
  jp.axis = Vec3(a[0], a[1], a[2]);
  const auto& p = j.at("pivot");
  jp.pivot = Vec3(p[0], p[1], p[2]);
  jp.magnitude = j.at("magnitude").get<double>();
  return jp;
}

}  // namespace

std::string GroundTruth::to_json() const {
  ordered_json j;
  j["xi_g"] = {{"scale", xi_g.scale},
               {"rotation", {xi_g.rotation.w(), xi_g.rotation.x(), xi_g.rotation.y(),
                             xi_g.rotation.z()}},
               {"translation", {xi_g.translation.x(), xi_g.translation.y(),
                                xi_g.translation.z()}}};
  j["parts"] = ordered_json::array();
  for (const auto& p : parts) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["object_name"] = p.object_name;
    pj["object_id"] = p.object_id;
    pj["is_static"] = p.is_static;
    pj["xi_o"] = se3_json(p.xi_o);
    if (p.joint) pj["joint"] = joint_json(*p.joint);
    pj["members_t"] = p.members_t;
    pj["members_t2"] = p.members_t2;
    pj["presence"] = static_cast<int>(p.presence);
    ordered_json pts = ordered_json::array();
    for (const auto& v : p.full_points_t) pts.push_back({v.x(), v.y(), v.z()});
    pj["full_points_t"] = pts;
    ordered_json codes = ordered_json::array();
    for (Eigen::Index c = 0; c < p.dense_codes.cols(); ++c) {
      std::vector<double> col(p.dense_codes.col(c).data(),
                              p.dense_codes.col(c).data() + p.dense_codes.rows());
      codes.push_back(col);
    }
    pj["dense_codes"] = codes;
    j["parts"].push_back(pj);
  }
  ordered_json emb;
  for (const auto& [name, vec] : embeddings) {
    std::vector<double> v(vec.data(), vec.data() + vec.size());
    emb[name] = v;
  }
  j["embeddings"] = emb;
  return j.dump();
}

GroundTruth GroundTruth::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ground truth parse failure: ") + e.what());
  }
  GroundTruth gt;
  const auto& g = j.at("xi_g");
  gt.xi_g.scale = g.at("scale").get<double>();
  const auto& r = g.at("rotation");
  gt.xi_g.rotation = Quat(r[0], r[1], r[2], r[3]);
  const auto& t = g.at("translation");
  gt.xi_g.translation = Vec3(t[0], t[1], t[2]);
  for (const auto& pj : j.at("parts")) {
    GroundTruth::PartGT p;
    p.name = pj.at("name").get<std::string>();
    p.object_name = pj.value("object_name", p.name);
    p.object_id = pj.value("object_id", 0);
    p.is_static = pj.value("is_static", true);
    p.xi_o = se3_from_json(pj.at("xi_o"));
    if (pj.contains("joint")) p.joint = joint_from_json(pj.at("joint"));
    p.members_t = pj.at("members_t").get<std::vector<int>>();
    p.members_t2 = pj.at("members_t2").get<std::vector<int>>();
    p.presence = static_cast<PartPresence>(pj.value("presence", 0));
    for (const auto& v : pj.at("full_points_t"))
      p.full_points_t.emplace_back(v[0], v[1], v[2]);
    const auto& codes = pj.at("dense_codes");
    if (!codes.empty()) {
      p.dense_codes.resize(codes[0].size(), codes.size());
      for (std::size_t c = 0; c < codes.size(); ++c)
        for (std::size_t r = 0; r < codes[c].size(); ++r)
          p.dense_codes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              codes[c][r].get<double>();
    }
    gt.parts.push_back(std::move(p));
  }
  for (auto it = j.at("embeddings").begin(); it != j.at("embeddings").end(); ++it) {
    const auto v = it.value().get<std::vector<double>>();
    gt.embeddings[it.key()] = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  }
  return gt;
}

// ---------------------------------------------------------------------------
// Generation

namespace {
OraclePair generate_pair_attempt(const OracleSpec& spec, std::uint64_t salt);
}

OraclePair generate_pair(const OracleSpec& spec) {
  // Random-global specs reject-and-resample draws that leave an articulated
  // part without enough unoccluded masks; the salt sequence is fixed, so the
  // result is still a deterministic function of the spec.
  const int attempts = spec.random_global ? 6 : 1;
  for (int a = 0; a + 1 < attempts; ++a) {
    try {
      return generate_pair_attempt(spec, static_cast<std::uint64_t>(a));
    } catch (const SpecError&) {
    }
  }
  return generate_pair_attempt(spec, static_cast<std::uint64_t>(attempts - 1));
}

namespace {
OraclePair generate_pair_attempt(const OracleSpec& spec, std::uint64_t salt) {
  if (spec.parts.empty()) throw SpecError("oracle spec has no parts");
  {
    std::set<std::string> names;
    bool any_static = false;
    for (const auto& p : spec.parts) {
      if (!names.insert(p.name).second) throw SpecError("duplicate part name " + p.name);
      if (p.gaussian_count < 8) throw SpecError("part " + p.name + " needs >= 8 gaussians");
      if (!p.joint && p.presence == PartPresence::Both) any_static = true;
      if (p.joint && p.joint->magnitude == 0.0)
        throw SpecError("articulated part " + p.name + " has zero joint magnitude");
    }
    if (!any_static) throw SpecError("oracle spec needs at least one static part");
  }

  RandomStream rng(spec.seed ^ (salt * 0x9e3779b97f4a7c15ULL));
  RandomStream sample_rng = rng.fork(1);
  RandomStream global_rng = rng.fork(2);
  RandomStream field_rng = rng.fork(3);
  RandomStream noise_t = rng.fork(4);
  RandomStream noise_t2 = rng.fork(5);

  OraclePair out;
  GroundTruth& gt = out.gt;

  // Global transform t -> t'.
  gt.xi_g = Sim3Transform::identity();
  if (spec.random_global) {
    gt.xi_g.scale = global_rng.uniform(spec.scale_min, spec.scale_max);
    // Full yaw plus bounded tilt: captures get re-placed around the scene but
    // keep 'up' roughly vertical; unbounded tilt would face panels away from
    // every camera and starve the target state of usable masks.
    const Quat yaw = quat_from_axis_angle(Vec3::UnitZ(), global_rng.uniform(0.0, 2.0 * M_PI));
    const double tilt_az = global_rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 tilt_axis(std::cos(tilt_az), std::sin(tilt_az), 0.0);
    const Quat tilt = quat_from_axis_angle(tilt_axis, global_rng.uniform(0.0, M_PI / 12.0));
    gt.xi_g.rotation = canonicalized(tilt * yaw);
    gt.xi_g.translation = Vec3(global_rng.uniform(-0.3, 0.3), global_rng.uniform(-0.3, 0.3),
                               global_rng.uniform(-0.3, 0.3));
  }

  // Embedding dictionary (part + object names).
  for (const auto& p : spec.parts) {
    gt.embeddings[p.name] = named_unit_vector(p.name, spec.d_feat, kEmbSeed);
    gt.embeddings[p.object_name] = named_unit_vector(p.object_name, spec.d_feat, kEmbSeed);
  }
  std::map<std::string, int> object_ids;
  for (const auto& p : spec.parts)
    if (!object_ids.count(p.object_name))
      object_ids[p.object_name] = static_cast<int>(object_ids.size());

  // Per-part sampling and ground-truth transforms.
  struct PartData {
    Sim3Transform place_t, place_t2;       // local -> world per state
    std::vector<Vec3> locals;              // sampled local surface points
    std::vector<Vec3> points_t;            // f32-rounded world points, state t
    Eigen::MatrixXd pos_codes;             // d_dense x n positional codes (no noise)
    Eigen::VectorXd dense_base;            // d_dense
    Eigen::MatrixXd code_matrix;           // d_dense x 3
    SE3Transform xi_o;
  };
  std::vector<PartData> data(spec.parts.size());

  for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
    const OraclePartSpec& part = spec.parts[pi];
    PartData& d = data[pi];
    d.place_t = Sim3Transform{1.0, canonicalized(part.orientation), part.center};
    d.dense_base = named_unit_vector(part.name, spec.d_dense, kDenseSeed) * 2.0;
    d.code_matrix = positional_code_matrix(part.name, spec.d_dense);

    d.locals.resize(part.gaussian_count);
    d.points_t.resize(part.gaussian_count);
    d.pos_codes.resize(spec.d_dense, part.gaussian_count);
    for (int i = 0; i < part.gaussian_count; ++i) {
      const Vec3 local = part.shape == "cylinder-panel"
                             ? sample_panel_surface(part.size, part.panel_radius, sample_rng)
                             : sample_box_surface(part.size, sample_rng);
      d.locals[i] = local;
      d.points_t[i] = round_f32(d.place_t.apply(local));
      d.pos_codes.col(i) = d.dense_base + d.code_matrix * local;
    }

    // Part motion: authored joint in state-t world, conjugated by xi_g so the
    // stored xi_o composes after the global transform.
    SE3Transform physical = SE3Transform::identity();
    if (part.joint) {
      if (part.joint->kind == JointKind::Revolute) {
        physical.rotation = quat_from_axis_angle(part.joint->axis, part.joint->magnitude);
        physical.translation = part.joint->pivot - physical.rotation * part.joint->pivot;
      } else {
        physical.translation = part.joint->magnitude * part.joint->axis;
      }
    }
    const Eigen::Matrix3d rg = gt.xi_g.rotation.toRotationMatrix();
    const Eigen::Matrix3d rm = physical.rotation.toRotationMatrix();
    const Eigen::Matrix3d ro = rg * rm * rg.transpose();
    d.xi_o.rotation = canonicalized(Quat(ro));
    d.xi_o.translation = gt.xi_g.translation - ro * gt.xi_g.translation +
                         gt.xi_g.scale * (gt.xi_g.rotation * physical.translation);
    if (!part.joint) d.xi_o = SE3Transform::identity();

    d.place_t2 = Sim3Transform::from_se3(d.xi_o).compose(gt.xi_g.compose(d.place_t));
  }

  // Assemble gaussians per state.
  SceneState& st = out.state_t;
  SceneState& st2 = out.state_t2;
  for (SceneState* s : {&st, &st2}) {
    s->d_latent = spec.d_latent;
    s->d_feat = spec.d_feat;
    s->d_dense = spec.d_dense;
  }
  st.tag = StateTag::T;
  st2.tag = StateTag::TPrime;

  const int sh_coeffs = sh_coeff_count(spec.sh_order);
  gt.parts.resize(spec.parts.size());
  for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
    const OraclePartSpec& part = spec.parts[pi];
    PartData& d = data[pi];
    GroundTruth::PartGT& pgt = gt.parts[pi];
    pgt.name = part.name;
    pgt.object_name = part.object_name;
    pgt.object_id = object_ids[part.object_name];
    pgt.is_static = !part.joint.has_value();
    pgt.xi_o = d.xi_o;
    if (part.joint)
      pgt.joint = extract_joint(d.xi_o, /*theta_min_deg=*/1e-7, /*prismatic_min=*/1e-12);
    pgt.presence = part.presence;
    pgt.full_points_t = d.points_t;
    pgt.dense_codes = d.pos_codes;

    // Shared appearance per part.
    const double area_scale =
        std::sqrt(part.size.x() * part.size.z() / std::max(1, part.gaussian_count));
    std::vector<Eigen::MatrixXd> rot_sh(spec.sh_order + 1);
    {
      const Quat r_tot = canonicalized(d.xi_o.rotation * gt.xi_g.rotation);
      for (int l = 0; l <= spec.sh_order; ++l) rot_sh[l] = sh_rotation_matrix(l, r_tot);
    }

    for (int i = 0; i < part.gaussian_count; ++i) {
      GaussianPrimitive g;
      g.position = d.points_t[i];
      {
        const Vec3 ax = field_rng.unit_vector();
        g.rotation = quat_from_axis_angle(ax, field_rng.uniform(0.0, M_PI));
      }
      g.scale = round_f32(Vec3::Constant(std::max(1e-4, 0.8 * area_scale)));
      g.opacity = f32(field_rng.uniform(0.85, 1.0));
      g.sh.setZero(3, sh_coeffs);
      for (int ch = 0; ch < 3; ++ch) {
        g.sh(ch, 0) = part.base_color[ch] / 0.28209479177387814 +
                      0.02 * field_rng.normal();
        for (int k = 1; k < sh_coeffs; ++k) g.sh(ch, k) = 0.05 * field_rng.normal();
        for (int k = 0; k < sh_coeffs; ++k) g.sh(ch, k) = f32(g.sh(ch, k));
      }
      g.latent.resize(spec.d_latent);
      for (int k = 0; k < spec.d_latent; ++k) g.latent[k] = f32(0.01 * field_rng.normal());

      if (part.presence != PartPresence::OnlyTPrime) {
        pgt.members_t.push_back(static_cast<int>(st.gaussians.size()));
        st.gaussians.push_back(g);
      }
      if (part.presence != PartPresence::OnlyT) {
        GaussianPrimitive g2 = g;
        Vec3 mapped = d.xi_o.apply(gt.xi_g.apply(g.position));
        if (spec.position_sigma > 0.0)
          mapped += spec.position_sigma * Vec3(noise_t2.normal(), noise_t2.normal(),
                                               noise_t2.normal());
        g2.position = round_f32(mapped);
        g2.rotation = canonicalized(d.xi_o.rotation * gt.xi_g.rotation * g.rotation);
        g2.scale = round_f32(gt.xi_g.scale * g.scale);
        int offset = 0;
        for (int l = 0; l <= spec.sh_order; ++l) {
          const int w = 2 * l + 1;
          g2.sh.middleCols(offset, w) = g.sh.middleCols(offset, w) * rot_sh[l].transpose();
          offset += w;
        }
        for (int ch = 0; ch < 3; ++ch)
          for (int k = 0; k < sh_coeffs; ++k) g2.sh(ch, k) = f32(g2.sh(ch, k));
        g2.latent.resize(spec.d_latent);
        for (int k = 0; k < spec.d_latent; ++k)
          g2.latent[k] = f32(0.01 * field_rng.normal());
        pgt.members_t2.push_back(static_cast<int>(st2.gaussians.size()));
        st2.gaussians.push_back(g2);
      }
    }
  }

  // Cameras are shared between states (the scene moved, not the rig).
  Vec3 target = Vec3::Zero();
  for (const auto& p : spec.parts) target += p.center;
  target /= static_cast<double>(spec.parts.size());
  std::vector<Camera> cams(spec.cameras);
  for (int ci = 0; ci < spec.cameras; ++ci) {
    const double az = 360.0 * ci / spec.cameras;
    const double el = (ci % 2 == 0) ? 20.0 : 45.0;
    cams[ci] = orbit_camera(target, spec.orbit_radius, az, el, spec.image_size);
  }

  // Render views + masks per state.
  const EngineConfig defaults;
  const auto build_state = [&](SceneState& state, bool is_t2, RandomStream& noise) {
    const int W = spec.image_size, H = spec.image_size;
    for (int ci = 0; ci < spec.cameras; ++ci) {
      View view;
      view.camera = cams[ci];
      view.image.width = W;
      view.image.height = H;
      view.image.pixels.assign(static_cast<std::size_t>(W) * H, Eigen::Vector3f::Zero());
      view.depth.assign(static_cast<std::size_t>(W) * H,
                        std::numeric_limits<float>::quiet_NaN());
      state.views.push_back(std::move(view));
    }
    // Raycast buffers per view: front part + local hit.
    struct PixelHit {
      int part = -1;
      Vec3 local;
    };
    std::vector<std::vector<PixelHit>> hits(spec.cameras);
    for (int ci = 0; ci < spec.cameras; ++ci) {
      auto& view = state.views[ci];
      hits[ci].assign(static_cast<std::size_t>(W) * H, {});
      const SE3Transform cam_to_world = view.camera.world_to_camera.inverse();
      const Vec3 origin = cam_to_world.translation;
      parallel_for(static_cast<std::size_t>(W) * H, [&](std::size_t idx) {
        const int x = static_cast<int>(idx % W), y = static_cast<int>(idx / W);
        const Vec3 dir_cam((x - view.camera.cx) / view.camera.fx,
                           (y - view.camera.cy) / view.camera.fy, 1.0);
        const Vec3 dir = (cam_to_world.rotation * dir_cam).normalized();
        double best_t = std::numeric_limits<double>::infinity();
        for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
          const auto presence = spec.parts[pi].presence;
          if (is_t2 ? presence == PartPresence::OnlyT : presence == PartPresence::OnlyTPrime)
            continue;
          const Sim3Transform& place = is_t2 ? data[pi].place_t2 : data[pi].place_t;
          const auto hit = raycast_part(spec.parts[pi], place, origin, dir);
          if (hit && hit->t < best_t) {
            best_t = hit->t;
            hits[ci][idx] = {static_cast<int>(pi), hit->local};
          }
        }
        if (hits[ci][idx].part >= 0) {
          const Vec3 world = origin + best_t * dir;
          view.depth[idx] = f32(view.camera.to_camera(world).z());
          view.image.pixels[idx] = spec.parts[hits[ci][idx].part].base_color.cast<float>();
        }
      });
    }

    // Masks: convex hull of member pixels ∩ visibility (the part in front,
    // or no surface hit at silhouette-rounding pixels); emitted only when the
    // support recovers the membership exactly.
    for (int ci = 0; ci < spec.cameras; ++ci) {
      auto& view = state.views[ci];
      int next_mask_id = 0;
      std::vector<std::vector<std::uint8_t>> part_bitmaps(spec.parts.size());
      // Projected member pixels with their local coordinates, per part; used
      // as the dense-code fallback at pixels without a surface hit.
      std::vector<std::vector<std::pair<Vec2, Vec3>>> member_px(spec.parts.size());
      for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
        const auto& members = is_t2 ? gt.parts[pi].members_t2 : gt.parts[pi].members_t;
        for (std::size_t k = 0; k < members.size(); ++k) {
          const auto proj = try_project(view.camera, state.gaussians[members[k]].position);
          if (proj) member_px[pi].emplace_back(proj->pixel, data[pi].locals[k]);
        }
      }
      const auto make_pixel_features = [&](const std::vector<std::uint32_t>& set_px,
                                           const std::vector<int>& candidate_parts) {
        Eigen::MatrixXf pf(spec.d_dense, set_px.size());
        for (std::size_t k = 0; k < set_px.size(); ++k) {
          const PixelHit& h = hits[ci][set_px[k]];
          int part = h.part;
          Vec3 local = h.local;
          if (part < 0 ||
              std::find(candidate_parts.begin(), candidate_parts.end(), part) ==
                  candidate_parts.end()) {
            // No surface reading here: nearest member of the mask's parts.
            const Vec2 q(static_cast<double>(set_px[k] % W),
                         static_cast<double>(set_px[k] / W));
            double best = std::numeric_limits<double>::infinity();
            for (int cp : candidate_parts)
              for (const auto& [px, loc] : member_px[cp]) {
                const double d = (px - q).squaredNorm();
                if (d < best) {
                  best = d;
                  part = cp;
                  local = loc;
                }
              }
          }
          Eigen::VectorXd code = data[part].dense_base + data[part].code_matrix * local;
          for (int r = 0; r < spec.d_dense; ++r)
            pf(r, static_cast<Eigen::Index>(k)) =
                f32(code[r] + spec.feature_sigma * noise.normal());
        }
        return pf;
      };

      for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
        const auto& members = is_t2 ? gt.parts[pi].members_t2 : gt.parts[pi].members_t;
        if (members.empty()) continue;
        std::vector<Vec2> px;
        px.reserve(members.size());
        bool ok = true;
        for (int gi : members) {
          const auto proj = try_project(view.camera, state.gaussians[gi].position);
          if (!proj) {
            ok = false;
            break;
          }
          const int ix = static_cast<int>(std::floor(proj->pixel.x() + 0.5));
          const int iy = static_cast<int>(std::floor(proj->pixel.y() + 0.5));
          if (ix < 0 || iy < 0 || ix >= W || iy >= H)
            throw SpecError("part " + spec.parts[pi].name +
                            " projects outside the image; adjust the spec");
          px.emplace_back(ix, iy);
        }
        if (!ok) continue;
        // Pixels that hold a member but miss the analytic surface (rounding
        // slop at silhouettes) stay in the mask; slop without a member would
        // be mask area nothing can ever cover.
        std::set<std::size_t> member_px;
        for (const auto& p : px)
          member_px.insert(static_cast<std::size_t>(p.y()) * W +
                           static_cast<std::size_t>(p.x()));
        const auto hull = convex_hull(px);
        if (hull.size() < 3) continue;
        double min_x = 1e18, max_x = -1e18, min_y = 1e18, max_y = -1e18;
        for (const auto& p : hull) {
          min_x = std::min(min_x, p.x());
          max_x = std::max(max_x, p.x());
          min_y = std::min(min_y, p.y());
          max_y = std::max(max_y, p.y());
        }
        std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(W) * H, 0);
        std::size_t count = 0;
        for (int y = std::max(0, (int)min_y); y <= std::min(H - 1, (int)max_y); ++y)
          for (int x = std::max(0, (int)min_x); x <= std::min(W - 1, (int)max_x); ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * W + x;
            const int front = hits[ci][idx].part;
            const bool visible =
                front == static_cast<int>(pi) || (front < 0 && member_px.count(idx));
            if (visible && inside_hull(hull, x, y)) {
              bitmap[idx] = 1;
              ++count;
            }
          }
        if (count < kMinMaskPixels) continue;
        part_bitmaps[pi] = bitmap;
      }

      const auto emit = [&](std::vector<std::uint8_t> bitmap, MaskLevel level,
                            const std::string& emb_name, const std::vector<int>& members,
                            const std::vector<int>& candidate_parts) {
        Mask2D mask;
        mask.view_id = ci;
        mask.mask_id = next_mask_id;
        mask.level = level;
        mask.width = W;
        mask.height = H;
        mask.bitmap = std::move(bitmap);
        // Self-check: the engine's visibility rule must recover the
        // membership exactly, otherwise the mask is discarded as occluded.
        const auto support =
            visible_gaussians(state, mask, defaults.opacity_min, defaults.depth_tol);
        std::vector<int> sorted_members = members;
        std::sort(sorted_members.begin(), sorted_members.end());
        if (support != sorted_members) {
          if (std::getenv("SPLATJOINT_ORACLE_DEBUG")) {
            std::vector<int> missing, foreign;
            std::set_difference(sorted_members.begin(), sorted_members.end(), support.begin(),
                                support.end(), std::back_inserter(missing));
            std::set_difference(support.begin(), support.end(), sorted_members.begin(),
                                sorted_members.end(), std::back_inserter(foreign));
            std::fprintf(stderr, "mask drop: view=%d level=%d name=%s missing=%zu foreign=%zu\n",
                         ci, static_cast<int>(level), emb_name.c_str(), missing.size(),
                         foreign.size());
          }
          return false;
        }
        Eigen::VectorXd emb = gt.embeddings.at(emb_name);
        for (int k = 0; k < spec.d_feat; ++k) emb[k] += spec.feature_sigma * noise.normal();
        mask.feature = emb.normalized().cast<float>();
        mask.pixel_features = make_pixel_features(mask.set_pixels(), candidate_parts);
        state.masks.push_back(std::move(mask));
        ++next_mask_id;
        return true;
      };

      for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
        if (part_bitmaps[pi].empty()) continue;
        emit(part_bitmaps[pi], MaskLevel::Part, spec.parts[pi].name,
             is_t2 ? gt.parts[pi].members_t2 : gt.parts[pi].members_t,
             {static_cast<int>(pi)});
      }
      // Instance masks: union over each object's parts.
      for (const auto& [obj_name, obj_id] : object_ids) {
        std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(W) * H, 0);
        std::vector<int> members;
        std::vector<int> candidates;
        bool any = false;
        for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
          if (spec.parts[pi].object_name != obj_name) continue;
          const auto& pm = is_t2 ? gt.parts[pi].members_t2 : gt.parts[pi].members_t;
          members.insert(members.end(), pm.begin(), pm.end());
          if (pm.empty()) continue;
          candidates.push_back(static_cast<int>(pi));
          if (part_bitmaps[pi].empty()) continue;
          any = true;
          for (std::size_t k = 0; k < bitmap.size(); ++k) bitmap[k] |= part_bitmaps[pi][k];
        }
        if (!any || members.empty()) continue;
        emit(std::move(bitmap), MaskLevel::Instance, obj_name, members, candidates);
      }
    }
  };
  build_state(st, false, noise_t);
  build_state(st2, true, noise_t2);

  // Every part present in a state must keep a usable number of masks.
  for (std::size_t pi = 0; pi < spec.parts.size(); ++pi) {
    for (int s = 0; s < 2; ++s) {
      const SceneState& state = s == 0 ? st : st2;
      const auto& members = s == 0 ? gt.parts[pi].members_t : gt.parts[pi].members_t2;
      if (members.empty()) continue;
      int n_masks = 0;
      for (const auto& m : state.masks)
        if (m.level == MaskLevel::Part) {
          const auto sup = visible_gaussians(state, m, defaults.opacity_min, defaults.depth_tol);
          if (!sup.empty() && sup.front() == members.front() && sup == members) ++n_masks;
        }
      // Articulated parts need cross-view evidence; a clean singleton mask
      // is enough for a static part.
      const int need = spec.parts[pi].joint ? 2 : 1;
      if (n_masks < need)
        throw SpecError("part " + spec.parts[pi].name + " has only " +
                        std::to_string(n_masks) + " unoccluded masks in state " +
                        (s == 0 ? "t" : "t'") + "; adjust the spec");
    }
  }

  st.validate();
  st2.validate();
  return out;
}
}  // namespace

std::vector<std::pair<int, Vec2>> oracle_correspondences(const OraclePair& pair, int part_index,
                                                         int view_id) {
  const auto& pgt = pair.gt.parts[part_index];
  std::vector<std::pair<int, Vec2>> out;
  if (pgt.members_t2.empty()) return out;
  // The part's mask in this target view, if it was emitted: the one whose
  // support is exactly the part membership.
  std::vector<int> members = pgt.members_t2;
  std::sort(members.begin(), members.end());
  const EngineConfig defaults;
  const Mask2D* mask = nullptr;
  for (const auto& m : pair.state_t2.masks) {
    if (m.view_id != view_id || m.level != MaskLevel::Part) continue;
    if (visible_gaussians(pair.state_t2, m, defaults.opacity_min, defaults.depth_tol) ==
        members) {
      mask = &m;
      break;
    }
  }
  if (!mask) return out;
  for (std::size_t k = 0; k < pgt.members_t2.size(); ++k) {
    const auto proj = try_project(pair.state_t2.views[view_id].camera,
                                  pair.state_t2.gaussians[pgt.members_t2[k]].position);
    if (!proj) continue;
    const int ix = static_cast<int>(std::floor(proj->pixel.x() + 0.5));
    const int iy = static_cast<int>(std::floor(proj->pixel.y() + 0.5));
    if (!mask->test(ix, iy)) continue;
    out.emplace_back(k < pgt.members_t.size() ? pgt.members_t[k] : -1, proj->pixel);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

OraclePartSpec make_part(const std::string& name, const std::string& object_name, Vec3 size,
                         Vec3 center, int count, Vec3 color) {
  OraclePartSpec p;
  p.name = name;
  p.object_name = object_name;
  p.size = size;
  p.center = center;
  p.gaussian_count = count;
  p.base_color = color;
  return p;
}

JointParams revolute(const Vec3& axis, const Vec3& point_on_axis, double degrees) {
  JointParams j;
  j.kind = JointKind::Revolute;
  j.axis = axis.normalized();
  j.pivot = point_on_axis - point_on_axis.dot(j.axis) * j.axis;
  j.magnitude = degrees * M_PI / 180.0;
  return j;
}

JointParams prismatic(const Vec3& axis, double meters) {
  JointParams j;
  j.kind = JointKind::Prismatic;
  j.axis = axis.normalized();
  j.pivot = Vec3::Zero();
  j.magnitude = meters;
  return j;
}

}  // namespace

std::vector<std::string> oracle_preset_names() {
  return {"fridge", "laptop", "storage-m", "scene", "drawer-occ"};
}

OracleSpec oracle_preset(const std::string& name, std::uint64_t seed) {
  OracleSpec s;
  s.name = name;
  s.seed = seed;
  s.orbit_radius = 1.8;
  const Quat flat = quat_from_axis_angle({1, 0, 0}, M_PI / 2.0);
  if (name == "fridge") {
    s.parts.push_back(make_part("fridge_body", "fridge", {0.5, 0.008, 0.6}, {0, 0, 0}, 420,
                                {0.85, 0.85, 0.9}));
    s.parts.push_back(make_part("fridge_door", "fridge", {0.38, 0.008, 0.46}, {0.03, 0.12, 0.03},
                                230, {0.75, 0.8, 0.85}));
    s.parts.back().joint = revolute({0, 0, 1}, {-0.16, 0.12, 0}, 30.0);
    s.parts.push_back(make_part("side_table", "table", {0.3, 0.008, 0.3}, {0.45, 0.02, -0.36},
                                200, {0.5, 0.35, 0.2}));
    s.parts.back().orientation = flat;
    s.parts.push_back(make_part("floor_mat", "mat", {0.3, 0.008, 0.2}, {-0.28, -0.16, -0.48},
                                150, {0.3, 0.45, 0.3}));
    s.parts.back().orientation = flat;
  } else if (name == "laptop") {
    s.parts.push_back(make_part("laptop_base", "laptop", {0.32, 0.008, 0.22}, {0, 0.04, 0}, 250,
                                {0.35, 0.35, 0.4}));
    s.parts.back().orientation = flat;
    s.parts.push_back(make_part("laptop_screen", "laptop", {0.32, 0.008, 0.21}, {0, -0.1, 0.14},
                                230, {0.15, 0.15, 0.2}));
    s.parts.back().joint = revolute({1, 0, 0}, {0, -0.1, 0.035}, 40.0);
    s.parts.push_back(make_part("desk", "desk", {0.55, 0.008, 0.3}, {0, -0.33, -0.06}, 370,
                                {0.55, 0.4, 0.25}));
    s.parts.back().orientation = flat;
    s.parts.push_back(make_part("mug", "mug", {0.09, 0.008, 0.1}, {0.28, -0.14, 0.05}, 150,
                                {0.7, 0.3, 0.25}));
    s.parts.back().shape = "cylinder-panel";
    s.parts.back().panel_radius = 0.05;
  } else if (name == "storage-m") {
    s.parts.push_back(make_part("storage_body", "storage", {0.55, 0.008, 0.62}, {0, 0, 0}, 430,
                                {0.6, 0.5, 0.4}));
    s.parts.push_back(make_part("storage_door", "storage", {0.24, 0.008, 0.42},
                                {-0.14, 0.1, -0.08}, 200, {0.65, 0.55, 0.45}));
    s.parts.back().joint = revolute({0, 0, 1}, {-0.26, 0.1, 0}, 35.0);
    s.parts.push_back(make_part("storage_drawer", "storage", {0.22, 0.008, 0.16},
                                {0.13, 0.1, 0.2}, 190, {0.7, 0.6, 0.5}));
    s.parts.back().joint = prismatic({0, 1, 0}, 0.15);
    s.parts.push_back(make_part("side_panel", "shelf", {0.34, 0.008, 0.4}, {0.42, -0.12, -0.1},
                                240, {0.45, 0.5, 0.55}));
    s.parts.back().orientation = quat_from_axis_angle({0, 0, 1}, M_PI / 3.0);
  } else if (name == "scene") {
    s.random_global = true;
    s.parts.push_back(make_part("cabinet_body", "cabinet", {0.3, 0.008, 0.38}, {-0.35, 0, 0.1},
                                300, {0.6, 0.5, 0.4}));
    s.parts.push_back(make_part("cabinet_door", "cabinet", {0.15, 0.008, 0.26},
                                {-0.39, 0.08, 0.07}, 170, {0.66, 0.56, 0.46}));
    s.parts.back().joint = revolute({0, 0, 1}, {-0.46, 0.08, 0}, 28.0);
    s.parts.push_back(make_part("console_body", "console", {0.26, 0.008, 0.3}, {0.35, 0.04, -0.08},
                                280, {0.4, 0.45, 0.55}));
    s.parts.push_back(make_part("console_tray", "console", {0.2, 0.008, 0.16},
                                {0.35, 0.14, -0.1}, 180, {0.5, 0.55, 0.6}));
    s.parts.back().joint = prismatic({0, 1, 0}, 0.1);
    s.parts.push_back(make_part("kiosk_panel", "kiosk", {0.26, 0.008, 0.24}, {0.0, -0.35, 0.0},
                                240, {0.5, 0.4, 0.5}));
    s.parts.back().shape = "cylinder-panel";
    s.parts.back().panel_radius = 0.3;
    s.parts.back().orientation = quat_from_axis_angle({0, 0, 1}, M_PI);
    s.parts.push_back(make_part("floor_mat", "mat", {0.3, 0.008, 0.22}, {0, 0.28, -0.33}, 220,
                                {0.35, 0.4, 0.3}));
    s.parts.back().orientation = flat;
  } else if (name == "drawer-occ") {
    s.parts.push_back(make_part("chest_body", "chest", {0.46, 0.008, 0.5}, {0, 0, 0}, 360,
                                {0.55, 0.45, 0.35}));
    s.parts.push_back(make_part("chest_drawer", "chest", {0.26, 0.008, 0.2}, {0, 0.1, -0.08}, 210,
                                {0.62, 0.52, 0.42}));
    s.parts.back().joint = prismatic({0, 1, 0}, 0.2);
    // Interior shelf hidden while the drawer is closed: absent from state t.
    s.parts.push_back(make_part("chest_shelf", "chest", {0.22, 0.008, 0.14}, {0, 0.04, 0.14}, 160,
                                {0.5, 0.42, 0.34}));
    s.parts.back().presence = PartPresence::OnlyTPrime;
    // Backing strip the opened drawer obscures in state t'.
    s.parts.push_back(make_part("chest_back", "chest", {0.26, 0.008, 0.18}, {0, -0.05, -0.38},
                                150, {0.48, 0.4, 0.32}));
    s.parts.back().presence = PartPresence::OnlyT;
    s.parts.push_back(make_part("side_board", "board", {0.34, 0.008, 0.4}, {0.4, -0.1, -0.05},
                                260, {0.45, 0.5, 0.55}));
    s.parts.back().orientation = quat_from_axis_angle({0, 0, 1}, M_PI / 2.5);
  } else {
    throw SpecError("unknown oracle preset: " + name);
  }
  return s;
}

}  // namespace splatjoint

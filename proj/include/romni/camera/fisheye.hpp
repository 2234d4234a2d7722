#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "romni/core/error.hpp"
#include "romni/core/vec3.hpp"

namespace romni {

struct Projection {
  double u = 0, v = 0;
  bool valid = false;
};

/// Equidistant fisheye camera: radius from the principal point is
/// focal * incidence angle, which keeps working past 90 degrees and so
/// supports FoV > 180.
struct FisheyeCamera {
  std::string name;
  double focal = 0;              // pixels per radian
  double u0 = 0, v0 = 0;         // principal point
  double fov_deg = 0;            // full field of view
  int width = 0, height = 0;
  Mat3 R;                        // rig -> camera rotation
  Vec3 t;                        // rig -> camera translation, meters

  double half_fov_rad() const { return fov_deg * (M_PI / 180.0) * 0.5; }

  Vec3 center() const { return (R.transposed() * t) * -1.0; }  // in rig frame

  /// Project a rig-frame point. With at_infinity the argument is a pure
  /// direction and translation is ignored (the d_n = 0 sweeping sphere).
  Projection project(const Vec3& p_rig, bool at_infinity = false) const {
    if (!p_rig.finite()) throw InputError("project: non-finite point");
    Vec3 pc = at_infinity ? R * p_rig : R * p_rig + t;
    double n = pc.norm();
    if (n < 1e-12) return {u0, v0, false};  // at the camera center
    double rxy = std::sqrt(pc.x * pc.x + pc.y * pc.y);
    double alpha = std::atan2(rxy, pc.z);
    Projection pr;
    if (rxy < 1e-15) {
      pr.u = u0;
      pr.v = v0;
    } else {
      double rho = focal * alpha;
      pr.u = u0 + rho * pc.x / rxy;
      pr.v = v0 + rho * pc.y / rxy;
    }
    pr.valid = alpha <= half_fov_rad() && pr.u >= 0.0 && pr.u <= width - 1.0 && pr.v >= 0.0 &&
               pr.v <= height - 1.0;
    return pr;
  }

  /// Inverse of project on the valid domain; unit ray in the camera frame.
  Vec3 unproject(double u, double v) const {
    double dx = u - u0, dy = v - v0;
    double rho = std::sqrt(dx * dx + dy * dy);
    double alpha = rho / focal;
    if (alpha > half_fov_rad() + 1e-12)
      throw InputError("unproject: pixel implies incidence beyond the field of view");
    if (rho < 1e-12) return {0, 0, 1};
    double s = std::sin(alpha) / rho;
    return {dx * s, dy * s, std::cos(alpha)};
  }

  /// Camera-frame ray expressed in the rig frame.
  Vec3 ray_in_rig(double u, double v) const { return R.transposed() * unproject(u, v); }
};

struct RigCalibration {
  std::vector<FisheyeCamera> cameras;  // order: front, right, back, left
  double baseline_m = 0;

  void validate() const {
    if (cameras.size() != 4)
      throw CalibrationError("cameras", "expected 4 cameras, got " + std::to_string(cameras.size()));
    if (!(baseline_m > 0)) throw CalibrationError("baseline_m", "must be positive");
    static const Vec3 axes[4] = {{0, 0, 1}, {1, 0, 0}, {0, 0, -1}, {-1, 0, 0}};
    static const char* names[4] = {"front", "right", "back", "left"};
    Vec3 centroid{0, 0, 0};
    for (size_t i = 0; i < 4; ++i) {
      const auto& c = cameras[i];
      std::string who = "cameras[" + std::to_string(i) + "]";
      if (c.width <= 0 || c.height <= 0) throw CalibrationError(who + ".resolution", "must be positive");
      if (!(c.focal > 0)) throw CalibrationError(who + ".focal_px_per_rad", "must be positive");
      if (!(c.fov_deg > 180.0 && c.fov_deg < 360.0))
        throw CalibrationError(who + ".fov_deg", "must lie in (180, 360)");
      if (c.R.orthonormality_error() > 1e-9)
        throw CalibrationError(who + ".rotation_row_major", "not orthonormal");
      if (c.R.det() < 0) throw CalibrationError(who + ".rotation_row_major", "determinant is negative");
      // optical axis (camera +z) expressed in the rig frame is row 2 of R
      Vec3 axis{c.R(2, 0), c.R(2, 1), c.R(2, 2)};
      if ((axis - axes[i]).norm() > 1e-6)
        throw CalibrationError(who + ".rotation_row_major",
                               std::string("optical axis must face ") + names[i]);
      centroid = centroid + c.center();
    }
    if ((centroid / 4.0).norm() > 1e-6)
      throw CalibrationError("cameras", "camera centers are not centered on the rig origin");
  }
};

namespace detail {

inline double jget_num(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw CalibrationError(where + "." + key, "missing");
  if (!j[key].is_number()) throw CalibrationError(where + "." + key, "must be a number");
  return j[key].get<double>();
}

}  // namespace detail

inline RigCalibration rig_from_json(const nlohmann::json& j) {
  RigCalibration rig;
  if (!j.contains("baseline_m")) throw CalibrationError("baseline_m", "missing");
  rig.baseline_m = j["baseline_m"].get<double>();
  if (!j.contains("cameras") || !j["cameras"].is_array())
    throw CalibrationError("cameras", "missing or not an array");
  for (size_t i = 0; i < j["cameras"].size(); ++i) {
    const auto& cj = j["cameras"][i];
    std::string who = "cameras[" + std::to_string(i) + "]";
    FisheyeCamera c;
    if (!cj.contains("name")) throw CalibrationError(who + ".name", "missing");
    c.name = cj["name"].get<std::string>();
    c.focal = detail::jget_num(cj, "focal_px_per_rad", who);
    c.fov_deg = detail::jget_num(cj, "fov_deg", who);
    auto need_array = [&](const char* key, size_t n) -> const nlohmann::json& {
      if (!cj.contains(key) || !cj[key].is_array() || cj[key].size() != n)
        throw CalibrationError(who + "." + key, "must be an array of " + std::to_string(n));
      return cj[key];
    };
    const auto& pp = need_array("principal_point", 2);
    c.u0 = pp[0].get<double>();
    c.v0 = pp[1].get<double>();
    const auto& res = need_array("resolution", 2);
    c.width = res[0].get<int>();
    c.height = res[1].get<int>();
    const auto& rot = need_array("rotation_row_major", 9);
    for (int k = 0; k < 9; ++k) c.R.m[k] = rot[k].get<double>();
    const auto& tr = need_array("translation_m", 3);
    c.t = {tr[0].get<double>(), tr[1].get<double>(), tr[2].get<double>()};
    rig.cameras.push_back(c);
  }
  rig.validate();
  return rig;
}

inline nlohmann::json rig_to_json(const RigCalibration& rig) {
  nlohmann::json j;
  j["baseline_m"] = rig.baseline_m;
  j["cameras"] = nlohmann::json::array();
  for (const auto& c : rig.cameras) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["focal_px_per_rad"] = c.focal;
    cj["principal_point"] = {c.u0, c.v0};
    cj["fov_deg"] = c.fov_deg;
    cj["resolution"] = {c.width, c.height};
    cj["rotation_row_major"] = std::vector<double>(c.R.m, c.R.m + 9);
    cj["translation_m"] = {c.t.x, c.t.y, c.t.z};
    j["cameras"].push_back(cj);
  }
  return j;
}

inline RigCalibration load_rig(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path, "cannot open calibration file");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CalibrationError(path, std::string("parse failure: ") + e.what());
  }
  return rig_from_json(j);
}

inline void save_rig(const RigCalibration& rig, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError(path, "cannot open for writing");
  f << rig_to_json(rig).dump(2) << "\n";
}

/// Square rig: cameras on the +z, +x, -z, -x axes at baseline/2 from the
/// origin, all pointing outward, camera y pointing down (-y of the rig).
/// The focal length places the FoV-edge circle just inside the image.
inline RigCalibration make_default_rig(int resolution = 640, double baseline_m = 0.4,
                                       double fov_deg = 220.0) {
  RigCalibration rig;
  rig.baseline_m = baseline_m;
  double half_fov = fov_deg * (M_PI / 180.0) * 0.5;
  double focal = (resolution / 2.0 - 1.0) / half_fov;
  const char* names[4] = {"front", "right", "back", "left"};
  const Vec3 centers[4] = {{0, 0, baseline_m / 2},
                           {baseline_m / 2, 0, 0},
                           {0, 0, -baseline_m / 2},
                           {-baseline_m / 2, 0, 0}};
  const Mat3 rotations[4] = {
      Mat3{{-1, 0, 0, 0, -1, 0, 0, 0, 1}},  // front: +z
      Mat3{{0, 0, 1, 0, -1, 0, 1, 0, 0}},   // right: +x
      Mat3{{1, 0, 0, 0, -1, 0, 0, 0, -1}},  // back: -z
      Mat3{{0, 0, -1, 0, -1, 0, -1, 0, 0}}  // left: -x
  };
  for (int i = 0; i < 4; ++i) {
    FisheyeCamera c;
    c.name = names[i];
    c.focal = focal;
    c.u0 = (resolution - 1) / 2.0;
    c.v0 = (resolution - 1) / 2.0;
    c.fov_deg = fov_deg;
    c.width = resolution;
    c.height = resolution;
    c.R = rotations[i];
    c.t = (rotations[i] * centers[i]) * -1.0;
    rig.cameras.push_back(c);
  }
  rig.validate();
  return rig;
}

}  // namespace romni

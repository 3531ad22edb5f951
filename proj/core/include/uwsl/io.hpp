// SPDX-License-Identifier: Apache-2.0
//
// File formats and configuration. Traces and trajectories are line-delimited
// text with a one-line header naming columns and units; point clouds are
// ASCII PLY with a per-vertex frame id; calibration results and run reports
// are ordered key = value text with explicit units. All writers format
// doubles with %.17g so equal inputs produce byte-identical files.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "uwsl/fusion.hpp"
#include "uwsl/handeye.hpp"
#include "uwsl/light_plane.hpp"
#include "uwsl/recon.hpp"

namespace uwsl {
namespace io {

/// key = value configuration with dotted keys; '#' starts a comment.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string str(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  std::string require_str(const std::string& key) const;
  double require_number(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

std::string format_double(double v);  ///< %.17g

// sensor traces
void write_imu(const std::string& path,
               const std::vector<fusion::ImuSample>& samples);
std::vector<fusion::ImuSample> read_imu(const std::string& path);

void write_dvl(const std::string& path,
               const std::vector<fusion::DvlSample>& samples);
std::vector<fusion::DvlSample> read_dvl(const std::string& path);

// pose trajectories (t, position, quaternion)
struct PoseRecord {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();
};
void write_poses(const std::string& path, const std::vector<PoseRecord>& poses);
std::vector<PoseRecord> read_poses(const std::string& path);

// point clouds (ASCII PLY with frame_id)
void write_cloud_ply(const std::string& path, const recon::PointCloud& cloud);
recon::PointCloud read_cloud_ply(const std::string& path);

// stripe frames
void write_frames(const std::string& path,
                  const std::vector<recon::StripeFrame>& frames);
std::vector<recon::StripeFrame> read_frames(const std::string& path);

// hand-eye pose pairs
void write_pose_pairs(const std::string& path,
                      const std::vector<handeye::PosePair>& pairs);
std::vector<handeye::PosePair> read_pose_pairs(const std::string& path);

// extrinsic calibration result
void write_calibration(const std::string& path,
                       const handeye::CalibrationResult& result);
geom::RigidTransform read_calibration(const std::string& path);

// light-plane calibration (pre/post rotation planes and servo axis)
struct PlaneCalibration {
  lightplane::LightPlane plane0;
  lightplane::LightPlane plane1;
  lightplane::RotationAxis axis;
};
void write_plane_calibration(const std::string& path,
                             const PlaneCalibration& calib);
PlaneCalibration read_plane_calibration(const std::string& path);

/// Ordered key = value report with a stage/seed tag per metric and the
/// wall-clock fields isolated in the header.
class Report {
 public:
  Report(const std::string& tool, const std::string& version);

  void set_header(const std::string& key, const std::string& value);
  void add(const std::string& stage, const std::string& key, double value,
           const std::string& unit);
  void add_text(const std::string& stage, const std::string& key,
                const std::string& value);

  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> header_;
  std::vector<std::string> lines_;
};

}  // namespace io
}  // namespace uwsl

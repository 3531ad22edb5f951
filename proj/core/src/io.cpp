// SPDX-License-Identifier: Apache-2.0

#include "uwsl/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "uwsl/errors.hpp"

namespace uwsl {
namespace io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open file: " + path);
  }
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write file: " + path);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + what + ": '" + s + "'");
  }
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) {
    throw ConfigError("config: empty key");
  }
  map_[key] = value;
}

bool Config::has(const std::string& key) const { return map_.count(key) > 0; }

std::string Config::str(const std::string& key,
                        const std::string& fallback) const {
  const auto it = map_.find(key);
  return it == map_.end() ? fallback : it->second;
}

double Config::number(const std::string& key, double fallback) const {
  const auto it = map_.find(key);
  return it == map_.end() ? fallback : parse_double(it->second, key);
}

int Config::integer(const std::string& key, int fallback) const {
  return int(number(key, fallback));
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto it = map_.find(key);
  if (it == map_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string Config::require_str(const std::string& key) const {
  const auto it = map_.find(key);
  if (it == map_.end()) {
    throw ConfigError("missing required config key: " + key);
  }
  return it->second;
}

double Config::require_number(const std::string& key) const {
  return parse_double(require_str(key), key);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_imu(const std::string& path,
               const std::vector<fusion::ImuSample>& samples) {
  std::ofstream out = open_out(path);
  out << "# t[s] ax[m/s^2] ay[m/s^2] az[m/s^2] gx[rad/s] gy[rad/s] gz[rad/s]\n";
  for (const fusion::ImuSample& s : samples) {
    out << format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ' ' << format_double(s.accel(i));
    for (int i = 0; i < 3; ++i) out << ' ' << format_double(s.gyro(i));
    out << '\n';
  }
}

std::vector<fusion::ImuSample> read_imu(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<fusion::ImuSample> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    fusion::ImuSample s;
    if (!(ls >> s.t >> s.accel(0) >> s.accel(1) >> s.accel(2) >> s.gyro(0) >>
          s.gyro(1) >> s.gyro(2))) {
      throw ConfigError("bad IMU record in " + path + ": '" + line + "'");
    }
    out.push_back(s);
  }
  return out;
}

void write_dvl(const std::string& path,
               const std::vector<fusion::DvlSample>& samples) {
  std::ofstream out = open_out(path);
  out << "# t[s] vx[m/s] vy[m/s] vz[m/s] lambda[0/1]\n";
  for (const fusion::DvlSample& s : samples) {
    out << format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ' ' << format_double(s.velocity(i));
    out << ' ' << s.health << '\n';
  }
}

std::vector<fusion::DvlSample> read_dvl(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<fusion::DvlSample> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    fusion::DvlSample s;
    if (!(ls >> s.t >> s.velocity(0) >> s.velocity(1) >> s.velocity(2) >>
          s.health)) {
      throw ConfigError("bad DVL record in " + path + ": '" + line + "'");
    }
    out.push_back(s);
  }
  return out;
}

void write_poses(const std::string& path,
                 const std::vector<PoseRecord>& poses) {
  std::ofstream out = open_out(path);
  out << "# t[s] px[m] py[m] pz[m] qw qx qy qz\n";
  for (const PoseRecord& r : poses) {
    out << format_double(r.t);
    for (int i = 0; i < 3; ++i) out << ' ' << format_double(r.p(i));
    out << ' ' << format_double(r.q.w()) << ' ' << format_double(r.q.x())
        << ' ' << format_double(r.q.y()) << ' ' << format_double(r.q.z())
        << '\n';
  }
}

std::vector<PoseRecord> read_poses(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<PoseRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    PoseRecord r;
    double w, x, y, z;
    if (!(ls >> r.t >> r.p(0) >> r.p(1) >> r.p(2) >> w >> x >> y >> z)) {
      throw ConfigError("bad pose record in " + path + ": '" + line + "'");
    }
    r.q = Quat(w, x, y, z).normalized();
    out.push_back(r);
  }
  return out;
}

void write_cloud_ply(const std::string& path, const recon::PointCloud& cloud) {
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "property int frame_id\nend_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const int id = i < cloud.frame_ids.size() ? cloud.frame_ids[i] : 0;
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
        << format_double(p.z()) << ' ' << id << '\n';
  }
}

recon::PointCloud read_cloud_ply(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.rfind("element vertex", 0) == 0) {
      count = std::stoul(line.substr(std::string("element vertex").size()));
    }
    if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) {
    throw ConfigError("not a PLY cloud: " + path);
  }
  recon::PointCloud cloud;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw ConfigError("truncated PLY cloud: " + path);
    }
    std::istringstream ls(line);
    Vec3 p;
    int id = 0;
    if (!(ls >> p(0) >> p(1) >> p(2) >> id)) {
      throw ConfigError("bad PLY vertex in " + path + ": '" + line + "'");
    }
    cloud.push_back(p, id);
  }
  return cloud;
}

void write_frames(const std::string& path,
                  const std::vector<recon::StripeFrame>& frames) {
  std::ofstream out = open_out(path);
  out << "# frame <id> <t[s]> <servo[rad]> <mu> <npix>, then npix lines u[px] "
         "v[px]\n";
  for (const recon::StripeFrame& f : frames) {
    out << "frame " << f.id << ' ' << format_double(f.t) << ' '
        << format_double(f.servo_angle) << ' ' << f.motion_flag << ' '
        << f.pixels.size() << '\n';
    for (const Vec2& p : f.pixels) {
      out << format_double(p.x()) << ' ' << format_double(p.y()) << '\n';
    }
  }
}

std::vector<recon::StripeFrame> read_frames(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<recon::StripeFrame> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    recon::StripeFrame f;
    std::size_t npix = 0;
    if (!(ls >> tag >> f.id >> f.t >> f.servo_angle >> f.motion_flag >>
          npix) ||
        tag != "frame") {
      throw ConfigError("bad frame header in " + path + ": '" + line + "'");
    }
    f.pixels.reserve(npix);
    for (std::size_t i = 0; i < npix; ++i) {
      if (!std::getline(in, line)) {
        throw ConfigError("truncated frame in " + path);
      }
      std::istringstream ps(line);
      Vec2 p;
      if (!(ps >> p(0) >> p(1))) {
        throw ConfigError("bad pixel in " + path + ": '" + line + "'");
      }
      f.pixels.push_back(p);
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_pose_pairs(const std::string& path,
                      const std::vector<handeye::PosePair>& pairs) {
  std::ofstream out = open_out(path);
  out << "# per line: camera motion qw qx qy qz tx[m] ty[m] tz[m], dvl motion "
         "qw qx qy qz tx[m] ty[m] tz[m], sigma diag 6 [m^2 m^2 m^2 rad^2 "
         "rad^2 rad^2]\n";
  auto put = [&](const geom::RigidTransform& T) {
    const Quat q(T.R);
    out << format_double(q.w()) << ' ' << format_double(q.x()) << ' '
        << format_double(q.y()) << ' ' << format_double(q.z());
    for (int i = 0; i < 3; ++i) out << ' ' << format_double(T.t(i));
  };
  for (const handeye::PosePair& p : pairs) {
    put(p.T_C);
    out << ' ';
    put(p.T_D);
    for (int i = 0; i < 6; ++i) out << ' ' << format_double(p.sigma(i, i));
    out << '\n';
  }
}

std::vector<handeye::PosePair> read_pose_pairs(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<handeye::PosePair> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    auto get = [&](geom::RigidTransform& T) {
      double w, x, y, z;
      if (!(ls >> w >> x >> y >> z >> T.t(0) >> T.t(1) >> T.t(2))) {
        throw ConfigError("bad pose pair in " + path + ": '" + line + "'");
      }
      T.R = Quat(w, x, y, z).normalized().toRotationMatrix();
    };
    handeye::PosePair p;
    get(p.T_C);
    get(p.T_D);
    p.sigma = Mat6::Zero();
    for (int i = 0; i < 6; ++i) {
      if (!(ls >> p.sigma(i, i))) {
        throw ConfigError("bad sigma in " + path + ": '" + line + "'");
      }
    }
    out.push_back(p);
  }
  return out;
}

void write_calibration(const std::string& path,
                       const handeye::CalibrationResult& result) {
  std::ofstream out = open_out(path);
  out << "uwsl-calibration v1\n";
  for (int r = 0; r < 3; ++r) {
    out << "rotation.row" << r << " =";
    for (int c = 0; c < 3; ++c) out << ' ' << format_double(result.X.R(r, c));
    out << '\n';
  }
  out << "translation =";
  for (int i = 0; i < 3; ++i) out << ' ' << format_double(result.X.t(i));
  out << " # [m]\n";
  out << "final_cost = " << format_double(result.final_cost) << '\n';
  out << "iterations = " << result.iterations << '\n';
  out << "pairs = " << result.residual_norms.size() << '\n';
}

geom::RigidTransform read_calibration(const std::string& path) {
  std::ifstream in = open_in(path);
  geom::RigidTransform T;
  std::string line;
  bool got_rot[3] = {false, false, false}, got_t = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    std::istringstream vs(line.substr(eq + 1));
    for (int r = 0; r < 3; ++r) {
      if (key == "rotation.row" + std::to_string(r)) {
        vs >> T.R(r, 0) >> T.R(r, 1) >> T.R(r, 2);
        got_rot[r] = true;
      }
    }
    if (key == "translation") {
      vs >> T.t(0) >> T.t(1) >> T.t(2);
      got_t = true;
    }
  }
  if (!(got_rot[0] && got_rot[1] && got_rot[2] && got_t)) {
    throw ConfigError("incomplete calibration file: " + path);
  }
  return T;
}

void write_plane_calibration(const std::string& path,
                             const PlaneCalibration& calib) {
  std::ofstream out = open_out(path);
  out << "uwsl-plane-calibration v1\n";
  auto put_plane = [&](const char* name, const lightplane::LightPlane& p) {
    out << name << " = " << format_double(p.a) << ' ' << format_double(p.b)
        << ' ' << format_double(p.c) << ' ' << format_double(p.d)
        << " # a b c d[m]\n";
  };
  put_plane("plane0", calib.plane0);
  put_plane("plane1", calib.plane1);
  out << "axis.direction = " << format_double(calib.axis.direction.x()) << ' '
      << format_double(calib.axis.direction.y()) << ' '
      << format_double(calib.axis.direction.z()) << '\n';
  out << "axis.point = " << format_double(calib.axis.point.x()) << ' '
      << format_double(calib.axis.point.y()) << ' '
      << format_double(calib.axis.point.z()) << " # [m]\n";
}

PlaneCalibration read_plane_calibration(const std::string& path) {
  std::ifstream in = open_in(path);
  PlaneCalibration calib;
  std::string line;
  bool got0 = false, got1 = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    std::istringstream vs(line.substr(eq + 1));
    if (key == "plane0" || key == "plane1") {
      double a, b, c, d;
      if (!(vs >> a >> b >> c >> d)) {
        throw ConfigError("bad plane in " + path);
      }
      const lightplane::LightPlane p(a, b, c, d, lightplane::Frame::kCamera);
      (key == "plane0" ? calib.plane0 : calib.plane1) = p;
      (key == "plane0" ? got0 : got1) = true;
    } else if (key == "axis.direction") {
      vs >> calib.axis.direction(0) >> calib.axis.direction(1) >>
          calib.axis.direction(2);
    } else if (key == "axis.point") {
      vs >> calib.axis.point(0) >> calib.axis.point(1) >> calib.axis.point(2);
    }
  }
  if (!got0 || !got1) {
    throw ConfigError("incomplete plane calibration: " + path);
  }
  return calib;
}

Report::Report(const std::string& tool, const std::string& version) {
  header_.emplace_back("report", "uwsl-report v1");
  header_.emplace_back("tool", tool);
  header_.emplace_back("version", version);
}

void Report::set_header(const std::string& key, const std::string& value) {
  header_.emplace_back(key, value);
}

void Report::add(const std::string& stage, const std::string& key,
                 double value, const std::string& unit) {
  lines_.push_back(stage + "." + key + " = " + format_double(value) +
                   (unit.empty() ? "" : " # [" + unit + "]"));
}

void Report::add_text(const std::string& stage, const std::string& key,
                      const std::string& value) {
  lines_.push_back(stage + "." + key + " = " + value);
}

std::string Report::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : header_) {
    out << k << " = " << v << '\n';
  }
  out << "---\n";
  for (const std::string& l : lines_) {
    out << l << '\n';
  }
  return out.str();
}

void Report::write(const std::string& path) const {
  std::ofstream out = open_out(path);
  out << to_string();
}

}  // namespace io
}  // namespace uwsl

#include "hest/dataset_io.hpp"

#include "hest/errors.hpp"

#include "json.hpp"

#include <Eigen/LU>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace hest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kGyroHeader = "t,wx,wy,wz";
constexpr std::string_view kFeaturesHeader = "t,count,id,x_ref,y_ref,u_pix,v_pix";
constexpr std::string_view kTruthHeader =
    "t,h00,h01,h02,h10,h11,h12,h20,h21,h22,g00,g01,g02,g10,g11,g12,g20,g21,g22,s_dot_norm";

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view field, const std::string& file, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(file, line, "malformed number '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError(file, line, "non-finite number '" + std::string(field) + "'");
  }
  return v;
}

long parse_int(std::string_view field, const std::string& file, std::size_t line) {
  field = trim(field);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(file, line, "malformed integer '" + std::string(field) + "'");
  }
  return v;
}

// Reads data rows after the mandatory header, calling fn(fields, line_no).
template <typename Fn>
void for_each_row(const fs::path& path, std::string_view header, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  const std::string file = path.string();
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) {
      continue;
    }
    if (!seen_header) {
      if (view != header) {
        throw ParseError(file, line_no, "expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      continue;
    }
    fn(split(view), line_no);
  }
  if (in.bad()) {
    throw IoError("read from '" + file + "' failed");
  }
  if (!seen_header) {
    throw ParseError(file, line_no, "missing header");
  }
}

void check_increasing(double t, double& last, bool& first, const std::string& file, std::size_t line) {
  if (!first && !(t > last)) {
    throw ParseError(file, line, "timestamp is not strictly increasing");
  }
  first = false;
  last = t;
}

void check_cadence(const std::vector<double>& times, double rate, const std::string& what,
                   std::vector<std::string>& warnings) {
  const double nominal = 1.0 / rate;
  std::size_t gaps = 0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    if (dt > 1.5 * nominal || dt < 0.5 * nominal) {
      ++gaps;
    }
  }
  if (gaps > 0) {
    std::ostringstream msg;
    msg << what << ": " << gaps << " interval(s) deviate from the nominal " << rate << " Hz cadence";
    warnings.push_back(msg.str());
  }
}

template <typename T>
T required(const json& j, const char* key, const std::string& file) {
  if (!j.contains(key)) {
    throw ParseError(file, 0, std::string("manifest is missing '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(file, 0, std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) {
    throw IoError("number formatting failed");
  }
  return std::string(buf, ptr);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  close_out(out, path);
}

void write_dataset(const SimDataset& data, const DatasetManifest& manifest, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  }

  json m;
  m["version"] = manifest.version;
  m["intrinsics"] = {{"fu", manifest.intrinsics.fu},
                     {"fv", manifest.intrinsics.fv},
                     {"cu", manifest.intrinsics.cu},
                     {"cv", manifest.intrinsics.cv}};
  m["gyro_rate"] = manifest.gyro_rate;
  m["cam_rate"] = manifest.cam_rate;
  if (manifest.noise) {
    m["noise"] = {{"sigma_g", manifest.noise->sigma_g},
                  {"sigma_r", manifest.noise->sigma_r},
                  {"sigma_m2", manifest.noise->sigma_m2}};
  } else {
    m["noise"] = nullptr;
  }
  const bool with_truth = manifest.truth_file.has_value() && !data.truth.empty();
  m["files"] = {{"gyro", manifest.gyro_file}, {"features", manifest.features_file}};
  m["files"]["truth"] = with_truth ? json(*manifest.truth_file) : json(nullptr);
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");

  {
    const fs::path path = dir / manifest.gyro_file;
    std::ofstream out = open_out(path);
    out << kGyroHeader << '\n';
    for (const GyroSample& g : data.gyro) {
      out << format_double(g.t) << ',' << format_double(g.omega.x()) << ',' << format_double(g.omega.y()) << ','
          << format_double(g.omega.z()) << '\n';
    }
    close_out(out, path);
  }
  {
    const fs::path path = dir / manifest.features_file;
    std::ofstream out = open_out(path);
    out << kFeaturesHeader << '\n';
    for (const FeatureFrame& f : data.frames) {
      out << format_double(f.t) << ',' << f.correspondences.size();
      for (const FeatureCorrespondence& c : f.correspondences) {
        out << ',' << c.id << ',' << format_double(c.p_ref.x() / c.p_ref.z()) << ','
            << format_double(c.p_ref.y() / c.p_ref.z()) << ',' << format_double(c.y_pix.x()) << ','
            << format_double(c.y_pix.y());
      }
      out << '\n';
    }
    close_out(out, path);
  }
  if (with_truth) {
    const fs::path path = dir / *manifest.truth_file;
    std::ofstream out = open_out(path);
    out << kTruthHeader << '\n';
    for (const TruthSample& s : data.truth) {
      out << format_double(s.t);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          out << ',' << format_double(s.H.matrix()(r, c));
        }
      }
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          out << ',' << format_double(s.Gamma(r, c));
        }
      }
      out << ',' << format_double(s.s_dot_norm) << '\n';
    }
    close_out(out, path);
  }
}

LoadedDataset read_dataset(const fs::path& manifest_path) {
  const std::string mfile = manifest_path.string();
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open manifest '" + mfile + "'");
  }
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(mfile, 0, std::string("invalid JSON: ") + e.what());
  }

  LoadedDataset out;
  DatasetManifest& man = out.manifest;
  man.version = required<int>(m, "version", mfile);
  if (man.version != kDatasetVersion) {
    throw UnsupportedVersionError("dataset version " + std::to_string(man.version) + " is not supported (expected " +
                                  std::to_string(kDatasetVersion) + ")");
  }
  const json intr = required<json>(m, "intrinsics", mfile);
  man.intrinsics.fu = required<double>(intr, "fu", mfile);
  man.intrinsics.fv = required<double>(intr, "fv", mfile);
  man.intrinsics.cu = required<double>(intr, "cu", mfile);
  man.intrinsics.cv = required<double>(intr, "cv", mfile);
  man.gyro_rate = required<double>(m, "gyro_rate", mfile);
  man.cam_rate = required<double>(m, "cam_rate", mfile);
  if (!(man.gyro_rate > 0.0) || !(man.cam_rate > 0.0)) {
    throw ParseError(mfile, 0, "rates must be positive");
  }
  if (m.contains("noise") && !m["noise"].is_null()) {
    NoiseConfig n;
    n.sigma_g = required<double>(m["noise"], "sigma_g", mfile);
    n.sigma_r = required<double>(m["noise"], "sigma_r", mfile);
    n.sigma_m2 = required<double>(m["noise"], "sigma_m2", mfile);
    man.noise = n;
  } else {
    man.noise.reset();
  }
  const json files = required<json>(m, "files", mfile);
  man.gyro_file = required<std::string>(files, "gyro", mfile);
  man.features_file = required<std::string>(files, "features", mfile);
  if (files.contains("truth") && !files["truth"].is_null()) {
    man.truth_file = files["truth"].get<std::string>();
  } else {
    man.truth_file.reset();
  }

  const fs::path base = manifest_path.parent_path();
  out.data.gyro_rate = man.gyro_rate;
  out.data.cam_rate = man.cam_rate;

  {
    const fs::path path = base / man.gyro_file;
    const std::string file = path.string();
    double last = 0.0;
    bool first = true;
    for_each_row(path, kGyroHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
      if (f.size() != 4) {
        throw ParseError(file, line, "expected 4 fields");
      }
      GyroSample g;
      g.t = parse_double(f[0], file, line);
      check_increasing(g.t, last, first, file, line);
      g.omega = Eigen::Vector3d(parse_double(f[1], file, line), parse_double(f[2], file, line),
                                parse_double(f[3], file, line));
      out.data.gyro.push_back(g);
    });
  }
  {
    const fs::path path = base / man.features_file;
    const std::string file = path.string();
    double last = 0.0;
    bool first = true;
    for_each_row(path, kFeaturesHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
      if (f.size() < 2) {
        throw ParseError(file, line, "expected t,count");
      }
      FeatureFrame frame;
      frame.t = parse_double(f[0], file, line);
      check_increasing(frame.t, last, first, file, line);
      const long count = parse_int(f[1], file, line);
      if (count < 0 || f.size() != 2 + 5 * static_cast<std::size_t>(count)) {
        throw ParseError(file, line, "field count does not match the correspondence count");
      }
      for (long i = 0; i < count; ++i) {
        const std::size_t o = 2 + 5 * static_cast<std::size_t>(i);
        FeatureCorrespondence c;
        c.id = static_cast<int>(parse_int(f[o], file, line));
        c.p_ref = Eigen::Vector3d(parse_double(f[o + 1], file, line), parse_double(f[o + 2], file, line), 1.0);
        c.y_pix = Eigen::Vector2d(parse_double(f[o + 3], file, line), parse_double(f[o + 4], file, line));
        frame.correspondences.push_back(c);
      }
      out.data.frames.push_back(std::move(frame));
    });
  }
  if (man.truth_file) {
    const fs::path path = base / *man.truth_file;
    const std::string file = path.string();
    double last = 0.0;
    bool first = true;
    for_each_row(path, kTruthHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
      if (f.size() != 20) {
        throw ParseError(file, line, "expected 20 fields");
      }
      TruthSample s;
      s.t = parse_double(f[0], file, line);
      check_increasing(s.t, last, first, file, line);
      Eigen::Matrix3d h;
      for (int k = 0; k < 9; ++k) {
        h(k / 3, k % 3) = parse_double(f[1 + static_cast<std::size_t>(k)], file, line);
        s.Gamma(k / 3, k % 3) = parse_double(f[10 + static_cast<std::size_t>(k)], file, line);
      }
      if (std::abs(h.determinant() - 1.0) > 1e-6) {
        throw ParseError(file, line, "truth homography does not have unit determinant");
      }
      s.H = SL3::from_matrix_unchecked(h);
      s.s_dot_norm = parse_double(f[19], file, line);
      out.data.truth.push_back(s);
    });
  }

  std::vector<double> times;
  for (const GyroSample& g : out.data.gyro) {
    times.push_back(g.t);
  }
  check_cadence(times, man.gyro_rate, "gyro", out.warnings);
  times.clear();
  for (const FeatureFrame& f : out.data.frames) {
    times.push_back(f.t);
  }
  check_cadence(times, man.cam_rate, "features", out.warnings);
  return out;
}

void write_step_csv(const fs::path& path, const std::vector<TrialReport>& runs) {
  std::size_t n_weights = 0;
  for (const TrialReport& r : runs) {
    for (const StepRecord& s : r.steps) {
      n_weights = std::max(n_weights, s.mode_weights.size());
    }
  }
  std::ofstream out = open_out(path);
  out << "run,t,r_k,nees,cov_trace,diverged";
  for (std::size_t i = 0; i < n_weights; ++i) {
    out << ",w" << i;
  }
  out << '\n';
  for (std::size_t run = 0; run < runs.size(); ++run) {
    for (const StepRecord& s : runs[run].steps) {
      out << run << ',' << format_double(s.t) << ',' << (std::isnan(s.r_k) ? "" : format_double(s.r_k)) << ','
          << (std::isnan(s.nees) ? "" : format_double(s.nees)) << ',' << format_double(s.cov_trace) << ','
          << (s.diverged ? 1 : 0);
      for (std::size_t i = 0; i < n_weights; ++i) {
        out << ',' << (i < s.mode_weights.size() ? format_double(s.mode_weights[i]) : "");
      }
      out << '\n';
    }
  }
  close_out(out, path);
}

}  // namespace hest

#pragma once

// On-disk dataset layout (all numbers are locale-independent decimals with 17
// significant digits):
//
//   manifest.json  {"version": 1, "intrinsics": {...}, "gyro_rate": ..,
//                   "cam_rate": .., "noise": {...} | null,
//                   "files": {"gyro": .., "features": .., "truth": .. | null}}
//   gyro.csv       t,wx,wy,wz
//   features.csv   t,count[,id,x_ref,y_ref,u_pix,v_pix]*count   one row per frame
//   truth.csv      t,h00..h22,g00..g22,s_dot_norm
//
// Reference points are normalized image coordinates (x_ref, y_ref, 1) in the
// fixed reference view. File names in the manifest are relative to it.

#include "hest/metrics.hpp"
#include "hest/models.hpp"
#include "hest/sim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hest {

inline constexpr int kDatasetVersion = 1;

struct DatasetManifest {
  int version = kDatasetVersion;
  CameraIntrinsics intrinsics;
  double gyro_rate = 90.0;
  double cam_rate = 30.0;
  std::optional<NoiseConfig> noise;
  std::string gyro_file = "gyro.csv";
  std::string features_file = "features.csv";
  /// Absent for recorded data without ground truth.
  std::optional<std::string> truth_file = "truth.csv";
};

struct LoadedDataset {
  DatasetManifest manifest;
  SimDataset data;
  /// Cadence irregularities; these never fail a read.
  std::vector<std::string> warnings;
};

/// Writes manifest.json and the streams it names into `dir`, creating it if
/// needed. The truth file is skipped when data.truth is empty. Throws IoError.
void write_dataset(const SimDataset& data, const DatasetManifest& manifest, const std::filesystem::path& dir);

/// Throws IoError, ParseError (with line number) or UnsupportedVersionError.
LoadedDataset read_dataset(const std::filesystem::path& manifest_path);

/// One row per step: run,t,r_k,nees,cov_trace,diverged,w0..w{n-1}.
void write_step_csv(const std::filesystem::path& path, const std::vector<TrialReport>& runs);

/// 17-significant-digit decimal form used by every writer.
std::string format_double(double v);

/// Writes `text` to `path`, throwing IoError with the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hest

#pragma once

#include "pws/integrate.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pws {

/// "%.17g"; non-finite values as nan / inf / -inf.
std::string format_number(double v);

/// Header t,x1..xn,region,h1,h2,hnorm.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
/// Inverse of write_trajectory_csv; throws InvalidInput on malformed rows.
Trajectory read_trajectory_csv(std::istream& is);
Trajectory read_trajectory_csv(const std::string& path);

struct RunManifest {
  int schema = 1;
  std::string command;
  std::string preset;
  std::map<std::string, std::string> parameters;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::vector<std::string> outputs;
  std::vector<std::string> argv;  ///< full command line, enough to replay the run
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);
/// Companion manifest path for an output file.
std::string manifest_path_for(const std::string& output);
/// UTC, ISO 8601.
std::string utc_timestamp();

void write_text_file(const std::string& path, const std::string& text);

}  // namespace pws

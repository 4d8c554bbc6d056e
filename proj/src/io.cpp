#include "pws/io.hpp"

#include <json.hpp>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

namespace pws {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (int i = 1; i <= traj.dim; ++i) os << ",x" << i;
  os << ",region,h1,h2,hnorm\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << format_number(traj.times[k]);
    for (int i = 0; i < traj.dim; ++i) os << ',' << format_number(traj.component(k, i));
    os << ',' << to_string(traj.regions[k]) << ',' << format_number(traj.h1[k]) << ','
       << format_number(traj.h2[k]) << ',' << format_number(traj.hnorm[k]) << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidInput, "cannot open " + path + " for writing");
  write_trajectory_csv(os, traj);
  if (!os) throw Error(ErrorCode::InvalidInput, "write failed: " + path);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || (errno == ERANGE && std::abs(v) > 1.0))
    throw Error(ErrorCode::InvalidInput, "bad number '" + s + "' in row " + std::to_string(row));
  return v;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::InvalidInput, "empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 5 || header.front() != "t" || header[header.size() - 4] != "region" ||
      header[header.size() - 3] != "h1" || header[header.size() - 2] != "h2" || header.back() != "hnorm")
    throw Error(ErrorCode::InvalidInput, "unexpected trajectory header: " + line);
  Trajectory traj;
  traj.dim = static_cast<int>(header.size()) - 5;
  for (int i = 0; i < traj.dim; ++i) {
    if (header[static_cast<std::size_t>(i) + 1] != "x" + std::to_string(i + 1))
      throw Error(ErrorCode::InvalidInput, "unexpected column " + header[static_cast<std::size_t>(i) + 1]);
  }
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::InvalidInput, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                               " cells, expected " + std::to_string(header.size()));
    traj.times.push_back(parse_number(cells[0], row));
    for (int i = 0; i < traj.dim; ++i) traj.data.push_back(parse_number(cells[static_cast<std::size_t>(i) + 1], row));
    const std::size_t r = static_cast<std::size_t>(traj.dim) + 1;
    const auto region = region_from_string(cells[r]);
    if (!region) throw Error(ErrorCode::InvalidInput, "bad region '" + cells[r] + "' in row " + std::to_string(row));
    traj.regions.push_back(*region);
    traj.h1.push_back(parse_number(cells[r + 1], row));
    traj.h2.push_back(parse_number(cells[r + 2], row));
    traj.hnorm.push_back(parse_number(cells[r + 3], row));
  }
  return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  return read_trajectory_csv(is);
}

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["schema"] = m.schema;
  j["command"] = m.command;
  j["preset"] = m.preset;
  j["parameters"] = m.parameters;
  j["seed"] = m.seed;
  j["timestamp"] = m.timestamp;
  j["outputs"] = m.outputs;
  j["argv"] = m.argv;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.schema = j.at("schema").get<int>();
    if (m.schema != 1) throw Error(ErrorCode::InvalidInput, "unsupported manifest schema " + std::to_string(m.schema));
    m.command = j.at("command").get<std::string>();
    m.preset = j.value("preset", "");
    m.parameters = j.value("parameters", std::map<std::string, std::string>{});
    m.seed = j.value("seed", std::uint64_t{0});
    m.timestamp = j.value("timestamp", "");
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.argv = j.value("argv", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("manifest: ") + e.what());
  }
  return m;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidInput, "cannot open " + path + " for writing");
  os << text;
  if (!os) throw Error(ErrorCode::InvalidInput, "write failed: " + path);
}

void write_manifest(const std::string& path, const RunManifest& m) { write_text_file(path, manifest_to_json(m)); }

RunManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return manifest_from_json(ss.str());
}

std::string manifest_path_for(const std::string& output) { return output + ".manifest.json"; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace pws

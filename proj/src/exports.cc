#include "terrafuse/exports.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "terrafuse/error.hpp"

namespace terrafuse {

namespace fs = std::filesystem;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& tok) {
  if (tok == "nan" || tok == "NaN" || tok == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("not a number: '" + tok + "'");
  }
  return v;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

std::string g9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void export_ply(const MultiLayerMap& map, const fs::path& path) {
  if (map.empty()) fail(ErrorCode::kEmptyMap, "refusing to export an empty map");
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\n"
      << "comment terrafuse multi-layer map, world frame, meters\n"
      << "comment cell_size " << g9(map.cell_size) << "\n"
      << "comment thermal in radiance counts, ndvi in [-1,1], nan = layer absent\n"
      << "element vertex " << map.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property double thermal\nproperty double ndvi\nproperty int frame_id\n"
      << "end_header\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const MapPoint& p : map.points) {
    out << g9(p.position.x()) << ' ' << g9(p.position.y()) << ' ' << g9(p.position.z()) << ' '
        << int(p.rgb[0]) << ' ' << int(p.rgb[1]) << ' ' << int(p.rgb[2]) << ' '
        << g9(p.thermal.value_or(nan)) << ' ' << g9(p.ndvi.value_or(nan)) << ' ' << p.frame_id
        << '\n';
  }
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

MultiLayerMap read_ply(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot open " + path.string());
  MultiLayerMap map;
  std::string line;
  int line_no = 0;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool ended = false;
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (line_no == 1 && key != "ply") bad("not a PLY file");
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") bad("only ASCII PLY is supported");
    } else if (key == "comment") {
      std::string what;
      ls >> what;
      if (what == "cell_size") ls >> map.cell_size;
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") bad("unexpected element '" + name + "'");
    } else if (key == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (key == "end_header") {
      ended = true;
      break;
    }
  }
  if (!ended) bad("missing end_header");
  const std::vector<std::string> expected = {"x", "y", "z", "red", "green", "blue",
                                             "thermal", "ndvi", "frame_id"};
  if (props != expected) bad("unexpected vertex properties");
  map.points.reserve(count);
  while (map.points.size() < count && std::getline(in, line)) {
    ++line_no;
    const auto tok = split(line, ' ');
    if (tok.size() != expected.size()) bad("expected 9 values");
    try {
      MapPoint p;
      p.position = Vec3(parse_real(tok[0]), parse_real(tok[1]), parse_real(tok[2]));
      for (int c = 0; c < 3; ++c) {
        const int v = std::stoi(tok[3 + c]);
        if (v < 0 || v > 255) bad("color out of range");
        p.rgb[c] = static_cast<std::uint8_t>(v);
      }
      const double th = parse_real(tok[6]);
      const double nd = parse_real(tok[7]);
      if (!std::isnan(th)) p.thermal = th;
      if (!std::isnan(nd)) p.ndvi = nd;
      p.frame_id = std::stoi(tok[8]);
      map.points.push_back(p);
    } catch (const std::invalid_argument& e) {
      bad(e.what());
    } catch (const std::out_of_range& e) {
      bad(e.what());
    }
  }
  if (map.points.size() != count) bad("fewer vertices than declared");
  return map;
}

std::string features_csv_header() {
  std::string h = "t_mid";
  for (const auto& n : feature_names()) h += "," + n;
  h += ",color_degenerate,thermal_degenerate,ndvi_degenerate,accel_degenerate";
  return h;
}

void export_features_csv(std::span<const FeatureVector> rows, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << features_csv_header() << '\n';
  for (const auto& r : rows) {
    out << format_real(r.t_mid);
    for (double v : r.values) out << ',' << format_real(v);
    out << ',' << int(r.flags.color) << ',' << int(r.flags.thermal) << ',' << int(r.flags.ndvi)
        << ',' << int(r.flags.accel) << '\n';
  }
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<FeatureVector> read_features_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot open " + path.string());
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != features_csv_header()) {
    fail(ErrorCode::kParseError, path.string() + ":1: unexpected header");
  }
  std::vector<FeatureVector> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tok.size() != 1 + kFeatureCount + 4) {
      fail(ErrorCode::kParseError, where + ": expected " + std::to_string(1 + kFeatureCount + 4) +
                                       " fields, found " + std::to_string(tok.size()));
    }
    try {
      FeatureVector r;
      r.t_mid = parse_real(tok[0]);
      for (int i = 0; i < kFeatureCount; ++i) r.values[i] = parse_real(tok[1 + i]);
      bool* flags[] = {&r.flags.color, &r.flags.thermal, &r.flags.ndvi, &r.flags.accel};
      for (int i = 0; i < 4; ++i) {
        const std::string& f = tok[1 + kFeatureCount + i];
        if (f != "0" && f != "1") throw std::invalid_argument("flag must be 0 or 1");
        *flags[i] = f == "1";
      }
      rows.push_back(r);
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::kParseError, where + ": " + e.what());
    }
  }
  return rows;
}

void export_events_csv(std::span<const ChangeEvent> events, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "t,feature_name,s_plus,s_minus,h\n";
  for (const auto& e : events) {
    out << format_real(e.t) << ',' << e.feature << ',' << format_real(e.s_plus) << ','
        << format_real(e.s_minus) << ',' << format_real(e.h) << '\n';
  }
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<ChangeEvent> read_events_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot open " + path.string());
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != "t,feature_name,s_plus,s_minus,h") {
    fail(ErrorCode::kParseError, path.string() + ":1: unexpected header");
  }
  std::vector<ChangeEvent> events;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tok.size() != 5) fail(ErrorCode::kParseError, where + ": expected 5 fields");
    try {
      events.push_back({parse_real(tok[0]), tok[1], parse_real(tok[2]), parse_real(tok[3]),
                        parse_real(tok[4])});
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::kParseError, where + ": " + e.what());
    }
  }
  return events;
}

}  // namespace terrafuse

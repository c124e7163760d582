#pragma once

// Scenario documents (JSON) and CSV result files.

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "romfdtd/error.hpp"
#include "romfdtd/simulator.hpp"

namespace romfdtd {

namespace io_detail {

using nlohmann::json;

inline std::string side_name(Side s) {
  switch (s) {
    case Side::kSouth: return "south";
    case Side::kNorth: return "north";
    case Side::kWest: return "west";
    case Side::kEast: return "east";
  }
  return "";
}

/// Read-only view of one JSON object that tracks consumed keys.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::kParseType, path_, "expected an object");
  }

  [[noreturn]] static void fail(ErrorCode code, const std::string& path, const std::string& what) {
    throw Error(code, (path.empty() ? std::string("document") : path) + ": " + what);
  }

  bool has(const std::string& key) const {
    used_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) const {
    used_.insert(key);
    if (!j_.contains(key)) fail(ErrorCode::kParseMissingField, sub(key), "required field is missing");
    return j_.at(key);
  }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }

  Node object(const std::string& key) const { return Node(at(key), sub(key)); }

  long integer(const std::string& key) const { return as_integer(at(key), sub(key)); }
  long integer_or(const std::string& key, long def) const { return has(key) ? integer(key) : def; }
  double number(const std::string& key) const { return as_number(at(key), sub(key)); }
  double number_or(const std::string& key, double def) const { return has(key) ? number(key) : def; }
  bool boolean_or(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(ErrorCode::kParseType, sub(key), "expected a boolean");
    return v.get<bool>();
  }
  std::string string(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(ErrorCode::kParseType, sub(key), "expected a string");
    return v.get<std::string>();
  }
  const json& array(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(ErrorCode::kParseType, sub(key), "expected an array");
    return v;
  }
  std::array<long, 2> int_pair(const std::string& key) const {
    const json& v = array(key);
    if (v.size() != 2) fail(ErrorCode::kParseType, sub(key), "expected two integers");
    return {as_integer(v[0], sub(key) + "[0]"), as_integer(v[1], sub(key) + "[1]")};
  }
  std::array<double, 2> num_pair(const std::string& key) const {
    const json& v = array(key);
    if (v.size() != 2) fail(ErrorCode::kParseType, sub(key), "expected two numbers");
    return {as_number(v[0], sub(key) + "[0]"), as_number(v[1], sub(key) + "[1]")};
  }

  /// Rejects keys that were never looked up.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) fail(ErrorCode::kParseUnknownKey, sub(it.key()), "unknown key");
  }

  static long as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(ErrorCode::kParseType, path, "expected an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<long>::max())) fail(ErrorCode::kParseInvariant, path, "integer out of range");
      return static_cast<long>(u);
    }
    return v.get<long>();
  }
  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(ErrorCode::kParseType, path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(ErrorCode::kParseInvariant, path, "number must be finite");
    return d;
  }

 private:
  const json& j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

inline void require(bool cond, const std::string& path, const std::string& what) {
  if (!cond) Node::fail(ErrorCode::kParseInvariant, path, what);
}

inline int to_int(long v, const std::string& path) {
  require(v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max(), path, "integer out of range");
  return static_cast<int>(v);
}

inline Side parse_side(const json& v, const std::string& path) {
  if (!v.is_string()) Node::fail(ErrorCode::kParseType, path, "expected a side name");
  const std::string s = v.get<std::string>();
  for (Side side : kAllSides)
    if (side_name(side) == s) return side;
  Node::fail(ErrorCode::kParseInvariant, path, "unknown side '" + s + "'");
}

inline Material parse_material(const Node& n) {
  Material m;
  m.eps_r = n.number_or("eps_r", 1.0);
  m.sigma = n.number_or("sigma", 0.0);
  m.mu_r = n.number_or("mu_r", 1.0);
  m.pec = n.boolean_or("pec", false);
  require(m.eps_r > 0.0, n.sub("eps_r"), "must be > 0");
  require(m.mu_r > 0.0, n.sub("mu_r"), "must be > 0");
  require(m.sigma >= 0.0, n.sub("sigma"), "must be >= 0");
  return m;
}

inline GridSpec parse_grid(const Node& n) {
  GridSpec g;
  g.nx = to_int(n.integer("nx"), n.sub("nx"));
  g.ny = to_int(n.integer("ny"), n.sub("ny"));
  g.dx = n.number("dx");
  g.dy = n.number("dy");
  g.pml_depth = to_int(n.integer_or("pml_depth", 0), n.sub("pml_depth"));
  require(g.nx >= 1, n.sub("nx"), "must be >= 1");
  require(g.ny >= 1, n.sub("ny"), "must be >= 1");
  require(g.dx > 0.0, n.sub("dx"), "must be > 0");
  require(g.dy > 0.0, n.sub("dy"), "must be > 0");
  require(g.pml_depth >= 0, n.sub("pml_depth"), "must be >= 0");
  if (n.has("boundary")) {
    const Node b = n.object("boundary");
    for (Side s : kAllSides) {
      const std::string key = side_name(s);
      if (!b.has(key)) continue;
      const std::string kind = b.string(key);
      if (kind == "pec") g.walls[static_cast<int>(s)] = WallKind::kPec;
      else if (kind == "pml") g.walls[static_cast<int>(s)] = WallKind::kPml;
      else Node::fail(ErrorCode::kParseInvariant, b.sub(key), "expected 'pec' or 'pml'");
    }
    b.finish();
  }
  require(!g.has_pml() || 2 * g.pml_depth < std::min(g.nx, g.ny), n.sub("pml_depth"), "must be < min(nx, ny)/2");
  require(!g.has_pml() || g.pml_depth > 0, n.sub("pml_depth"), "PML walls need pml_depth > 0");
  return g;
}

inline MaterialLayout parse_materials(const Node& n) {
  MaterialLayout layout;
  if (n.has("background")) {
    const Node b = n.object("background");
    layout.background = parse_material(b);
    b.finish();
  }
  if (n.has("objects")) {
    const json& arr = n.array("objects");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const Node o(arr[k], n.sub("objects") + "[" + std::to_string(k) + "]");
      MaterialObject obj;
      const std::string shape = o.string("shape");
      if (shape == "rect") {
        obj.shape = ShapeKind::kRect;
        const auto lo = o.num_pair("min"), hi = o.num_pair("max");
        obj.x0 = lo[0];
        obj.y0 = lo[1];
        obj.x1 = hi[0];
        obj.y1 = hi[1];
        require(obj.x1 >= obj.x0 && obj.y1 >= obj.y0, o.path(), "max must not be below min");
      } else if (shape == "circle") {
        obj.shape = ShapeKind::kCircle;
        const auto c = o.num_pair("center");
        obj.cx = c[0];
        obj.cy = c[1];
        obj.radius = o.number("radius");
        require(obj.radius > 0.0, o.sub("radius"), "must be > 0");
      } else {
        Node::fail(ErrorCode::kParseInvariant, o.sub("shape"), "expected 'rect' or 'circle'");
      }
      obj.material = parse_material(o);
      o.finish();
      layout.objects.push_back(obj);
    }
  }
  return layout;
}

inline RegionConfig parse_region(const Node& n, const GridSpec& g) {
  RegionConfig r;
  const auto anchor = n.int_pair("anchor");
  const auto size = n.int_pair("size");
  r.i0 = to_int(anchor[0], n.sub("anchor"));
  r.j0 = to_int(anchor[1], n.sub("anchor"));
  r.width = to_int(size[0], n.sub("size"));
  r.height = to_int(size[1], n.sub("size"));
  r.refinement = to_int(n.integer("refinement"), n.sub("refinement"));
  require(r.refinement > 1, n.sub("refinement"), "refinement factor must be an integer > 1");
  require(r.width >= 1 && r.height >= 1, n.sub("size"), "must be >= 1");
  require(r.i0 >= 0 && r.j0 >= 0 && r.i0 + r.width <= g.nx && r.j0 + r.height <= g.ny, n.path(),
          "region must lie inside the grid");
  if (n.has("pec_backed")) {
    const json& arr = n.array("pec_backed");
    for (std::size_t k = 0; k < arr.size(); ++k)
      r.pec_backed[static_cast<int>(parse_side(arr[k], n.sub("pec_backed") + "[" + std::to_string(k) + "]"))] = true;
  }
  if (n.has("mor")) {
    const Node m = n.object("mor");
    r.mor.enabled = m.boolean_or("enabled", true);
    r.mor.order = to_int(m.integer_or("order", 0), m.sub("order"));
    if (m.has("expansion_hz")) {
      r.mor.expansion_hz = m.number("expansion_hz");
      require(*r.mor.expansion_hz > 0.0, m.sub("expansion_hz"), "must be > 0");
    }
    require(!r.mor.enabled || r.mor.order >= 1, m.sub("order"), "must be >= 1 when reduction is enabled");
    m.finish();
  } else {
    r.mor.enabled = false;
  }
  if (n.has("extension")) {
    const Node e = n.object("extension");
    r.extension.enabled = e.boolean_or("enabled", true);
    r.extension.factor = e.number_or("factor", 1.0);
    r.extension.margin = e.number_or("margin", 1e-6);
    require(r.extension.factor >= 1.0, e.sub("factor"), "must be >= 1");
    require(r.extension.margin > 0.0 && r.extension.margin < 1.0, e.sub("margin"), "must lie in (0, 1)");
    e.finish();
  }
  return r;
}

inline SourceSpec parse_source(const Node& n) {
  SourceSpec s;
  const std::string kind = n.string("kind");
  if (kind == "hz_point") {
    s.kind = SourceKind::kHzPoint;
    const auto c = n.int_pair("cell");
    s.i = to_int(c[0], n.sub("cell"));
    s.j = to_int(c[1], n.sub("cell"));
  } else if (kind == "jy_line") {
    s.kind = SourceKind::kJyLine;
    s.i = to_int(n.integer("column"), n.sub("column"));
    const auto rows = n.int_pair("rows");
    s.j = to_int(rows[0], n.sub("rows"));
    s.j_end = to_int(rows[1], n.sub("rows"));
    require(s.j_end > s.j, n.sub("rows"), "row range must be non-empty");
  } else {
    Node::fail(ErrorCode::kParseInvariant, n.sub("kind"), "expected 'hz_point' or 'jy_line'");
  }
  s.bandwidth = n.number("bandwidth");
  require(s.bandwidth > 0.0, n.sub("bandwidth"), "must be > 0");
  if (n.has("delay")) s.delay = n.number("delay");
  s.amplitude = n.number_or("amplitude", 1.0);
  return s;
}

inline ProbeSpec parse_probe(const Node& n) {
  ProbeSpec p;
  p.id = n.string("id");
  require(!p.id.empty() && p.id.find_first_of(",\"\n\r") == std::string::npos, n.sub("id"),
          "must be non-empty and free of commas, quotes and newlines");
  const std::string comp = n.string("component");
  if (comp == "hz") {
    p.component = ProbeComponent::kHz;
    const auto c = n.int_pair("cell");
    p.i = to_int(c[0], n.sub("cell"));
    p.j = to_int(c[1], n.sub("cell"));
  } else if (comp == "ex" || comp == "ey") {
    p.component = comp == "ex" ? ProbeComponent::kEx : ProbeComponent::kEy;
    const auto e = n.int_pair("edge");
    p.i = to_int(e[0], n.sub("edge"));
    p.j = to_int(e[1], n.sub("edge"));
  } else if (comp == "ey_line") {
    p.component = ProbeComponent::kEyLine;
    p.i = to_int(n.integer("column"), n.sub("column"));
    const auto rows = n.int_pair("rows");
    p.j = to_int(rows[0], n.sub("rows"));
    p.j_end = to_int(rows[1], n.sub("rows"));
    require(p.j_end > p.j, n.sub("rows"), "row range must be non-empty");
  } else {
    Node::fail(ErrorCode::kParseInvariant, n.sub("component"), "expected 'hz', 'ex', 'ey' or 'ey_line'");
  }
  return p;
}

inline std::pair<long, long> line_column(std::string_view text, std::size_t byte) {
  long line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace io_detail

/// Parses and validates a scenario document.
inline Scenario parse_scenario(std::string_view text) {
  using io_detail::json;
  using io_detail::Node;
  using io_detail::require;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, col] = io_detail::line_column(text, byte);
    throw Error(ErrorCode::kParseSyntax,
                "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  const Node root(doc, "");
  Scenario sc;
  {
    const Node g = root.object("grid");
    sc.grid = io_detail::parse_grid(g);
    g.finish();
  }
  if (root.has("materials")) {
    const Node m = root.object("materials");
    sc.materials = io_detail::parse_materials(m);
    m.finish();
  }
  if (root.has("regions")) {
    const json& arr = root.array("regions");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const Node r(arr[k], "regions[" + std::to_string(k) + "]");
      sc.regions.push_back(io_detail::parse_region(r, sc.grid));
      r.finish();
    }
  }
  if (root.has("sources")) {
    const json& arr = root.array("sources");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const Node s(arr[k], "sources[" + std::to_string(k) + "]");
      sc.sources.push_back(io_detail::parse_source(s));
      s.finish();
    }
  }
  std::set<std::string> ids;
  if (root.has("probes")) {
    const json& arr = root.array("probes");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const Node p(arr[k], "probes[" + std::to_string(k) + "]");
      sc.probes.push_back(io_detail::parse_probe(p));
      p.finish();
      require(ids.insert(sc.probes.back().id).second, p.sub("id"), "duplicate probe id");
    }
  }
  {
    const Node r = root.object("run");
    sc.steps = r.integer("steps");
    sc.cfl_number = r.number_or("cfl_number", 0.99);
    require(sc.steps >= 0, r.sub("steps"), "must be >= 0");
    require(sc.cfl_number > 0.0, r.sub("cfl_number"), "must be > 0");
    r.finish();
  }
  root.finish();
  return sc;
}

/// Canonical JSON form; parse_scenario(serialize_scenario(s)) == s.
inline std::string serialize_scenario(const Scenario& sc) {
  using io_detail::json;
  using io_detail::side_name;
  auto material = [](const Material& m) {
    return json{{"eps_r", m.eps_r}, {"sigma", m.sigma}, {"mu_r", m.mu_r}, {"pec", m.pec}};
  };
  json doc;
  json boundary;
  for (Side s : kAllSides) boundary[side_name(s)] = sc.grid.wall(s) == WallKind::kPml ? "pml" : "pec";
  doc["grid"] = {{"nx", sc.grid.nx},       {"ny", sc.grid.ny},
                 {"dx", sc.grid.dx},       {"dy", sc.grid.dy},
                 {"boundary", boundary},   {"pml_depth", sc.grid.pml_depth}};
  json objects = json::array();
  for (const auto& o : sc.materials.objects) {
    json j = material(o.material);
    if (o.shape == ShapeKind::kRect) {
      j["shape"] = "rect";
      j["min"] = {o.x0, o.y0};
      j["max"] = {o.x1, o.y1};
    } else {
      j["shape"] = "circle";
      j["center"] = {o.cx, o.cy};
      j["radius"] = o.radius;
    }
    objects.push_back(j);
  }
  doc["materials"] = {{"background", material(sc.materials.background)}, {"objects", objects}};
  json regions = json::array();
  for (const auto& r : sc.regions) {
    json backed = json::array();
    for (Side s : kAllSides)
      if (r.pec_backed[static_cast<int>(s)]) backed.push_back(side_name(s));
    json mor = {{"enabled", r.mor.enabled}, {"order", r.mor.order}};
    if (r.mor.expansion_hz) mor["expansion_hz"] = *r.mor.expansion_hz;
    regions.push_back({{"anchor", {r.i0, r.j0}},
                       {"size", {r.width, r.height}},
                       {"refinement", r.refinement},
                       {"pec_backed", backed},
                       {"mor", mor},
                       {"extension",
                        {{"enabled", r.extension.enabled}, {"factor", r.extension.factor}, {"margin", r.extension.margin}}}});
  }
  doc["regions"] = regions;
  json sources = json::array();
  for (const auto& s : sc.sources) {
    json j;
    if (s.kind == SourceKind::kHzPoint) {
      j["kind"] = "hz_point";
      j["cell"] = {s.i, s.j};
    } else {
      j["kind"] = "jy_line";
      j["column"] = s.i;
      j["rows"] = {s.j, s.j_end};
    }
    j["bandwidth"] = s.bandwidth;
    if (s.delay) j["delay"] = *s.delay;
    j["amplitude"] = s.amplitude;
    sources.push_back(j);
  }
  doc["sources"] = sources;
  json probes = json::array();
  for (const auto& p : sc.probes) {
    json j;
    j["id"] = p.id;
    switch (p.component) {
      case ProbeComponent::kHz:
        j["component"] = "hz";
        j["cell"] = {p.i, p.j};
        break;
      case ProbeComponent::kEx:
      case ProbeComponent::kEy:
        j["component"] = p.component == ProbeComponent::kEx ? "ex" : "ey";
        j["edge"] = {p.i, p.j};
        break;
      case ProbeComponent::kEyLine:
        j["component"] = "ey_line";
        j["column"] = p.i;
        j["rows"] = {p.j, p.j_end};
        break;
    }
    probes.push_back(j);
  }
  doc["probes"] = probes;
  doc["run"] = {{"steps", sc.steps}, {"cfl_number", sc.cfl_number}};
  return doc.dump(2);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest text of `v` with 17 significant digits, dot decimal separator.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw Error(ErrorCode::kIo, "malformed number '" + std::string(s) + "'");
  return v;
}

inline std::string records_to_csv(const RunRecord& rec) {
  std::string out = "step,time_s";
  for (const auto& id : rec.probe_ids) out += "," + id;
  out += '\n';
  const std::size_t rows = rec.probes.empty() ? 0 : rec.probes.front().size();
  for (std::size_t n = 0; n < rows; ++n) {
    out += std::to_string(n);
    out += ',';
    out += format_double(rec.probe_time(static_cast<long>(n)));
    for (const auto& series : rec.probes) {
      out += ',';
      out += format_double(series[n]);
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  f << text;
  f.flush();
  if (!f) throw Error(ErrorCode::kIo, "write failed: " + path);
}

inline void write_records(const RunRecord& rec, const std::string& path) { write_text(path, records_to_csv(rec)); }

/// Reads a probe CSV. dt is recovered from the first time stamp.
inline RunRecord records_from_csv(std::string_view text) {
  RunRecord rec;
  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return cells;
  };
  std::size_t pos = 0;
  bool header = true;
  std::size_t ncol = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (header) {
      if (cells.size() < 2 || cells[0] != "step" || cells[1] != "time_s") throw Error(ErrorCode::kIo, "missing CSV header");
      for (std::size_t k = 2; k < cells.size(); ++k) rec.probe_ids.emplace_back(cells[k]);
      rec.probes.assign(rec.probe_ids.size(), {});
      ncol = cells.size();
      header = false;
      continue;
    }
    if (cells.size() != ncol) throw Error(ErrorCode::kIo, "CSV row has the wrong number of columns");
    const double t = parse_double(cells[1]);
    if (rec.steps == 0) rec.dt = t;
    for (std::size_t k = 2; k < cells.size(); ++k) rec.probes[k - 2].push_back(parse_double(cells[k]));
    ++rec.steps;
  }
  if (header) throw Error(ErrorCode::kIo, "missing CSV header");
  return rec;
}

inline RunRecord read_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return records_from_csv(ss.str());
}

inline void write_spectrum(const Spectrum& s, const std::string& path) {
  std::string out = "freq_hz,re,im\n";
  for (std::size_t k = 0; k < s.freq.size(); ++k)
    out += format_double(s.freq[k]) + "," + format_double(s.value[k].real()) + "," + format_double(s.value[k].imag()) + "\n";
  write_text(path, out);
}

inline void write_spectrum(const DbSpectrum& s, const std::string& path) {
  std::string out = "freq_hz,db\n";
  for (std::size_t k = 0; k < s.freq.size(); ++k) out += format_double(s.freq[k]) + "," + format_double(s.db[k]) + "\n";
  write_text(path, out);
}

}  // namespace romfdtd

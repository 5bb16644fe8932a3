#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "qsm/common.hpp"
#include "qsm/config.hpp"
#include "qsm/forward.hpp"
#include "qsm/geometry.hpp"
#include "qsm/indicators.hpp"
#include "qsm/metrics.hpp"

namespace qsm::io {

inline constexpr int kSchemaVersion = 1;

/// Process exit codes, one per failure category.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_io = 3,
  exit_mismatch = 4,
  exit_numeric = 5,
};

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::invalid_parameter: return exit_config;
    case ErrorKind::io: return exit_io;
    case ErrorKind::dimension_mismatch: return exit_mismatch;
    case ErrorKind::division_by_zero:
    case ErrorKind::empty_region: return exit_numeric;
  }
  return exit_failure;
}

using Header = std::map<std::string, std::string>;

/// Writes `content` to `path` through a temporary file in the same
/// directory and a rename, so readers never observe a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "cannot write '" + tmp.string() + "'", ErrorKind::io);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    require(static_cast<bool>(out), "write failed for '" + tmp.string() + "'", ErrorKind::io);
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::io, "cannot move file into place at '" + path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read '" + path.string() + "'", ErrorKind::io);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fmt(double v) { return detail::format_double(v); }

inline std::string format_header(const std::string& kind, const Header& header) {
  std::string out = "# qsm " + kind + "\n";
  for (const auto& [k, v] : header) out += k + ": " + v + "\n";
  out += "---\n";
  return out;
}

/// Splits a file into its header map and CSV body lines.
inline std::pair<Header, std::vector<std::string>> parse_document(const std::string& content,
                                                                  const std::string& kind,
                                                                  const std::string& origin) {
  std::istringstream in(content);
  std::string line;
  require(std::getline(in, line) && line == "# qsm " + kind, origin + ": not a " + kind + " file", ErrorKind::io);
  Header header;
  bool body = false;
  while (std::getline(in, line)) {
    if (line == "---") {
      body = true;
      break;
    }
    const auto colon = line.find(": ");
    require(colon != std::string::npos, origin + ": malformed header line '" + line + "'", ErrorKind::io);
    header[line.substr(0, colon)] = line.substr(colon + 2);
  }
  require(body, origin + ": missing header terminator", ErrorKind::io);
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  return {header, rows};
}

inline const std::string& header_value(const Header& h, const std::string& key, const std::string& origin) {
  const auto it = h.find(key);
  require(it != h.end(), origin + ": header key '" + key + "' missing", ErrorKind::io);
  return it->second;
}

inline std::vector<double> parse_row(const std::string& line, std::size_t expected, const std::string& origin) {
  std::vector<double> out;
  out.reserve(expected);
  const char* p = line.c_str();
  while (*p) {
    char* end = nullptr;
    out.push_back(std::strtod(p, &end));
    require(end != p, origin + ": bad number in row '" + line + "'", ErrorKind::io);
    p = end;
    if (*p == ',') ++p;
  }
  require(out.size() == expected, origin + ": row has " + std::to_string(out.size()) + " fields, expected " +
                                      std::to_string(expected), ErrorKind::io);
  return out;
}

inline void add_config(Header& h, const RunConfig* config) {
  if (!config) return;
  for (const auto& [k, v] : config->snapshot()) h["config." + k] = v;
}

/// Recovers the RunConfig embedded in a file header.
inline RunConfig config_from_header(const Header& h) {
  KeyValues kv;
  for (const auto& [k, v] : h)
    if (k.rfind("config.", 0) == 0) kv.set(k.substr(7), v);
  require(!kv.entries().empty(), "file carries no configuration snapshot", ErrorKind::io);
  return RunConfig::from_keys(kv);
}

// ---------------------------------------------------------------------------
// Datasets

template <int Dim>
Header dataset_header(const FarFieldDataset<Dim>& ds, const RunConfig* config) {
  Header h;
  h["schema"] = std::to_string(kSchemaVersion);
  h["problem"] = ds.problem();
  if (ds.physics.is_elastic()) {
    h["physics.lambda"] = fmt(ds.physics.lambda());
  } else {
    h["physics.epsilon"] = fmt(ds.physics.epsilon());
  }
  h["physics.mu"] = fmt(ds.physics.mu());
  h["L"] = std::to_string(ds.direction_count());
  h["directions"] = Dim == 2 ? "circle" : "fibonacci";
  h["Lambda"] = std::to_string(ds.frequency_count());
  h["delta"] = fmt(ds.frequencies.delta);
  h["noise"] = fmt(ds.noise_level);
  h["seed"] = std::to_string(ds.seed);
  h["source"] = ds.source_label;
  h["records"] = std::to_string(ds.record_count());
  add_config(h, config);
  return h;
}

/// Header, then one CSV row per record and block:
/// l,m,block,re_1,im_1,...,re_Dim,im_Dim with m 1-based.
template <int Dim>
std::string format_dataset(const FarFieldDataset<Dim>& ds, const RunConfig* config = nullptr) {
  std::string out = format_header("dataset", dataset_header(ds, config));
  out += "l,m,block";
  for (int c = 1; c <= Dim; ++c) out += ",re" + std::to_string(c) + ",im" + std::to_string(c);
  out += "\n";
  char buf[64];
  for (std::size_t l = 0; l < ds.direction_count(); ++l)
    for (std::size_t m = 0; m < ds.frequency_count(); ++m)
      for (int t = 0; t < FarFieldDataset<Dim>::kBlocks; ++t) {
        out += std::to_string(l) + "," + std::to_string(m + 1) + "," + std::to_string(t);
        const auto v = ds.block(l, m, t);
        for (int c = 0; c < Dim; ++c) {
          std::snprintf(buf, sizeof buf, ",%.17g,%.17g", v[c].real(), v[c].imag());
          out += buf;
        }
        out += "\n";
      }
  return out;
}

template <int Dim>
void write_dataset(const std::filesystem::path& path, const FarFieldDataset<Dim>& ds,
                   const RunConfig* config = nullptr) {
  write_atomic(path, format_dataset(ds, config));
}

/// Reads the problem name of a dataset file without parsing the body.
inline std::string dataset_problem(const std::filesystem::path& path) {
  const auto [h, rows] = parse_document(read_file(path), "dataset", path.string());
  return header_value(h, "problem", path.string());
}

template <int Dim>
FarFieldDataset<Dim> read_dataset(const std::filesystem::path& path, Header* header_out = nullptr) {
  const std::string origin = path.string();
  const auto [h, rows] = parse_document(read_file(path), "dataset", origin);
  require(header_value(h, "schema", origin) == std::to_string(kSchemaVersion), origin + ": unsupported schema",
          ErrorKind::io);
  const std::string problem = header_value(h, "problem", origin);
  const bool dim_ok = Dim == 2 ? problem == "elastic2d" : (problem == "elastic3d" || problem == "em3d");
  require(dim_ok, origin + ": dataset is " + problem, ErrorKind::dimension_mismatch);

  auto num = [&](const char* k) { return text::to_double(k, header_value(h, k, origin)); };
  auto integer = [&](const char* k) { return static_cast<int>(text::to_integer(k, header_value(h, k, origin))); };
  FarFieldDataset<Dim> ds;
  ds.physics = problem == "em3d" ? PhysicsParams::em(num("physics.epsilon"), num("physics.mu"))
                                 : PhysicsParams::elastic(num("physics.lambda"), num("physics.mu"));
  if constexpr (Dim == 2) {
    ds.directions = theta_circle(integer("L"));
  } else {
    ds.directions = fibonacci_sphere(integer("L"));
  }
  ds.frequencies = frequency_grid(num("delta"), integer("Lambda"));
  ds.noise_level = num("noise");
  ds.seed = static_cast<std::uint64_t>(std::stoull(header_value(h, "seed", origin)));
  ds.source_label = header_value(h, "source", origin);
  ds.values.assign(ds.record_count() * FarFieldDataset<Dim>::kBlocks * Dim, complex{});

  require(rows.size() == ds.record_count() * FarFieldDataset<Dim>::kBlocks + 1, origin + ": wrong row count",
          ErrorKind::io);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto v = parse_row(rows[r], 3 + 2 * Dim, origin);
    const auto l = static_cast<std::size_t>(v[0]);
    const auto m = static_cast<std::size_t>(v[1]);
    const int t = static_cast<int>(v[2]);
    require(l < ds.direction_count() && m >= 1 && m <= ds.frequency_count() && (t == 0 || t == 1),
            origin + ": record index out of range", ErrorKind::io);
    CVec<Dim> block;
    for (int c = 0; c < Dim; ++c) block[c] = complex(v[3 + 2 * c], v[4 + 2 * c]);
    ds.set_block(l, m - 1, t, block);
  }
  if (header_out) *header_out = h;
  return ds;
}

// ---------------------------------------------------------------------------
// Indicator fields

template <int Dim>
Header field_header(const IndicatorField<Dim>& f, const RunConfig* config) {
  Header h;
  h["schema"] = std::to_string(kSchemaVersion);
  h["dimension"] = std::to_string(Dim);
  h["indicator"] = to_string(f.kind);
  h["arity"] = std::to_string(f.arity);
  h["grid.lo"] = detail::join_doubles(std::vector<double>(f.grid.lo().data(), f.grid.lo().data() + Dim));
  h["grid.hi"] = detail::join_doubles(std::vector<double>(f.grid.hi().data(), f.grid.hi().data() + Dim));
  h["grid.h"] = fmt(f.grid.spacing());
  if (f.grid.slice()) h["grid.slice"] = std::to_string(f.grid.slice()->axis) + ":" + fmt(f.grid.slice()->offset);
  h["nodes"] = std::to_string(f.node_count());
  for (const auto& [k, v] : f.provenance) h["run." + k] = v;
  add_config(h, config);
  return h;
}

/// Header, then one CSV row per node: coordinates of the node followed by
/// re/im of each component.
template <int Dim>
std::string format_field(const IndicatorField<Dim>& f, const RunConfig* config = nullptr) {
  std::string out = format_header("field", field_header(f, config));
  const char* names[] = {"x", "y", "z"};
  for (int a = 0; a < Dim; ++a) out += std::string(a ? "," : "") + names[a];
  for (int c = 1; c <= f.arity; ++c) out += ",re" + std::to_string(c) + ",im" + std::to_string(c);
  out += "\n";
  char buf[64];
  for (std::size_t n = 0; n < f.node_count(); ++n) {
    const auto z = f.grid.node(n);
    for (int a = 0; a < Dim; ++a) {
      std::snprintf(buf, sizeof buf, a ? ",%.17g" : "%.17g", z[a]);
      out += buf;
    }
    for (int c = 0; c < f.arity; ++c) {
      const complex v = f.at(n, c);
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", v.real(), v.imag());
      out += buf;
    }
    out += "\n";
  }
  return out;
}

template <int Dim>
void write_field(const std::filesystem::path& path, const IndicatorField<Dim>& f, const RunConfig* config = nullptr) {
  write_atomic(path, format_field(f, config));
}

inline int field_dimension(const std::filesystem::path& path) {
  const auto [h, rows] = parse_document(read_file(path), "field", path.string());
  return static_cast<int>(text::to_integer("dimension", header_value(h, "dimension", path.string())));
}

template <int Dim>
IndicatorField<Dim> read_field(const std::filesystem::path& path, Header* header_out = nullptr) {
  const std::string origin = path.string();
  const auto [h, rows] = parse_document(read_file(path), "field", origin);
  require(header_value(h, "dimension", origin) == std::to_string(Dim), origin + ": field dimension differs",
          ErrorKind::dimension_mismatch);
  auto vec = [&](const char* k) {
    const auto v = detail::parse_doubles(k, header_value(h, k, origin));
    require(static_cast<int>(v.size()) == Dim, origin + ": bad " + std::string(k), ErrorKind::io);
    return Vec<Dim>(Eigen::Map<const Vec<Dim>>(v.data()));
  };
  std::optional<Slice> slice;
  if (const auto it = h.find("grid.slice"); it != h.end()) {
    const auto colon = it->second.find(':');
    slice = Slice{static_cast<int>(text::to_integer("grid.slice", it->second.substr(0, colon))),
                  text::to_double("grid.slice", it->second.substr(colon + 1))};
  }
  SamplingGrid<Dim> grid(vec("grid.lo"), vec("grid.hi"), text::to_double("grid.h", header_value(h, "grid.h", origin)),
                         slice);
  IndicatorField<Dim> f{grid, indicator_kind_from_string(header_value(h, "indicator", origin)),
                        static_cast<int>(text::to_integer("arity", header_value(h, "arity", origin))),
                        {},
                        {}};
  for (const auto& [k, v] : h)
    if (k.rfind("run.", 0) == 0) f.provenance[k.substr(4)] = v;
  require(rows.size() == grid.size() + 1, origin + ": wrong row count", ErrorKind::io);
  f.values.resize(grid.size() * f.arity);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto v = parse_row(rows[n + 1], Dim + 2 * f.arity, origin);
    for (int c = 0; c < f.arity; ++c) f.values[n * f.arity + c] = complex(v[Dim + 2 * c], v[Dim + 2 * c + 1]);
  }
  if (header_out) *header_out = h;
  return f;
}

// ---------------------------------------------------------------------------
// Metrics rows

inline std::string metrics_csv_header(std::size_t components) {
  std::string s =
      "indicator,source,L,Lambda,delta_freq,omega_max,noise,seed,replicates,e_F,e_F_std,real_part_only,"
      "exclude_band,sup_error_interior,threshold_mask_fraction";
  for (std::size_t c = 1; c <= components; ++c) s += ",e_F_" + std::to_string(c);
  return s;
}

inline std::string metrics_csv_row(const MetricsReport& r, const std::string& indicator, const std::string& source) {
  const auto& p = r.params;
  std::string s = indicator + "," + source + "," + std::to_string(p.L) + "," + std::to_string(p.Lambda) + "," +
                  fmt(p.delta_freq) + "," + fmt(p.omega_max()) + "," + fmt(p.noise) + "," + std::to_string(p.seed) +
                  "," + std::to_string(r.replicates) + "," + fmt(r.e_F) + "," + fmt(r.e_F_std) + "," +
                  (r.real_part_only ? "true" : "false") + "," + fmt(r.exclude_band) + "," + fmt(r.sup_error_interior) +
                  "," + fmt(r.threshold_mask_fraction);
  for (double e : r.e_F_components) s += "," + fmt(e);
  return s;
}

/// Appends a row, writing the column header first if the file is new.
inline void append_metrics_row(const std::filesystem::path& path, const MetricsReport& r, const std::string& indicator,
                               const std::string& source) {
  std::string content;
  if (std::filesystem::exists(path)) content = read_file(path);
  if (content.empty()) content = metrics_csv_header(r.e_F_components.size()) + "\n";
  content += metrics_csv_row(r, indicator, source) + "\n";
  write_atomic(path, content);
}

// ---------------------------------------------------------------------------
// Rasters

struct RasterRange {
  double lo = 0.0, hi = 0.0;
  bool degenerate() const { return !(hi > lo); }
};

/// Scalar image, row-major with `width` columns.
struct Raster {
  std::size_t width = 0, height = 0;
  std::vector<double> pixels;
};

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples) with linear
/// mapping lo -> 0, hi -> 65535 and clamping outside. A degenerate range maps
/// everything to 0.
inline std::string encode_pgm(const Raster& img, const RasterRange& range) {
  require(img.pixels.size() == img.width * img.height && img.width > 0, "encode_pgm: bad raster size");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
  out.reserve(out.size() + 2 * img.pixels.size());
  for (double v : img.pixels) {
    std::uint16_t q = 0;
    if (!range.degenerate()) {
      const double t = std::clamp((v - range.lo) / (range.hi - range.lo), 0.0, 1.0);
      q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    }
    out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

inline std::string range_sidecar(const RasterRange& range, const std::string& quantity) {
  return "quantity: " + quantity + "\nmapping: linear\nlo: " + fmt(range.lo) + "\nhi: " + fmt(range.hi) +
         "\nmaxval: 65535\ndegenerate: " + (range.degenerate() ? "true" : "false") + "\n";
}

}  // namespace qsm::io

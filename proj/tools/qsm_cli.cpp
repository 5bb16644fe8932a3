// Command-line driver: simulate, reconstruct, metrics, sweep, figure, tables.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsm/io.hpp"
#include "qsm/parallel.hpp"
#include "qsm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qsm;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("-c,--config", c.config_path, "run configuration file (key = value)");
  if (config_required) opt->required();
  cmd->add_option("-s,--set", c.overrides, "override a config key, key=value (repeatable)");
  cmd->add_option("-o,--output", c.output_dir, "output directory (overrides output.dir)");
  cmd->add_option("-j,--threads", c.threads, "worker threads (default: QSM_THREADS or all cores)");
}

KeyValues load_keys(const Common& c) {
  KeyValues kv = c.config_path.empty() ? KeyValues{} : KeyValues::load(c.config_path);
  for (const auto& o : c.overrides) kv.apply_override(o);
  return kv;
}

RunConfig finish_config(RunConfig cfg, const Common& c) {
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  if (c.threads > 0) set_worker_count(static_cast<std::size_t>(c.threads));
  return cfg;
}

RunConfig load_config(const Common& c) { return finish_config(RunConfig::from_keys(load_keys(c)), c); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slice_tag(const SamplingGrid<3>& g) {
  const char* axis[] = {"x", "y", "z"};
  char buf[64];
  std::snprintf(buf, sizeof buf, "_%s%+.3f", axis[g.slice()->axis], g.slice()->offset);
  return buf;
}
std::string slice_tag(const SamplingGrid<2>&) { return {}; }

// simulate ------------------------------------------------------------------

template <int Dim>
void simulate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto clean = simulate_clean<Dim>(cfg);
  const auto noisy = apply_noise(clean, cfg.noise, cfg.seed);
  const fs::path dir = cfg.output_dir;
  io::write_dataset(dir / "dataset_clean.csv", apply_noise(clean, 0.0, cfg.seed), &cfg);
  io::write_dataset(dir / "dataset.csv", noisy, &cfg);
  std::cout << "records: " << noisy.record_count() << "\n"
            << "wrote " << (dir / "dataset_clean.csv").string() << " and " << (dir / "dataset.csv").string() << "\n"
            << "time: " << seconds_since(t0) << " s\n";
}

// reconstruct ---------------------------------------------------------------

template <int Dim>
void reconstruct_all(const RunConfig& cfg, const std::string& dataset_path) {
  const auto ds = io::read_dataset<Dim>(dataset_path);
  require(ds.problem() == cfg.problem, "dataset problem " + ds.problem() + " does not match config " + cfg.problem,
          ErrorKind::dimension_mismatch);
  if (cfg.indicators.empty()) {
    std::cerr << "warning: no indicators configured, nothing to do\n";
    return;
  }
  for (auto kind : cfg.indicators) {
    for (const auto& grid : grids_for<Dim>(cfg)) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto field = reconstruct(ds, kind, grid, cfg);
      const fs::path out = fs::path(cfg.output_dir) / ("field_" + std::string(to_string(kind)) + slice_tag(grid) + ".csv");
      io::write_field(out, field, &cfg);
      std::cout << "wrote " << out.string() << " (" << field.node_count() << " nodes, " << seconds_since(t0)
                << " s)\n";
    }
  }
}

// metrics -------------------------------------------------------------------

template <int Dim>
void metrics(const RunConfig& cfg, const std::string& field_path) {
  io::Header h;
  const auto field = io::read_field<Dim>(field_path, &h);
  const auto spec = source_for<Dim>(cfg);
  auto report = evaluate_field(field, spec, cfg, cfg.seed);
  // data parameters come from the dataset the field was built from
  const auto& prov = field.provenance;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = prov.find(key);
    return it == prov.end() ? nullptr : &it->second;
  };
  auto& p = report.params;
  if (auto v = get("L")) p.L = static_cast<int>(text::to_integer("L", *v));
  if (auto v = get("Lambda")) p.Lambda = static_cast<int>(text::to_integer("Lambda", *v));
  if (auto v = get("delta_freq")) p.delta_freq = text::to_double("delta_freq", *v);
  if (auto v = get("noise")) p.noise = text::to_double("noise", *v);
  if (auto v = get("seed")) p.seed = static_cast<std::uint64_t>(std::stoull(*v));
  const fs::path out = fs::path(cfg.output_dir) / "metrics.csv";
  io::append_metrics_row(out, report, to_string(field.kind), spec.label);
  std::cout << "e_F: " << io::fmt(report.e_F) << (cfg.real_part_only ? " (real part)" : " (complex)") << "\n";
  for (std::size_t c = 0; c < report.e_F_components.size(); ++c)
    std::cout << "e_F[" << c + 1 << "]: " << io::fmt(report.e_F_components[c]) << "\n";
  std::cout << "appended to " << out.string() << "\n";
}

// sweep ---------------------------------------------------------------------

struct SweepTable {
  std::string row_axis, col_axis;
  std::vector<double> rows, cols;
  std::vector<std::vector<MetricsReport>> cells;  // [row][col]
};

SweepTable run_sweep(const RunConfig& base, int seeds, bool verbose) {
  require(!base.sweep_axis.empty() && !base.sweep_values.empty(), "sweep.axis and sweep.values are required",
          ErrorKind::config);
  SweepTable t;
  t.col_axis = base.sweep_axis;
  t.cols = base.sweep_values;
  const auto col_axis = trend_axis_from_string(t.col_axis);
  std::optional<TrendAxis> row_axis;
  if (!base.sweep_secondary_axis.empty()) {
    require(!base.sweep_secondary_values.empty(), "sweep.secondary_values is empty", ErrorKind::config);
    row_axis = trend_axis_from_string(base.sweep_secondary_axis);
    t.row_axis = base.sweep_secondary_axis;
    t.rows = base.sweep_secondary_values;
  } else {
    t.rows = {0.0};
  }
  for (double rv : t.rows) {
    t.cells.emplace_back();
    for (double cv : t.cols) {
      RunConfig c = base;
      if (row_axis) set_axis(c, *row_axis, rv);
      set_axis(c, col_axis, cv);
      const auto t0 = std::chrono::steady_clock::now();
      t.cells.back().push_back(run_replicates(c, seeds));
      if (verbose) {
        std::cout << "  " << (row_axis ? t.row_axis + "=" + io::fmt(rv) + " " : "") << t.col_axis << "=" << io::fmt(cv)
                  << ": e_F = " << io::fmt(t.cells.back().back().e_F) << " (" << seconds_since(t0) << " s)\n";
      }
    }
  }
  return t;
}

std::string format_table(const SweepTable& t, const std::vector<std::vector<double>>* published = nullptr) {
  std::ostringstream out;
  char buf[64];
  out << (t.row_axis.empty() ? "-" : t.row_axis) << "\\" << t.col_axis;
  for (double c : t.cols) out << "," << io::fmt(c);
  out << "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out << (t.row_axis.empty() ? "-" : io::fmt(t.rows[r]));
    for (std::size_t c = 0; c < t.cols.size(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.4f", t.cells[r][c].e_F);
      out << buf;
      if (published) {
        std::snprintf(buf, sizeof buf, " (%.4f)", (*published)[r][c]);
        out << buf;
      }
    }
    out << "\n";
  }
  return out.str();
}

std::string trend_lines(const SweepTable& t) {
  std::ostringstream out;
  auto verdict = [](const TrendVerdict& v) {
    return v.monotone ? std::string("monotone") : "violated at position " + std::to_string(*v.violation);
  };
  if (t.cols.size() >= 2) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      out << "trend over " << t.col_axis;
      if (!t.row_axis.empty()) out << " at " << t.row_axis << "=" << io::fmt(t.rows[r]);
      out << ": " << verdict(trend_report(t.cells[r], trend_axis_from_string(t.col_axis))) << "\n";
    }
  }
  if (t.rows.size() >= 2) {
    for (std::size_t c = 0; c < t.cols.size(); ++c) {
      std::vector<MetricsReport> column;
      for (const auto& row : t.cells) column.push_back(row[c]);
      out << "trend over " << t.row_axis << " at " << t.col_axis << "=" << io::fmt(t.cols[c]) << ": "
          << verdict(trend_report(column, trend_axis_from_string(t.row_axis))) << "\n";
    }
  }
  return out.str();
}

void write_sweep_outputs(const fs::path& dir, const std::string& stem, const SweepTable& t, const RunConfig& cfg,
                         const std::vector<std::vector<double>>* published = nullptr) {
  std::string rows = io::metrics_csv_header(t.cells.front().front().e_F_components.size()) + "\n";
  for (const auto& row : t.cells)
    for (const auto& r : row) rows += io::metrics_csv_row(r, to_string(cfg.indicators.front()), cfg.source) + "\n";
  io::write_atomic(dir / (stem + "_runs.csv"), rows);

  std::string table;
  for (const auto& [k, v] : cfg.snapshot()) table += "# " + k + " = " + v + "\n";
  table += format_table(t, published);
  io::write_atomic(dir / (stem + ".csv"), table);
  io::write_atomic(dir / (stem + "_trends.txt"), trend_lines(t));
}

// figure --------------------------------------------------------------------

template <int Dim>
void figure(const std::string& field_path, int component, const std::string& part, const std::vector<double>& range,
            const std::string& output_dir) {
  io::Header h;
  const auto f = io::read_field<Dim>(field_path, &h);
  require(component >= 0 && component < f.arity,
          "component " + std::to_string(component) + " out of range (field has " + std::to_string(f.arity) + ")",
          ErrorKind::config);
  require(part == "real" || part == "imag" || part == "abs", "part must be real, imag or abs", ErrorKind::config);
  require(f.grid.free_axes().size() == 2, "figures need a planar grid", ErrorKind::dimension_mismatch);
  auto scalar = [&](std::size_t n) {
    const complex v = f.at(n, component);
    return part == "real" ? v.real() : part == "imag" ? v.imag() : std::abs(v);
  };

  const int au = f.grid.free_axes()[0], av = f.grid.free_axes()[1];
  const std::size_t nu = f.grid.count(au), nv = f.grid.count(av);
  // Image columns follow the first free axis, rows the second, top row at
  // the largest coordinate.
  io::Raster img{nu, nv, std::vector<double>(nu * nv)};
  const char* names[] = {"x", "y", "z"};
  std::string csv = std::string(names[au]) + "," + names[av] + ",value\n";
  char buf[96];
  io::RasterRange rr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t n = 0; n < f.node_count(); ++n) {
    const std::size_t i = n / nv, j = n % nv;
    const double v = scalar(n);
    img.pixels[(nv - 1 - j) * nu + i] = v;
    rr.lo = std::min(rr.lo, v);
    rr.hi = std::max(rr.hi, v);
    const auto z = f.grid.node(n);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", z[au], z[av], v);
    csv += buf;
  }
  if (range.size() == 2) rr = {range[0], range[1]};

  const fs::path in(field_path);
  const fs::path dir = output_dir.empty() ? in.parent_path() : fs::path(output_dir);
  const std::string stem = in.stem().string() + "_c" + std::to_string(component + 1) + "_" + part;
  io::write_atomic(dir / (stem + ".csv"), csv);
  io::write_atomic(dir / (stem + ".pgm"), io::encode_pgm(img, rr));
  std::string sidecar = io::range_sidecar(rr, part + " part of component " + std::to_string(component + 1));
  sidecar += "field: " + in.filename().string() + "\nwidth_axis: " + names[au] + "\nheight_axis: " + names[av] +
             " (top = max)\n";
  for (const auto& [k, v] : h) sidecar += "field." + k + ": " + v + "\n";
  io::write_atomic(dir / (stem + ".range.txt"), sidecar);
  std::cout << "wrote " << (dir / (stem + ".pgm")).string() << " [" << io::fmt(rr.lo) << ", " << io::fmt(rr.hi)
            << "]\n";
}

// tables --------------------------------------------------------------------

const std::vector<std::vector<double>> kTable1 = {
    {0.1584, 0.1193, 0.0973, 0.0947}, {0.1494, 0.1104, 0.0899, 0.0790}, {0.1459, 0.1043, 0.0835, 0.0759}};
const std::vector<std::vector<double>> kTable2 = {
    {0.0511, 0.0656, 0.0830, 0.1060}, {0.0455, 0.0527, 0.0659, 0.0806}, {0.0439, 0.0483, 0.0553, 0.0617}};

RunConfig table_config(int which, double h, std::uint64_t seed, const std::string& output_dir) {
  KeyValues kv;
  kv.set("problem", "elastic2d");
  kv.set("source.name", "example_two");
  kv.set("indicators", "f2d");
  kv.set("grid.h", io::fmt(h));
  kv.set("data.seed", std::to_string(seed));
  kv.set("metrics.real_part_only", "true");
  if (which == 1) {
    kv.set("data.delta", "0.5");
    kv.set("data.noise", "0.3");
    kv.set("data.Lambda", "60");
    kv.set("sweep.axis", "L");
    kv.set("sweep.values", "51,101,151,201");
    kv.set("sweep.secondary_axis", "omega_max");
    kv.set("sweep.secondary_values", "30,40,50");
  } else {
    kv.set("data.L", "51");
    kv.set("data.delta", "0.5");
    kv.set("data.Lambda", "80");
    kv.set("sweep.axis", "delta");
    kv.set("sweep.values", "0.05,0.10,0.15,0.20");
    kv.set("sweep.secondary_axis", "delta_omega");
    kv.set("sweep.secondary_values", "1/2,1/4,1/8");
  }
  auto c = RunConfig::from_keys(kv);
  if (!output_dir.empty()) c.output_dir = output_dir;
  return c;
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-frequency far-field source reconstruction"};
  app.require_subcommand(1);

  Common sim_opts, rec_opts, met_opts, swp_opts;
  auto* sim = app.add_subcommand("simulate", "synthesize noiseless and noisy far-field datasets");
  add_common(sim, sim_opts, true);

  std::string dataset_path;
  auto* rec = app.add_subcommand("reconstruct", "evaluate the configured indicators on a dataset");
  add_common(rec, rec_opts, false);
  rec->add_option("-d,--dataset", dataset_path, "dataset file")->required();

  std::string field_path;
  auto* met = app.add_subcommand("metrics", "relative L2 error of a field against the configured source");
  add_common(met, met_opts, false);
  met->add_option("-f,--field", field_path, "field file")->required();

  auto* swp = app.add_subcommand("sweep", "seed-averaged e_F over one or two parameter axes");
  add_common(swp, swp_opts, true);

  std::string fig_field, fig_part = "real", fig_out;
  int fig_component = 1;
  std::vector<double> fig_range;
  auto* fig = app.add_subcommand("figure", "grayscale raster and CSV grid of one field component");
  fig->add_option("-f,--field", fig_field, "field file")->required();
  fig->add_option("-k,--component", fig_component, "component, 1-based");
  fig->add_option("-p,--part", fig_part, "real, imag or abs");
  fig->add_option("-r,--range", fig_range, "fixed linear range lo hi")->expected(2);
  fig->add_option("-o,--output", fig_out, "output directory (default: next to the field)");

  int tab_which = 0, tab_seeds = 10, tab_threads = 0;
  double tab_h = 0.01;
  std::uint64_t tab_seed = 0;
  std::string tab_out;
  auto* tab = app.add_subcommand("tables", "reproduce the two e_F tables (example two, I_f)");
  tab->add_option("-t,--table", tab_which, "1 or 2 (default both)");
  tab->add_option("--seeds", tab_seeds, "noise realizations per cell");
  tab->add_option("--seed", tab_seed, "first seed");
  tab->add_option("--spacing", tab_h, "sampling grid spacing");
  tab->add_option("-o,--output", tab_out, "output directory");
  tab->add_option("-j,--threads", tab_threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  if (*sim) {
    const auto cfg = load_config(sim_opts);
    cfg.dimension() == 2 ? simulate<2>(cfg) : simulate<3>(cfg);
  } else if (*rec) {
    // Without a config file the run configuration embedded in the dataset
    // is reused.
    const auto problem = io::dataset_problem(dataset_path);
    KeyValues kv;
    if (rec_opts.config_path.empty()) {
      const auto [hdr, rows] = io::parse_document(io::read_file(dataset_path), "dataset", dataset_path);
      for (const auto& [k, v] : hdr)
        if (k.rfind("config.", 0) == 0) kv.set(k.substr(7), v);
      for (const auto& o : rec_opts.overrides) kv.apply_override(o);
    } else {
      kv = load_keys(rec_opts);
    }
    const auto cfg = finish_config(RunConfig::from_keys(kv), rec_opts);
    require(problem == cfg.problem, "dataset problem " + problem + " does not match config " + cfg.problem,
            ErrorKind::dimension_mismatch);
    for (auto k : cfg.indicators)
      require(indicator_needs_em(k) == (problem == "em3d") && indicator_dimension(k) == cfg.dimension(),
              std::string("indicator ") + to_string(k) + " does not apply to " + problem + " data",
              ErrorKind::dimension_mismatch);
    cfg.dimension() == 2 ? reconstruct_all<2>(cfg, dataset_path) : reconstruct_all<3>(cfg, dataset_path);
  } else if (*met) {
    KeyValues kv;
    if (met_opts.config_path.empty()) {
      const auto [hdr, rows] = io::parse_document(io::read_file(field_path), "field", field_path);
      for (const auto& [k, v] : hdr)
        if (k.rfind("config.", 0) == 0) kv.set(k.substr(7), v);
      require(!kv.entries().empty(), "no config given and the field carries none: reference unknown",
              ErrorKind::config);
      for (const auto& o : met_opts.overrides) kv.apply_override(o);
    } else {
      kv = load_keys(met_opts);
    }
    const auto cfg = finish_config(RunConfig::from_keys(kv), met_opts);
    const int dim = io::field_dimension(field_path);
    require(dim == cfg.dimension(), "field dimension does not match config problem", ErrorKind::dimension_mismatch);
    dim == 2 ? metrics<2>(cfg, field_path) : metrics<3>(cfg, field_path);
  } else if (*swp) {
    const auto cfg = load_config(swp_opts);
    const auto table = run_sweep(cfg, cfg.seeds, true);
    write_sweep_outputs(cfg.output_dir, "sweep", table, cfg);
    std::cout << format_table(table) << trend_lines(table);
  } else if (*fig) {
    const int dim = io::field_dimension(fig_field);
    dim == 2 ? figure<2>(fig_field, fig_component - 1, fig_part, fig_range, fig_out)
             : figure<3>(fig_field, fig_component - 1, fig_part, fig_range, fig_out);
  } else if (*tab) {
    require(tab_which >= 0 && tab_which <= 2, "--table must be 1 or 2", ErrorKind::config);
    require(tab_seeds >= 1, "--seeds must be >= 1", ErrorKind::config);
    if (tab_threads > 0) set_worker_count(static_cast<std::size_t>(tab_threads));
    std::string out_dir = tab_out;
    if (out_dir.empty())
      if (const char* env = std::getenv("QSM_OUTPUT_DIR"); env && *env) out_dir = env;
    if (out_dir.empty()) out_dir = "out";
    for (int which : {1, 2}) {
      if (tab_which != 0 && tab_which != which) continue;
      const auto cfg = table_config(which, tab_h, tab_seed, out_dir);
      std::cout << "table " << which << " (" << tab_seeds << " seeds, h = " << tab_h << ")\n";
      const auto& published = which == 1 ? kTable1 : kTable2;
      const auto table = run_sweep(cfg, tab_seeds, true);
      write_sweep_outputs(cfg.output_dir, "table" + std::to_string(which), table, cfg, &published);
      std::cout << format_table(table, &published) << trend_lines(table);
    }
  }
  return io::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return io::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return io::exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io::exit_failure;
  }
}

// Apache License, Version 2.0, refer to LICENSE.txt
#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "condopt/errors.hpp"
#include "condopt/inference.hpp"
#include "condopt/model_io.hpp"
#include "condopt/simulate.hpp"
#include "io.hpp"

namespace condopt::cli {

using nlohmann::json;

int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

namespace {

struct Column {
  std::string name;
  std::size_t field = 0;
  DimKind kind = DimKind::continuous;
};

std::vector<Column> locate(const std::vector<std::string>& header, const std::vector<std::string>& names,
                           const std::map<std::string, DimKind>& types) {
  std::vector<Column> cols;
  for (const auto& name : names) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("missing column '" + name + "'");
    const auto t = types.find(name);
    cols.push_back(Column{name, static_cast<std::size_t>(it - header.begin()),
                          t == types.end() ? DimKind::continuous : t->second});
  }
  return cols;
}

void read_row(std::size_t line, const std::vector<std::string>& fields, const std::vector<Column>& cols,
              std::vector<double>& values) {
  values.clear();
  for (const Column& c : cols) {
    if (c.field >= fields.size()) {
      throw InputError("line " + std::to_string(line) + ": missing value for column '" + c.name + "'");
    }
    double v = 0.0;
    if (!parse_double(fields[c.field], v) || !std::isfinite(v)) {
      throw InputError("line " + std::to_string(line) + ", column '" + c.name + "': cannot parse '" +
                       fields[c.field] + "' as a number");
    }
    if (c.kind == DimKind::binary && v != 0.0 && v != 1.0) {
      throw InputError("line " + std::to_string(line) + ", column '" + c.name + "': binary column accepts 0 or 1, got '" +
                       fields[c.field] + "'");
    }
    values.push_back(v);
  }
}

SampleSpace build_space(const std::vector<Column>& cols, const RunConfig& config, const PointMatrix& m) {
  std::vector<Dimension> dims;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].kind == DimKind::binary) {
      dims.push_back(Dimension::binary());
      continue;
    }
    const auto b = config.bounds.find(cols[j].name);
    if (b != config.bounds.end()) {
      dims.push_back(Dimension::continuous(b->second.first, b->second.second));
    } else {
      dims.push_back(empirical_dimension(m.column(j)));
    }
  }
  return SampleSpace(std::move(dims));
}

void check_inside(const SampleSpace& space, const PointMatrix& m, const std::vector<std::size_t>& lines,
                  const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t d = 0; d < space.dims(); ++d) {
      const Dimension& dim = space.dim(d);
      if (dim.kind == DimKind::continuous && (m(i, d) < dim.lo || m(i, d) > dim.hi)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "line " << lines[i] << ", column '" << names[d] << "': value " << m(i, d) << " outside [" << dim.lo
            << ", " << dim.hi << "]";
        throw InputError(msg.str());
      }
    }
  }
}

json space_json(const SampleSpace& space, const std::vector<std::string>& names) {
  json out = json::array();
  for (std::size_t d = 0; d < space.dims(); ++d) {
    const Dimension& dim = space.dim(d);
    json j = {{"name", d < names.size() ? names[d] : "d" + std::to_string(d)}};
    if (dim.kind == DimKind::binary) {
      j["kind"] = "binary";
    } else {
      j["kind"] = "continuous";
      j["lo"] = dim.lo;
      j["hi"] = dim.hi;
    }
    out.push_back(j);
  }
  return out;
}

// Cell midpoints per dimension and the volume of one grid cell.
std::vector<std::vector<double>> axis_points(const SampleSpace& space, std::size_t resolution, double& volume) {
  std::vector<std::vector<double>> axes;
  volume = 1.0;
  for (const Dimension& dim : space.dimensions()) {
    std::vector<double> pts;
    if (dim.kind == DimKind::binary) {
      pts = {0.0, 1.0};
    } else {
      const double w = (dim.hi - dim.lo) / static_cast<double>(resolution);
      for (std::size_t i = 0; i < resolution; ++i) pts.push_back(dim.lo + (static_cast<double>(i) + 0.5) * w);
      volume *= w;
    }
    axes.push_back(std::move(pts));
  }
  return axes;
}

std::vector<std::vector<double>> cartesian(const std::vector<std::vector<double>>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double v : axis) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

LoadedData load_dataset(const RunConfig& config, const std::string& path) {
  if (config.x_columns.empty()) throw ConfigError("no predictor columns configured (set x=...)");
  if (config.y_columns.empty()) throw ConfigError("no response columns configured (set y=...)");
  for (const auto& c : config.x_columns) {
    if (std::find(config.y_columns.begin(), config.y_columns.end(), c) != config.y_columns.end()) {
      throw ConfigError("column '" + c + "' is configured as both predictor and response");
    }
  }
  std::vector<std::string> header;
  std::vector<Column> xc;
  std::vector<Column> yc;
  LoadedData out;
  out.data.x = PointMatrix(0, config.x_columns.size());
  out.data.y = PointMatrix(0, config.y_columns.size());
  out.data.x_names = config.x_columns;
  out.data.y_names = config.y_columns;
  std::vector<std::size_t> lines;
  std::vector<double> values;
  bool located = false;
  read_csv(path, header, [&](std::size_t line, const std::vector<std::string>& fields) {
    if (!located) {
      xc = locate(header, config.x_columns, config.types);
      yc = locate(header, config.y_columns, config.types);
      located = true;
    }
    read_row(line, fields, xc, values);
    out.data.x.append_row(values);
    read_row(line, fields, yc, values);
    out.data.y.append_row(values);
    lines.push_back(line);
  });
  if (!located) {
    xc = locate(header, config.x_columns, config.types);
    yc = locate(header, config.y_columns, config.types);
  }
  out.space_x = build_space(xc, config, out.data.x);
  out.space_y = build_space(yc, config, out.data.y);
  check_inside(out.space_x, out.data.x, lines, config.x_columns);
  check_inside(out.space_y, out.data.y, lines, config.y_columns);
  return out;
}

Dataset load_test_data(const PosteriorTree& tree, const std::string& path) {
  RunConfig config;
  config.x_columns = tree.x_names();
  config.y_columns = tree.y_names();
  for (std::size_t d = 0; d < tree.space_x().dims(); ++d) config.types[config.x_columns[d]] = tree.space_x().dim(d).kind;
  for (std::size_t d = 0; d < tree.space_y().dims(); ++d) config.types[config.y_columns[d]] = tree.space_y().dim(d).kind;
  std::vector<std::string> header;
  std::vector<Column> xc;
  std::vector<Column> yc;
  Dataset data{PointMatrix(0, config.x_columns.size()), PointMatrix(0, config.y_columns.size()), config.x_columns,
               config.y_columns};
  std::vector<std::size_t> lines;
  std::vector<double> values;
  bool located = false;
  read_csv(path, header, [&](std::size_t line, const std::vector<std::string>& fields) {
    if (!located) {
      xc = locate(header, config.x_columns, config.types);
      yc = locate(header, config.y_columns, config.types);
      located = true;
    }
    read_row(line, fields, xc, values);
    data.x.append_row(values);
    read_row(line, fields, yc, values);
    data.y.append_row(values);
    lines.push_back(line);
  });
  if (!located) {
    locate(header, config.x_columns, config.types);
    locate(header, config.y_columns, config.types);
  }
  check_inside(tree.space_x(), data.x, lines, config.x_columns);
  check_inside(tree.space_y(), data.y, lines, config.y_columns);
  return data;
}

PosteriorTree load_model(const std::string& path) { return parse_model(read_text(path)); }

void cmd_fit(const RunConfig& config, const std::string& data_csv, const std::string& model_out, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedData loaded = load_dataset(config, data_csv);
  const CondOptPrior prior = config.resolved_prior();
  const PosteriorTree tree = fit(loaded.space_x, loaded.space_y, prior, loaded.data, FitOptions{config.threads});
  write_atomic(model_out, serialize_model(tree));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json summary = {{"n", tree.sample_size()},
                  {"rho_post_root", tree.rho_post(0)},
                  {"log_phi_root", tree.log_phi(0)},
                  {"wall_seconds", seconds},
                  {"nodes", tree.size()}};
  out << summary.dump() << "\n";
}

void cmd_grid(const std::string& model_path, const GridSpec& spec, const std::string& out_csv, std::ostream& out) {
  const PosteriorTree tree = load_model(model_path);
  std::vector<std::vector<double>> xs = spec.xs;
  if (xs.empty()) {
    if (spec.x_grid == 0) throw ConfigError("grid needs predictor points or a predictor grid size");
    double unused = 0.0;
    xs = cartesian(axis_points(tree.space_x(), spec.x_grid, unused));
  }
  if (spec.y_resolution == 0) throw ConfigError("response grid resolution must be positive");
  double volume = 1.0;
  const auto ys = cartesian(axis_points(tree.space_y(), spec.y_resolution, volume));

  std::ostringstream csv;
  for (const auto& n : tree.x_names()) csv << n << ",";
  for (const auto& n : tree.y_names()) csv << n << ",";
  csv << "density\n";
  json sums = json::array();
  for (const auto& x : xs) {
    if (x.size() != tree.space_x().dims()) {
      throw ConfigError("grid point has " + std::to_string(x.size()) + " coordinates, the predictor space has " +
                        std::to_string(tree.space_x().dims()));
    }
    const ConditionalDensity density = predictive(tree, x);
    double riemann = 0.0;
    for (const auto& y : ys) {
      const double v = density(y);
      riemann += v * volume;
      for (double c : x) csv << format_double(c) << ",";
      for (double c : y) csv << format_double(c) << ",";
      csv << format_double(v) << "\n";
    }
    sums.push_back(riemann);
  }
  write_atomic(out_csv, csv.str());
  out << json{{"points", xs.size()}, {"rows", xs.size() * ys.size()}, {"riemann_sums", sums}}.dump() << "\n";
}

std::string hmap_svg(const HmapTree& tree) {
  const SampleSpace& space = tree.space_x;
  if (space.dims() == 0 || space.dims() > 2) return {};
  constexpr double size = 400.0;
  constexpr double pad = 20.0;
  const auto unit = [&](const Region& r, std::size_t d) -> std::pair<double, double> {
    const Dimension& dim = space.dim(d);
    const auto [lo, hi] = r.bounds(space, d);
    if (dim.kind == DimKind::binary) {
      if (r.cell(d).level == 0) return {0.0, 1.0};
      return {lo * 0.5, lo * 0.5 + 0.5};
    }
    return {(lo - dim.lo) / (dim.hi - dim.lo), (hi - dim.lo) / (dim.hi - dim.lo)};
  };
  std::ostringstream svg;
  svg.precision(6);
  const double height = space.dims() == 1 ? 80.0 : size;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << height + 2 * pad
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (const std::size_t i : tree.leaves()) {
    const Region r = tree.region(i);
    const auto [x0, x1] = unit(r, 0);
    double y0 = 0.0;
    double y1 = 1.0;
    if (space.dims() == 2) std::tie(y0, y1) = unit(r, 1);
    const double px = pad + x0 * size;
    const double pw = (x1 - x0) * size;
    const double py = pad + (1.0 - y1) * height;
    const double ph = (y1 - y0) * height;
    svg << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"#dde8f4\" stroke=\"#1f3b5c\"/>\n";
    svg << "<text x=\"" << px + pw / 2 << "\" y=\"" << py + ph / 2 << "\" text-anchor=\"middle\">n=" << tree.nodes[i].n
        << " rho=" << tree.nodes[i].rho_post << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void cmd_hmap(const std::string& model_path, const std::string& out_json, const std::string& svg_path,
              std::ostream& out) {
  const PosteriorTree tree = load_model(model_path);
  const HmapTree h = hmap(tree);
  json nodes = json::array();
  for (std::size_t i = 0; i < h.nodes.size(); ++i) {
    const HmapNode& n = h.nodes[i];
    const Region r = h.region(i);
    json path = json::array();
    for (const PathStep& s : r.path()) path.push_back({s.dim, static_cast<int>(s.side)});
    json node = {{"id", i},
                 {"region", r.describe(tree.space_x())},
                 {"path", path},
                 {"depth", n.depth},
                 {"n", n.n},
                 {"rho_post", n.rho_post}};
    if (n.split_dim < 0) {
      node["split_dim"] = nullptr;
    } else {
      node["split_dim"] = n.split_dim;
      node["split_name"] = tree.x_names().at(static_cast<std::size_t>(n.split_dim));
      node["lambda_post"] = n.lambda_post;
      node["children"] = {n.left, n.right};
    }
    nodes.push_back(node);
  }
  const json doc = {{"space_x", space_json(tree.space_x(), tree.x_names())}, {"nodes", nodes}, {"leaves", h.leaves()}};
  write_atomic(out_json, doc.dump(2));
  bool wrote_svg = false;
  if (!svg_path.empty()) {
    const std::string svg = hmap_svg(h);
    if (!svg.empty()) {
      write_atomic(svg_path, svg);
      wrote_svg = true;
    }
  }
  out << json{{"nodes", h.nodes.size()}, {"leaves", h.leaves().size()}, {"svg", wrote_svg}}.dump() << "\n";
}

void cmd_test(const RunConfig& config, const std::string& data_csv, const std::string& out_json, std::ostream& out) {
  const LoadedData loaded = load_dataset(config, data_csv);
  IndependenceOptions options;
  options.permutations = config.permutations;
  options.seed = config.seed;
  options.direction = parse_direction(config.direction);
  options.threads = config.threads;
  if (loaded.data.size() < 2) throw InputError("the independence test needs at least two rows");
  const IndependenceResult r =
      independence_test(loaded.space_x, loaded.space_y, loaded.data, config.resolved_prior(), options);
  const json doc = {{"stat_observed", r.stat_observed},
                    {"p_value", r.p_value},
                    {"bayes_factor", std::isfinite(r.bayes_factor) ? json(r.bayes_factor) : json("inf")},
                    {"direction", to_string(r.direction)},
                    {"degenerate", r.degenerate},
                    {"permutations", r.null_stats.size()},
                    {"null_histogram", {{"lo", 0.0}, {"hi", 1.0}, {"counts", r.null_histogram}}},
                    {"null_stats", r.null_stats}};
  write_atomic(out_json, doc.dump(2));
  out << json{{"stat_observed", r.stat_observed}, {"p_value", r.p_value}, {"degenerate", r.degenerate}}.dump() << "\n";
}

void cmd_simulate(const std::string& scenario, std::size_t n, std::uint64_t seed, const std::string& out_csv,
                  const std::string& config_out, std::ostream& out) {
  const SimulatedData sim = simulate(Scenario{scenario, n, seed});
  std::ostringstream csv;
  const auto& names_x = sim.data.x_names;
  const auto& names_y = sim.data.y_names;
  for (std::size_t j = 0; j < names_x.size(); ++j) csv << names_x[j] << ",";
  for (std::size_t j = 0; j < names_y.size(); ++j) csv << names_y[j] << (j + 1 < names_y.size() ? "," : "\n");
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    for (double v : sim.data.x.row(i)) csv << format_double(v) << ",";
    const auto yr = sim.data.y.row(i);
    for (std::size_t j = 0; j < yr.size(); ++j) csv << format_double(yr[j]) << (j + 1 < yr.size() ? "," : "\n");
  }
  write_atomic(out_csv, csv.str());
  if (!config_out.empty()) {
    RunConfig c;
    c.x_columns = names_x;
    c.y_columns = names_y;
    const auto declare = [&](const SampleSpace& space, const std::vector<std::string>& names, bool empirical) {
      for (std::size_t d = 0; d < space.dims(); ++d) {
        const Dimension& dim = space.dim(d);
        c.types[names[d]] = dim.kind;
        if (dim.kind == DimKind::continuous && !empirical) c.bounds[names[d]] = {dim.lo, dim.hi};
      }
    };
    // The bivariate-normal scenario is rooted on the observed range.
    const bool empirical = scenario == "ex2-bivariate-normal";
    declare(sim.space_x, names_x, empirical);
    declare(sim.space_y, names_y, empirical);
    write_atomic(config_out, render_config(c));
  }
  out << json{{"scenario", scenario}, {"n", n}, {"seed", seed}}.dump() << "\n";
}

void cmd_logp(const std::string& model_path, const std::string& test_csv, std::ostream& out) {
  const PosteriorTree tree = load_model(model_path);
  const Dataset test = load_test_data(tree, test_csv);
  out << json{{"n", test.size()}, {"log_p", log_predictive_score(tree, test)}}.dump() << "\n";
}

}  // namespace condopt::cli

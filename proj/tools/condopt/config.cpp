// Apache License, Version 2.0, refer to LICENSE.txt
#include "config.hpp"

#include <charconv>
#include <sstream>

#include "condopt/errors.hpp"
#include "io.hpp"

namespace condopt::cli {

namespace {

double number(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!parse_double(trim(value), v)) throw ConfigError("setting '" + key + "' expects a number, got '" + value + "'");
  return v;
}

template <typename Int>
Int integer(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  Int v{};
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size() || v < Int{0}) {
    throw ConfigError("setting '" + key + "' expects a nonnegative integer, got '" + value + "'");
  }
  return v;
}

std::vector<std::string> names(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& part : split(value, ',')) {
    std::string t = trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<double> numbers(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split(value, ',')) out.push_back(number(key, part));
  return out;
}

}  // namespace

std::pair<std::string, std::string> split_setting(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "x") {
    c.x_columns = names(value);
  } else if (key == "y") {
    c.y_columns = names(value);
  } else if (key.rfind("type.", 0) == 0) {
    const std::string col = key.substr(5);
    if (value == "continuous") {
      c.types[col] = DimKind::continuous;
    } else if (value == "binary") {
      c.types[col] = DimKind::binary;
    } else {
      throw ConfigError("column type must be continuous or binary, got '" + value + "'");
    }
  } else if (key.rfind("bounds.", 0) == 0) {
    const auto v = numbers(key, value);
    if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError("setting '" + key + "' expects lo,hi with lo < hi");
    c.bounds[key.substr(7)] = {v[0], v[1]};
  } else if (key == "rho") {
    c.prior.rho = number(key, value);
  } else if (key == "rho_y") {
    c.prior.local.rho = number(key, value);
  } else if (key == "alpha") {
    const auto v = numbers(key, value);
    if (v.size() == 1) {
      c.prior.local.alpha_left = c.prior.local.alpha_right = v[0];
    } else if (v.size() == 2) {
      c.prior.local.alpha_left = v[0];
      c.prior.local.alpha_right = v[1];
    } else {
      throw ConfigError("alpha expects one value or a pair");
    }
  } else if (key == "weights_x") {
    c.prior.dim_weights = numbers(key, value);
  } else if (key == "weights_y") {
    c.prior.local.dim_weights = numbers(key, value);
  } else if (key == "max_depth_x") {
    c.max_depth_x = integer<int>(key, value);
  } else if (key == "max_depth_y") {
    c.max_depth_y = integer<int>(key, value);
  } else if (key == "min_points") {
    c.prior.min_points = integer<std::uint32_t>(key, value);
  } else if (key == "seed") {
    c.seed = integer<std::uint64_t>(key, value);
  } else if (key == "threads") {
    c.threads = integer<unsigned>(key, value);
    if (c.threads == 0) throw ConfigError("threads must be at least 1");
  } else if (key == "profile") {
    if (value != "default" && value != "flow") throw ConfigError("profile must be default or flow");
    c.profile = value;
  } else if (key == "permutations") {
    c.permutations = integer<std::size_t>(key, value);
    if (c.permutations == 0) throw ConfigError("permutations must be at least 1");
  } else if (key == "draws") {
    c.draws = integer<std::size_t>(key, value);
    if (c.draws == 0) throw ConfigError("draws must be at least 1");
  } else if (key == "direction") {
    if (value != "y|x" && value != "x|y" && value != "min") throw ConfigError("direction must be y|x, x|y or min");
    c.direction = value;
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

void apply_file(RunConfig& config, const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      const auto [key, value] = split_setting(line);
      apply_setting(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

CondOptPrior RunConfig::resolved_prior() const {
  CondOptPrior p = prior;
  const bool flow = profile == "flow";
  bool continuous = true;
  for (const auto& col : x_columns) {
    const auto it = types.find(col);
    if (it != types.end() && it->second == DimKind::binary) continuous = false;
  }
  p.max_depth_x = max_depth_x.value_or(flow ? 10 : (continuous ? 12 : 4));
  p.local.max_depth = max_depth_y.value_or(flow ? 10 : 12);
  return p;
}

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  out << "x=" << join(c.x_columns) << "\n";
  out << "y=" << join(c.y_columns) << "\n";
  for (const auto& [col, kind] : c.types) {
    out << "type." << col << "=" << (kind == DimKind::binary ? "binary" : "continuous") << "\n";
  }
  for (const auto& [col, b] : c.bounds) {
    out << "bounds." << col << "=" << format_double(b.first) << "," << format_double(b.second) << "\n";
  }
  if (c.max_depth_x) out << "max_depth_x=" << *c.max_depth_x << "\n";
  if (c.max_depth_y) out << "max_depth_y=" << *c.max_depth_y << "\n";
  if (c.profile != "default") out << "profile=" << c.profile << "\n";
  return out.str();
}

}  // namespace condopt::cli

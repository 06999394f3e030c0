// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/model_io.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "condopt/errors.hpp"

namespace condopt {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "condopt-posterior";
constexpr int kVersion = 1;

// JSON has no infinities; spell them out.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError("expected a number in model file, got " + j.dump());
}

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::expanded:
      return "expanded";
    case NodeKind::terminal:
      return "terminal";
    case NodeKind::singleton:
      return "singleton";
    case NodeKind::empty:
      return "empty";
  }
  return "empty";
}

NodeKind parse_kind(const std::string& s) {
  if (s == "expanded") return NodeKind::expanded;
  if (s == "terminal") return NodeKind::terminal;
  if (s == "singleton") return NodeKind::singleton;
  if (s == "empty") return NodeKind::empty;
  throw InputError("unknown node kind '" + s + "' in model file");
}

json space_json(const SampleSpace& space) {
  json dims = json::array();
  for (const Dimension& d : space.dimensions()) {
    if (d.kind == DimKind::binary) {
      dims.push_back({{"kind", "binary"}});
    } else {
      dims.push_back({{"kind", "continuous"}, {"lo", d.lo}, {"hi", d.hi}});
    }
  }
  return dims;
}

SampleSpace parse_space(const json& j) {
  std::vector<Dimension> dims;
  for (const json& d : j) {
    const auto kind = d.at("kind").get<std::string>();
    if (kind == "binary") {
      dims.push_back(Dimension::binary());
    } else if (kind == "continuous") {
      dims.push_back(Dimension::continuous(d.at("lo").get<double>(), d.at("hi").get<double>()));
    } else {
      throw InputError("unknown dimension kind '" + kind + "' in model file");
    }
  }
  return SampleSpace(std::move(dims));
}

json matrix_json(const PointMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

PointMatrix parse_matrix(const json& j, std::size_t cols) {
  PointMatrix m(0, cols);
  for (const json& row : j) {
    const auto values = row.get<std::vector<double>>();
    if (values.size() != cols) throw InputError("data row of wrong width in model file");
    m.append_row(values);
  }
  return m;
}

json prior_json(const CondOptPrior& p) {
  return {{"rho", p.rho},
          {"dim_weights", p.dim_weights},
          {"max_depth_x", p.max_depth_x},
          {"min_points", p.min_points},
          {"local",
           {{"rho", p.local.rho},
            {"dim_weights", p.local.dim_weights},
            {"alpha", {p.local.alpha_left, p.local.alpha_right}},
            {"max_depth", p.local.max_depth}}}};
}

CondOptPrior parse_prior(const json& j) {
  CondOptPrior p;
  p.rho = j.at("rho").get<double>();
  p.dim_weights = j.at("dim_weights").get<std::vector<double>>();
  p.max_depth_x = j.at("max_depth_x").get<int>();
  p.min_points = j.at("min_points").get<std::uint32_t>();
  const json& l = j.at("local");
  p.local.rho = l.at("rho").get<double>();
  p.local.dim_weights = l.at("dim_weights").get<std::vector<double>>();
  const auto alpha = l.at("alpha").get<std::vector<double>>();
  if (alpha.size() != 2) throw InputError("alpha must hold two pseudo-counts");
  p.local.alpha_left = alpha[0];
  p.local.alpha_right = alpha[1];
  p.local.max_depth = l.at("max_depth").get<int>();
  return p;
}

}  // namespace

std::string serialize_model(const PosteriorTree& tree) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["space_x"] = space_json(tree.space_x());
  doc["space_y"] = space_json(tree.space_y());
  doc["x_names"] = tree.x_names();
  doc["y_names"] = tree.y_names();
  doc["prior"] = prior_json(tree.prior());
  doc["data"] = {{"x", matrix_json(tree.x())}, {"y", matrix_json(tree.y())}};
  json nodes = json::array();
  const KeyLayout& layout = tree.index().layout();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const PosteriorNode node = tree.node(i);
    json path = json::array();
    for (const PathStep& s : layout.decode(node.key).path()) {
      path.push_back({s.dim, static_cast<int>(s.side)});
    }
    json lambda = json::array();
    json dims = json::array();
    json children = json::object();
    for (std::size_t j = 0; j < node.splits.size(); ++j) {
      const PosteriorSplit& s = node.splits[j];
      lambda.push_back(number(s.lambda_post));
      dims.push_back(s.dim);
      const auto ref = [](std::int32_t c) { return c < 0 ? json(nullptr) : json(c); };
      children[std::to_string(j)] = {ref(s.left), ref(s.right)};
    }
    nodes.push_back({{"path", std::move(path)},
                     {"n", node.n},
                     {"kind", kind_name(node.kind)},
                     {"log_phi", number(node.log_phi)},
                     {"log_m", number(node.log_m)},
                     {"rho_post", number(node.rho_post)},
                     {"candidate_splits", std::move(dims)},
                     {"lambda_post", std::move(lambda)},
                     {"children", std::move(children)}});
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump();
}

PosteriorTree parse_model(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kFormat) throw InputError("not a condopt model file");
    if (doc.at("version").get<int>() != kVersion) throw InputError("unsupported model file version");
    const SampleSpace space_x = parse_space(doc.at("space_x"));
    const SampleSpace space_y = parse_space(doc.at("space_y"));
    const CondOptPrior prior = parse_prior(doc.at("prior"));
    try {
      prior.validate(space_x, space_y);
    } catch (const ConfigError& e) {
      throw InputError(std::string("model prior is invalid: ") + e.what());
    }
    const PointMatrix x = parse_matrix(doc.at("data").at("x"), space_x.dims());
    const PointMatrix y = parse_matrix(doc.at("data").at("y"), space_y.dims());
    auto index = PredictorIndex::build(space_x, prior, x);

    std::vector<PosteriorNode> values;
    for (const json& n : doc.at("nodes")) {
      PosteriorNode v;
      std::vector<PathStep> path;
      for (const json& step : n.at("path")) {
        const int side = step.at(1).get<int>();
        if (side != 0 && side != 1) throw InputError("path side must be 0 or 1");
        path.push_back(PathStep{step.at(0).get<std::size_t>(), side == 0 ? Side::left : Side::right});
      }
      const Region region = Region::from_path(space_x, path);
      v.key = index->layout().encode(region);
      v.depth = region.depth();
      v.n = n.at("n").get<std::uint32_t>();
      v.kind = parse_kind(n.at("kind").get<std::string>());
      v.log_phi = read_number(n.at("log_phi"));
      v.log_m = read_number(n.at("log_m"));
      v.rho_post = read_number(n.at("rho_post"));
      const json& dims = n.at("candidate_splits");
      const json& lambda = n.at("lambda_post");
      if (dims.size() != lambda.size()) throw InputError("lambda_post does not align with candidate_splits");
      for (std::size_t j = 0; j < dims.size(); ++j) {
        v.splits.push_back(PosteriorSplit{dims[j].get<std::size_t>(), read_number(lambda[j]), -1, -1});
      }
      values.push_back(std::move(v));
    }
    PosteriorTree tree = PosteriorTree::from_values(std::move(index), space_y, prior, y, values);
    tree.set_names(doc.at("x_names").get<std::vector<std::string>>(), doc.at("y_names").get<std::vector<std::string>>());
    return tree;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  } catch (const ContractError& e) {
    throw InputError(std::string("inconsistent model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("invalid model file: ") + e.what());
  }
}

}  // namespace condopt

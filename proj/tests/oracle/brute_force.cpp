// Apache License, Version 2.0, refer to LICENSE.txt
#include "brute_force.hpp"

#include <cmath>
#include <functional>

namespace oracle {

namespace {

double rising(double a, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= a + i;
  return r;
}

double dirichlet_multinomial(double a, double b, int nl, int nr) {
  return rising(a, nl) * rising(b, nr) / rising(a + b, nl + nr);
}

// Response cells. Continuous: (level, index) of a dyadic interval of [0,1].
// Binary: level 0 is {0,1}, level 1 fixes the value to index.
struct RCell {
  int level = 0;
  int index = 0;
};

struct RTree {
  double prior = 1.0;
  std::vector<RCell> leaves;
  std::vector<RCell> internal;
};

bool in_cell(const Instance& inst, const RCell& c, double y) {
  if (inst.binary_response) return c.level == 0 || static_cast<int>(y) == c.index;
  const int cells = 1 << c.level;
  int i = static_cast<int>(std::floor(y * cells));
  if (i >= cells) i = cells - 1;
  return i == c.index;
}

double cell_measure(const Instance& inst, const RCell& c) {
  if (inst.binary_response) return c.level == 0 ? 2.0 : 1.0;
  return std::ldexp(1.0, -c.level);
}

std::vector<RTree> response_trees(const Instance& inst, const RCell& c, int depth) {
  const bool divisible = inst.binary_response ? c.level == 0 : true;
  if (depth >= inst.depth_y || !divisible) return {RTree{1.0, {c}, {}}};
  std::vector<RTree> out{RTree{inst.rho_y, {c}, {}}};
  const RCell left{c.level + 1, 2 * c.index};
  const RCell right{c.level + 1, 2 * c.index + 1};
  const RCell bl{1, 0};
  const RCell br{1, 1};
  const auto lt = response_trees(inst, inst.binary_response ? bl : left, depth + 1);
  const auto rt = response_trees(inst, inst.binary_response ? br : right, depth + 1);
  for (const auto& l : lt) {
    for (const auto& r : rt) {
      RTree t;
      t.prior = (1.0 - inst.rho_y) * l.prior * r.prior;  // a single split to choose from
      t.leaves = l.leaves;
      t.leaves.insert(t.leaves.end(), r.leaves.begin(), r.leaves.end());
      t.internal = {c};
      t.internal.insert(t.internal.end(), l.internal.begin(), l.internal.end());
      t.internal.insert(t.internal.end(), r.internal.begin(), r.internal.end());
      out.push_back(std::move(t));
    }
  }
  return out;
}

double tree_likelihood(const Instance& inst, const RTree& t, const std::vector<double>& ys) {
  double like = 1.0;
  for (const RCell& c : t.internal) {
    const RCell l = inst.binary_response ? RCell{1, 0} : RCell{c.level + 1, 2 * c.index};
    const RCell r = inst.binary_response ? RCell{1, 1} : RCell{c.level + 1, 2 * c.index + 1};
    int nl = 0;
    int nr = 0;
    for (double y : ys) {
      if (!in_cell(inst, c, y)) continue;
      if (in_cell(inst, l, y)) ++nl;
      if (in_cell(inst, r, y)) ++nr;
    }
    like *= dirichlet_multinomial(inst.a, inst.b, nl, nr);
  }
  for (const RCell& c : t.leaves) {
    int n = 0;
    for (double y : ys) n += in_cell(inst, c, y) ? 1 : 0;
    like *= std::pow(cell_measure(inst, c), -n);
  }
  return like;
}

// Predictor cells: per dimension -1 (free) or the fixed value.
using XCell = std::vector<int>;

struct XTree {
  double prior = 1.0;
  int root_choice = -1;  // -1 stop, else the split dimension
  std::vector<XCell> leaves;
};

std::vector<XTree> partition_trees(const Instance& inst, const XCell& c, int depth) {
  std::vector<int> dims;
  for (int d = 0; d < inst.dx; ++d) {
    if (c[static_cast<std::size_t>(d)] < 0) dims.push_back(d);
  }
  if (depth >= inst.depth_x || dims.empty()) return {XTree{1.0, -1, {c}}};
  double total = 0.0;
  for (int d : dims) total += inst.wx.empty() ? 1.0 : inst.wx[static_cast<std::size_t>(d)];
  std::vector<XTree> out{XTree{inst.rho, -1, {c}}};
  for (int d : dims) {
    const double lambda = (inst.wx.empty() ? 1.0 : inst.wx[static_cast<std::size_t>(d)]) / total;
    XCell l = c;
    XCell r = c;
    l[static_cast<std::size_t>(d)] = 0;
    r[static_cast<std::size_t>(d)] = 1;
    const auto lt = partition_trees(inst, l, depth + 1);
    const auto rt = partition_trees(inst, r, depth + 1);
    for (const auto& a : lt) {
      for (const auto& b : rt) {
        XTree t;
        t.prior = (1.0 - inst.rho) * lambda * a.prior * b.prior;
        t.root_choice = d;
        t.leaves = a.leaves;
        t.leaves.insert(t.leaves.end(), b.leaves.begin(), b.leaves.end());
        out.push_back(std::move(t));
      }
    }
  }
  return out;
}

bool x_in(const XCell& c, const std::vector<int>& x) {
  for (std::size_t d = 0; d < c.size(); ++d) {
    if (c[d] >= 0 && c[d] != x[d]) return false;
  }
  return true;
}

}  // namespace

double local_marginal(const Instance& inst, const std::vector<double>& ys) {
  double m = 0.0;
  for (const RTree& t : response_trees(inst, RCell{0, 0}, 0)) m += t.prior * tree_likelihood(inst, t, ys);
  return m;
}

std::size_t partition_tree_count(const Instance& inst) {
  return partition_trees(inst, XCell(static_cast<std::size_t>(inst.dx), -1), 0).size();
}

Result evaluate(const Instance& inst) {
  Result res;
  const XCell root(static_cast<std::size_t>(inst.dx), -1);
  const auto trees = partition_trees(inst, root, 0);
  if (inst.depth_x > 0) {
    for (int d = 0; d < inst.dx; ++d) res.split_dims.push_back(d);
  }
  res.split.assign(res.split_dims.size(), 0.0);
  for (const XTree& t : trees) {
    double like = 1.0;
    for (const XCell& leaf : t.leaves) {
      std::vector<double> ys;
      for (std::size_t i = 0; i < inst.x.size(); ++i) {
        if (x_in(leaf, inst.x[i])) ys.push_back(inst.y[i]);
      }
      like *= local_marginal(inst, ys);
    }
    const double term = t.prior * like;
    res.phi += term;
    if (t.root_choice < 0) {
      res.stop += term;
    } else {
      res.split[static_cast<std::size_t>(t.root_choice)] += term;
    }
  }
  return res;
}

}  // namespace oracle

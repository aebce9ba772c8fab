#include "design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace drmatch {

std::vector<std::string> covariates_with_roles(const CovariateSchema& schema,
                                               bool matching, bool blocking,
                                               bool adjust_only) {
  std::vector<std::string> out;
  for (const auto& e : schema.entries) {
    bool want = (e.role == Role::Matching && matching) ||
                (e.role == Role::Blocking && blocking) ||
                (e.role == Role::OutcomeAdjustOnly && adjust_only);
    if (want) out.push_back(e.name);
  }
  return out;
}

DesignLayout make_layout(const CohortTable& t, const std::vector<size_t>& rows,
                         const DesignSpec& spec) {
  DesignLayout layout;
  layout.column_names.push_back("(intercept)");

  auto add_base = [&](const std::string& name) {
    DesignLayout::Base base;
    base.name = name;
    if (name == t.pos_name) {
      base.is_pos = true;
      base.kind = Kind::Numeric;
      layout.column_names.push_back(name);
      layout.bases.push_back(std::move(base));
      return;
    }
    const SchemaEntry* entry = t.schema.find(name);
    const Column* col = t.covariate(name);
    if (!entry || !col)
      fail(Status::MissingColumn, "design variable '" + name + "' not found");
    base.kind = entry->kind;
    if (entry->kind == Kind::Numeric) {
      layout.column_names.push_back(name);
    } else {
      std::set<std::string> levels;
      for (size_t i : rows) {
        if (col->cells[i].empty())
          fail(Status::InvalidSpec, "categorical '" + name +
                                        "' has missing cells; impute before "
                                        "building a design");
        levels.insert(col->cells[i]);
      }
      bool first = true;  // smallest level is the reference, dropped
      for (const auto& lv : levels) {
        if (first) {
          first = false;
          continue;
        }
        base.levels.push_back(lv);
        layout.column_names.push_back(name + "=" + lv);
      }
    }
    layout.bases.push_back(std::move(base));
  };

  for (const auto& name : spec.covariates) add_base(name);
  if (spec.include_pos) add_base(t.pos_name);

  // interaction column names mirror the expanded pair blocks
  auto base_names = [&](const std::string& name) {
    for (const auto& b : layout.bases)
      if (b.name == name) {
        std::vector<std::string> out;
        if (b.kind == Kind::Numeric) out.push_back(b.name);
        else
          for (const auto& lv : b.levels) out.push_back(b.name + "=" + lv);
        return out;
      }
    fail(Status::MissingColumn,
         "interaction references '" + name + "' which is not in the design");
  };
  for (const auto& [a, b] : spec.interactions) {
    for (const auto& an : base_names(a))
      for (const auto& bn : base_names(b))
        layout.column_names.push_back(an + ":" + bn);
    layout.interactions.emplace_back(a, b);
  }
  return layout;
}

namespace {

// expanded columns of one base variable, in layout order
void base_columns(const CohortTable& t, const std::vector<size_t>& rows,
                  const DesignLayout::Base& base,
                  std::vector<std::vector<double>>& out) {
  size_t n = rows.size();
  out.clear();
  if (base.is_pos) {
    std::vector<double> col(n);
    for (size_t r = 0; r < n; ++r) {
      double v = t.pos[rows[r]];
      if (std::isnan(v))
        fail(Status::InvalidSpec,
             "row " + t.ids[rows[r]] + ": " + t.pos_name +
                 " is missing but enters the design");
      col[r] = v;
    }
    out.push_back(std::move(col));
    return;
  }
  const Column* c = t.covariate(base.name);
  if (!c) fail(Status::MissingColumn, "design variable '" + base.name + "' not found");
  if (base.kind == Kind::Numeric) {
    std::vector<double> col(n);
    for (size_t r = 0; r < n; ++r) {
      double v;
      if (!parse_double(c->cells[rows[r]], &v))
        fail(Status::InvalidSpec, "numeric covariate '" + base.name +
                                      "' has unparseable cell '" +
                                      c->cells[rows[r]] + "' (row id " +
                                      t.ids[rows[r]] + ")");
      col[r] = v;
    }
    out.push_back(std::move(col));
    return;
  }
  for (const auto& lv : base.levels) {
    std::vector<double> col(n, 0.0);
    for (size_t r = 0; r < n; ++r)
      if (c->cells[rows[r]] == lv) col[r] = 1.0;
    out.push_back(std::move(col));
  }
}

}  // namespace

Eigen::MatrixXd apply_layout(const CohortTable& t, const std::vector<size_t>& rows,
                             const DesignLayout& layout) {
  size_t n = rows.size();
  Eigen::MatrixXd X(n, layout.n_columns());
  X.col(0).setOnes();
  size_t j = 1;

  std::map<std::string, std::vector<std::vector<double>>> cache;
  for (const auto& base : layout.bases) {
    auto& cols = cache[base.name];
    base_columns(t, rows, base, cols);
    for (const auto& col : cols) {
      for (size_t r = 0; r < n; ++r) X(r, j) = col[r];
      ++j;
    }
  }
  for (const auto& [a, b] : layout.interactions) {
    const auto& ca = cache.at(a);
    const auto& cb = cache.at(b);
    for (const auto& va : ca)
      for (const auto& vb : cb) {
        for (size_t r = 0; r < n; ++r) X(r, j) = va[r] * vb[r];
        ++j;
      }
  }
  return X;
}

}  // namespace drmatch

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "table.hpp"

namespace drmatch {

// Which variables enter a model. Categorical covariates expand to one-hot
// indicators with the lexicographically smallest level as reference;
// interactions multiply the expanded columns of the named pair.
struct DesignSpec {
  std::vector<std::string> covariates;
  bool include_pos = false;
  std::vector<std::pair<std::string, std::string>> interactions;
};

// Frozen expansion: level sets are fixed by the rows the layout was built
// on, so a model can later be evaluated on other rows with identical
// column structure (unseen levels fall into the reference).
struct DesignLayout {
  struct Base {
    std::string name;
    bool is_pos = false;
    Kind kind = Kind::Numeric;
    std::vector<std::string> levels;  // non-reference levels, sorted
  };
  std::vector<Base> bases;
  std::vector<std::pair<std::string, std::string>> interactions;
  std::vector<std::string> column_names;  // "(intercept)" first

  size_t n_columns() const { return column_names.size(); }
};

DesignLayout make_layout(const CohortTable& t, const std::vector<size_t>& rows,
                         const DesignSpec& spec);

// rows x columns matrix per the layout; missing values in design variables
// are an error here (imputation happens upstream)
Eigen::MatrixXd apply_layout(const CohortTable& t, const std::vector<size_t>& rows,
                             const DesignLayout& layout);

// names of the covariates a role set contributes, in schema order
std::vector<std::string> covariates_with_roles(const CovariateSchema& schema,
                                               bool matching, bool blocking,
                                               bool adjust_only);

}  // namespace drmatch

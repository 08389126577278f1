#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synthgate::tabular {

enum class VarKind { continuous, binary, categorical };
enum class VarRole { target, predictor, excluded };

std::string kind_name(VarKind k);
std::string role_name(VarRole r);

struct VariableSchema {
  std::string name;
  VarKind kind = VarKind::continuous;
  VarRole role = VarRole::predictor;
  std::vector<int> allowed_codes;          // binary/categorical only
  std::map<int, std::string> code_labels;  // documentation only
  std::vector<int> missing_codes;
  std::map<int, int> recode_map;
};

// throws on violated schema invariants (one continuous target, >= 2 codes
// per categorical after recoding, missing/allowed disjoint after recoding)
void validate_schema(const std::vector<VariableSchema>& schema);

std::vector<VariableSchema> parse_schema(const std::string& text);
std::vector<VariableSchema> load_schema_file(const std::string& path);
std::string schema_to_text(const std::vector<VariableSchema>& schema);

// Column-major typed table. Cells are doubles; coded variables hold exact
// small integers; NaN marks an empty/NA cell awaiting clean().
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<VariableSchema> schema, std::vector<std::vector<double>> columns);

  std::size_t n() const { return columns_.empty() ? 0 : columns_[0].size(); }
  std::size_t n_vars() const { return schema_.size(); }
  const std::vector<VariableSchema>& schema() const { return schema_; }
  int column_index(std::string_view name) const;  // -1 when absent
  const std::vector<double>& column(std::size_t j) const { return columns_[j]; }
  const std::vector<double>& column(std::string_view name) const;

  int target_index() const;
  const VariableSchema& target_schema() const { return schema_[target_index()]; }
  const std::vector<double>& target() const { return columns_[target_index()]; }

  // same schema and predictors, target column replaced (partial synthesis)
  Dataset with_target(std::span<const double> values) const;

 private:
  std::vector<VariableSchema> schema_;
  std::vector<std::vector<double>> columns_;
};

// parse + type-check against the schema; cells holding missing codes load
// fine and are dropped later by clean()
Dataset load_csv_dataset(const std::string& path, std::vector<VariableSchema> schema);
Dataset dataset_from_text(const std::string& csv_text, std::vector<VariableSchema> schema);
std::string dataset_to_csv(const Dataset& ds);

struct CleanLog {
  struct Rule {
    std::string variable;
    std::optional<int> code;  // nullopt = empty/NA cell
    std::size_t dropped = 0;
  };
  std::vector<Rule> rules;
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::size_t total_dropped = 0;
};

// Complete-case cleaning: a row is dropped if any cell is empty or holds one
// of its variable's missing codes; each dropped row is attributed to the
// first rule that fires (schema order, NA before codes, codes in listed
// order). recode_map is applied to the surviving rows and to the schema.
Dataset clean(const Dataset& ds, CleanLog* log = nullptr);

struct IncomeForms {
  std::vector<std::uint8_t> income_b;  // length n; 1 = non-zero target
  std::vector<double> income_c;        // strictly positive, length = sum(income_b)
};
IncomeForms derive_income_forms(const Dataset& ds);

// uniform without replacement, deterministic in seed; row order preserved
Dataset sample_rows(const Dataset& ds, std::size_t n, std::uint64_t seed);

struct EncodingOptions {
  bool standardize_continuous = true;
  bool numeric_categorical = false;  // treat categorical codes as plain numbers
};

struct DesignMatrix {
  Eigen::MatrixXd X;  // first column constant 1
  std::vector<std::string> col_names;
  struct Transform {
    std::string variable;
    double mean = 0;
    double sd = 1;
  };
  std::vector<Transform> transforms;  // recorded for exact reproducibility

  std::size_t n_rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t n_cols() const { return static_cast<std::size_t>(X.cols()); }
};

// intercept + dummy-coded categoricals/binaries (reference = lowest code) +
// continuous predictors, standardized when opts say so
DesignMatrix design_matrix(const Dataset& ds, const EncodingOptions& opts = {});

DesignMatrix restrict_rows(const DesignMatrix& dm, std::span<const std::size_t> rows);

}  // namespace synthgate::tabular

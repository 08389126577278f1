#include "synthgate/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "synthgate/csv.hpp"
#include "synthgate/rng.hpp"
#include "synthgate/util.hpp"

namespace synthgate::tabular {

std::string kind_name(VarKind k) {
  switch (k) {
    case VarKind::continuous: return "continuous";
    case VarKind::binary: return "binary";
    case VarKind::categorical: return "categorical";
  }
  return "?";
}

std::string role_name(VarRole r) {
  switch (r) {
    case VarRole::target: return "target";
    case VarRole::predictor: return "predictor";
    case VarRole::excluded: return "excluded";
  }
  return "?";
}

namespace {

std::vector<int> recoded_codes(const VariableSchema& v) {
  std::set<int> out;
  for (int c : v.allowed_codes) {
    auto it = v.recode_map.find(c);
    out.insert(it == v.recode_map.end() ? c : it->second);
  }
  return {out.begin(), out.end()};
}

}  // namespace

void validate_schema(const std::vector<VariableSchema>& schema) {
  if (schema.empty()) throw std::invalid_argument("schema: no variables");
  int targets = 0;
  std::set<std::string> names;
  for (const auto& v : schema) {
    if (v.name.empty()) throw std::invalid_argument("schema: unnamed variable");
    if (!names.insert(v.name).second)
      throw std::invalid_argument("schema: duplicate variable " + v.name);
    if (v.role == VarRole::target) {
      ++targets;
      if (v.kind != VarKind::continuous)
        throw std::invalid_argument("schema: target " + v.name + " must be continuous");
    }
    if (v.kind != VarKind::continuous) {
      const auto codes = recoded_codes(v);
      if (codes.size() < 2)
        throw std::invalid_argument("schema: " + v.name +
                                    " needs >= 2 allowed codes after recoding");
      if (v.kind == VarKind::binary && codes.size() != 2)
        throw std::invalid_argument("schema: binary " + v.name + " must have exactly 2 codes");
      for (int mc : v.missing_codes) {
        auto it = v.recode_map.find(mc);
        const int recoded = it == v.recode_map.end() ? mc : it->second;
        if (std::binary_search(codes.begin(), codes.end(), recoded))
          throw std::invalid_argument("schema: " + v.name + " missing code " +
                                      std::to_string(mc) + " collides with allowed codes");
      }
    }
  }
  if (targets != 1)
    throw std::invalid_argument("schema: exactly one sensitive target required, found " +
                                std::to_string(targets));
}

namespace {

VarKind parse_kind(const std::string& s, int line_no) {
  if (s == "continuous") return VarKind::continuous;
  if (s == "binary") return VarKind::binary;
  if (s == "categorical") return VarKind::categorical;
  throw std::invalid_argument("schema line " + std::to_string(line_no) + ": unknown kind '" + s + "'");
}

VarRole parse_role(const std::string& s, int line_no) {
  if (s == "target" || s == "sensitive-target") return VarRole::target;
  if (s == "predictor") return VarRole::predictor;
  if (s == "excluded") return VarRole::excluded;
  throw std::invalid_argument("schema line " + std::to_string(line_no) + ": unknown role '" + s + "'");
}

int parse_int(const std::string& s, int line_no) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument("schema line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

// Grammar (line-oriented, '#' comments):
//   variable <name>
//   kind continuous|binary|categorical
//   role target|predictor|excluded
//   codes <int>[=label] ...
//   missing <int> ...
//   recode <old>-><new> ...
std::vector<VariableSchema> parse_schema(const std::string& text) {
  std::vector<VariableSchema> schema;
  VariableSchema* cur = nullptr;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (auto pos = line.find('#'); pos != std::string::npos) line = trim(line.substr(0, pos));
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<std::string> args;
    for (std::string a; ls >> a;) args.push_back(a);
    if (key == "variable") {
      if (args.size() != 1)
        throw std::invalid_argument("schema line " + std::to_string(line_no) +
                                    ": 'variable' takes one name");
      schema.push_back(VariableSchema{});
      cur = &schema.back();
      cur->name = args[0];
      continue;
    }
    if (!cur)
      throw std::invalid_argument("schema line " + std::to_string(line_no) +
                                  ": '" + key + "' before any 'variable'");
    if (key == "kind") {
      if (args.size() != 1) throw std::invalid_argument("schema line " + std::to_string(line_no) + ": kind takes one value");
      cur->kind = parse_kind(args[0], line_no);
    } else if (key == "role") {
      if (args.size() != 1) throw std::invalid_argument("schema line " + std::to_string(line_no) + ": role takes one value");
      cur->role = parse_role(args[0], line_no);
    } else if (key == "codes") {
      for (const auto& a : args) {
        const auto eq = a.find('=');
        const int code = parse_int(a.substr(0, eq), line_no);
        cur->allowed_codes.push_back(code);
        if (eq != std::string::npos) cur->code_labels[code] = a.substr(eq + 1);
      }
    } else if (key == "missing") {
      for (const auto& a : args) cur->missing_codes.push_back(parse_int(a, line_no));
    } else if (key == "recode") {
      for (const auto& a : args) {
        const auto arrow = a.find("->");
        if (arrow == std::string::npos)
          throw std::invalid_argument("schema line " + std::to_string(line_no) +
                                      ": recode entries look like old->new");
        cur->recode_map[parse_int(a.substr(0, arrow), line_no)] =
            parse_int(a.substr(arrow + 2), line_no);
      }
    } else {
      throw std::invalid_argument("schema line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  validate_schema(schema);
  return schema;
}

std::vector<VariableSchema> load_schema_file(const std::string& path) {
  return parse_schema(read_file(path));
}

std::string schema_to_text(const std::vector<VariableSchema>& schema) {
  std::string out;
  for (const auto& v : schema) {
    out += "variable " + v.name + "\n";
    out += "  kind " + kind_name(v.kind) + "\n";
    out += "  role " + role_name(v.role) + "\n";
    if (!v.allowed_codes.empty()) {
      out += "  codes";
      for (int c : v.allowed_codes) {
        out += " " + std::to_string(c);
        if (auto it = v.code_labels.find(c); it != v.code_labels.end()) out += "=" + it->second;
      }
      out += "\n";
    }
    if (!v.missing_codes.empty()) {
      out += "  missing";
      for (int c : v.missing_codes) out += " " + std::to_string(c);
      out += "\n";
    }
    if (!v.recode_map.empty()) {
      out += "  recode";
      for (auto [from, to] : v.recode_map)
        out += " " + std::to_string(from) + "->" + std::to_string(to);
      out += "\n";
    }
  }
  return out;
}

Dataset::Dataset(std::vector<VariableSchema> schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.size() != columns_.size())
    throw std::invalid_argument("dataset: schema/column count mismatch");
  for (std::size_t j = 1; j < columns_.size(); ++j)
    if (columns_[j].size() != columns_[0].size())
      throw std::invalid_argument("dataset: ragged columns");
}

int Dataset::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j)
    if (schema_[j].name == name) return static_cast<int>(j);
  return -1;
}

const std::vector<double>& Dataset::column(std::string_view name) const {
  const int j = column_index(name);
  if (j < 0) throw std::invalid_argument("dataset: no column named " + std::string(name));
  return columns_[static_cast<std::size_t>(j)];
}

int Dataset::target_index() const {
  for (std::size_t j = 0; j < schema_.size(); ++j)
    if (schema_[j].role == VarRole::target) return static_cast<int>(j);
  throw std::logic_error("dataset: no target column");
}

Dataset Dataset::with_target(std::span<const double> values) const {
  if (values.size() != n()) throw std::invalid_argument("with_target: length mismatch");
  auto cols = columns_;
  cols[static_cast<std::size_t>(target_index())].assign(values.begin(), values.end());
  return Dataset(schema_, std::move(cols));
}

namespace {

bool is_na_text(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "N/A";
}

}  // namespace

Dataset dataset_from_text(const std::string& csv_text, std::vector<VariableSchema> schema) {
  validate_schema(schema);
  const CsvTable t = parse_csv(csv_text);

  std::vector<int> csv_col(schema.size(), -1);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    for (std::size_t k = 0; k < t.header.size(); ++k)
      if (t.header[k] == schema[j].name) {
        csv_col[j] = static_cast<int>(k);
        break;
      }
    if (csv_col[j] < 0)
      throw std::runtime_error("csv: missing column \"" + schema[j].name + "\"");
  }

  std::vector<std::vector<double>> columns(schema.size());
  for (auto& c : columns) c.reserve(t.rows.size());
  std::vector<std::string> bad;

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& v = schema[j];
      const std::string& cell = t.rows[r][static_cast<std::size_t>(csv_col[j])];
      if (is_na_text(cell)) {
        columns[j].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double value = 0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      const bool parsed = ec == std::errc{} && p == cell.data() + cell.size();
      if (!parsed) {
        bad.push_back("row " + std::to_string(r + 2) + ", column " + v.name +
                      ": unparseable \"" + cell + "\"");
        columns[j].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      if (v.kind != VarKind::continuous) {
        const bool integral = value == std::floor(value);
        const int code = integral ? static_cast<int>(value) : 0;
        const bool allowed =
            integral && (std::find(v.allowed_codes.begin(), v.allowed_codes.end(), code) !=
                             v.allowed_codes.end() ||
                         std::find(v.missing_codes.begin(), v.missing_codes.end(), code) !=
                             v.missing_codes.end());
        if (!allowed) {
          bad.push_back("row " + std::to_string(r + 2) + ", column " + v.name +
                        ": code \"" + cell + "\" outside allowed/missing sets");
          value = std::numeric_limits<double>::quiet_NaN();
        }
      } else if (!v.missing_codes.empty() && value == std::floor(value)) {
        // continuous cells may still carry integer missing codes; keep as-is,
        // clean() drops them
      }
      columns[j].push_back(value);
    }
  }

  if (!bad.empty()) {
    std::string msg = "csv: " + std::to_string(bad.size()) + " invalid cell(s)";
    const std::size_t show = std::min<std::size_t>(bad.size(), 10);
    for (std::size_t i = 0; i < show; ++i) msg += "\n  " + bad[i];
    if (bad.size() > show) msg += "\n  ...";
    throw std::runtime_error(msg);
  }
  return Dataset(std::move(schema), std::move(columns));
}

Dataset load_csv_dataset(const std::string& path, std::vector<VariableSchema> schema) {
  return dataset_from_text(read_file(path), std::move(schema));
}

std::string dataset_to_csv(const Dataset& ds) {
  CsvTable t;
  for (const auto& v : ds.schema()) t.header.push_back(v.name);
  t.rows.resize(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    t.rows[i].reserve(ds.n_vars());
    for (std::size_t j = 0; j < ds.n_vars(); ++j)
      t.rows[i].push_back(format_double(ds.column(j)[i]));
  }
  return to_csv(t);
}

Dataset clean(const Dataset& ds, CleanLog* log) {
  const auto& schema = ds.schema();
  CleanLog local;
  CleanLog& lg = log ? *log : local;
  lg.rows_in = ds.n();

  // rule key -> position in lg.rules, created lazily in first-fire order
  std::map<std::pair<std::string, std::optional<int>>, std::size_t> rule_pos;
  auto bump = [&](const std::string& var, std::optional<int> code) {
    auto key = std::make_pair(var, code);
    auto it = rule_pos.find(key);
    if (it == rule_pos.end()) {
      it = rule_pos.emplace(key, lg.rules.size()).first;
      lg.rules.push_back({var, code, 0});
    }
    lg.rules[it->second].dropped += 1;
  };

  std::vector<std::size_t> keep;
  keep.reserve(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    bool dropped = false;
    for (std::size_t j = 0; j < schema.size() && !dropped; ++j) {
      const auto& v = schema[j];
      const double cell = ds.column(j)[i];
      if (std::isnan(cell)) {
        bump(v.name, std::nullopt);
        dropped = true;
        break;
      }
      for (int mc : v.missing_codes) {
        if (cell == static_cast<double>(mc)) {
          bump(v.name, mc);
          dropped = true;
          break;
        }
      }
    }
    if (!dropped) keep.push_back(i);
  }
  lg.rows_out = keep.size();
  lg.total_dropped = lg.rows_in - lg.rows_out;

  // apply recodes to surviving rows and to the schema itself
  auto new_schema = schema;
  std::vector<std::vector<double>> cols(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema[j];
    cols[j].reserve(keep.size());
    for (std::size_t i : keep) {
      double cell = ds.column(j)[i];
      if (!v.recode_map.empty() && cell == std::floor(cell)) {
        auto it = v.recode_map.find(static_cast<int>(cell));
        if (it != v.recode_map.end()) cell = static_cast<double>(it->second);
      }
      cols[j].push_back(cell);
    }
    if (!v.recode_map.empty()) {
      new_schema[j].allowed_codes = recoded_codes(v);
      new_schema[j].recode_map.clear();
      new_schema[j].code_labels.clear();
    }
    new_schema[j].missing_codes.clear();  // nothing left to drop
  }
  return Dataset(std::move(new_schema), std::move(cols));
}

IncomeForms derive_income_forms(const Dataset& ds) {
  const auto& target = ds.target();
  IncomeForms f;
  f.income_b.reserve(target.size());
  for (double y : target) {
    if (y < 0) throw std::invalid_argument("derive_income_forms: negative target value");
    f.income_b.push_back(y > 0 ? 1 : 0);
    if (y > 0) f.income_c.push_back(y);
  }
  return f;
}

Dataset sample_rows(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.n())
    throw std::invalid_argument("sample_rows: n = " + std::to_string(n) + " > dataset rows " +
                                std::to_string(ds.n()));
  std::vector<std::size_t> idx(ds.n());
  std::iota(idx.begin(), idx.end(), 0);
  RngStream rng(seed, "sample-rows");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());  // keep original row order

  std::vector<std::vector<double>> cols(ds.n_vars());
  for (std::size_t j = 0; j < ds.n_vars(); ++j) {
    cols[j].reserve(n);
    for (std::size_t i : idx) cols[j].push_back(ds.column(j)[i]);
  }
  return Dataset(ds.schema(), std::move(cols));
}

DesignMatrix design_matrix(const Dataset& ds, const EncodingOptions& opts) {
  const std::size_t n = ds.n();
  struct ColSpec {
    std::string name;
    std::size_t var = 0;
    double dummy_code = 0;  // for dummy columns
    enum { kIntercept, kDummy, kNumeric } type = kIntercept;
  };
  std::vector<ColSpec> specs;
  specs.push_back({"(Intercept)", 0, 0, ColSpec::kIntercept});

  const auto& schema = ds.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema[j];
    if (v.role != VarRole::predictor) continue;
    if (v.kind == VarKind::continuous || opts.numeric_categorical) {
      specs.push_back({v.name, j, 0, ColSpec::kNumeric});
    } else {
      auto codes = v.allowed_codes;
      std::sort(codes.begin(), codes.end());
      codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
      // reference cell = lowest code
      for (std::size_t k = 1; k < codes.size(); ++k)
        specs.push_back({v.name + "=" + std::to_string(codes[k]), j,
                         static_cast<double>(codes[k]), ColSpec::kDummy});
    }
  }

  DesignMatrix dm;
  dm.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(specs.size()));
  for (std::size_t c = 0; c < specs.size(); ++c) {
    const auto& s = specs[c];
    dm.col_names.push_back(s.name);
    auto col = dm.X.col(static_cast<Eigen::Index>(c));
    switch (s.type) {
      case ColSpec::kIntercept:
        col.setOnes();
        break;
      case ColSpec::kDummy: {
        const auto& src = ds.column(s.var);
        for (std::size_t i = 0; i < n; ++i) col[static_cast<Eigen::Index>(i)] = src[i] == s.dummy_code ? 1.0 : 0.0;
        if (schema[s.var].kind != VarKind::continuous) {
          // level must come from the schema; data cannot invent codes
          const auto& codes = schema[s.var].allowed_codes;
          for (std::size_t i = 0; i < n; ++i) {
            const int code = static_cast<int>(src[i]);
            if (std::find(codes.begin(), codes.end(), code) == codes.end())
              throw std::invalid_argument("design_matrix: " + schema[s.var].name + " level " +
                                          std::to_string(code) + " absent from schema");
          }
        }
        break;
      }
      case ColSpec::kNumeric: {
        const auto& src = ds.column(s.var);
        for (std::size_t i = 0; i < n; ++i) col[static_cast<Eigen::Index>(i)] = src[i];
        const bool standardize =
            opts.standardize_continuous && schema[s.var].kind == VarKind::continuous;
        if (standardize && n >= 2) {
          const double m = col.mean();
          double sd = std::sqrt((col.array() - m).square().sum() / static_cast<double>(n - 1));
          if (sd <= 0) sd = 1.0;
          col = (col.array() - m) / sd;
          dm.transforms.push_back({schema[s.var].name, m, sd});
        }
        break;
      }
    }
  }
  return dm;
}

DesignMatrix restrict_rows(const DesignMatrix& dm, std::span<const std::size_t> rows) {
  DesignMatrix out;
  out.col_names = dm.col_names;
  out.transforms = dm.transforms;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), dm.X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.X.row(static_cast<Eigen::Index>(i)) = dm.X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace synthgate::tabular

#include "blockdyn/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "blockdyn/errors.hpp"

namespace blockdyn::io {

namespace {

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(errc::io_error, "cannot write " + path.string());
  }
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(errc::io_error, "cannot read " + path.string());
  }
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& field, const fs::path& path) {
  const std::string token = strip(field);
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw Error(errc::io_error, path.string() + ": malformed number '" + token + "'");
  }
  return value;
}

long parse_int(const std::string& field, const fs::path& path) {
  const std::string token = strip(field);
  char* end = nullptr;
  const long value = std::strtol(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0') {
    throw Error(errc::io_error, path.string() + ": malformed integer '" + token + "'");
  }
  return value;
}

// Reads non-empty lines, each split into fields.
std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

Matrix rows_to_matrix(const std::vector<std::vector<std::string>>& rows, std::size_t first,
                      const fs::path& path) {
  if (rows.size() <= first) {
    throw Error(errc::io_error, path.string() + ": no data rows");
  }
  const std::size_t n_rows = rows.size() - first;
  const std::size_t n_cols = rows[first].size();
  Matrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < n_rows; ++i) {
    const auto& row = rows[first + i];
    if (row.size() != n_cols) {
      throw Error(errc::io_error, path.string() + ": ragged row " + std::to_string(first + i + 1));
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(row[j], path);
    }
  }
  return m;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[40];
  // %.17g always round-trips; prefer the shorter %.15g when it does too.
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  if (std::strtod(buf, nullptr) != value) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
  }
  return buf;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const fs::path& path) {
  return rows_to_matrix(read_rows(path), 0, path);
}

void write_binary_csv(const fs::path& path, const BinaryMatrix& w) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j > 0) out << ',';
      out << (w(i, j) != 0 ? '1' : '0');
    }
    out << '\n';
  }
}

BinaryMatrix read_binary_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) {
    throw Error(errc::io_error, path.string() + ": no data rows");
  }
  BinaryMatrix w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) {
      throw Error(errc::io_error, path.string() + ": ragged row " + std::to_string(i + 1));
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const long v = parse_int(rows[i][j], path);
      if (v != 0 && v != 1) {
        throw Error(errc::io_error, path.string() + ": adjacency entries must be 0 or 1");
      }
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<std::uint8_t>(v);
    }
  }
  return w;
}

NamedPanel read_time_series_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  if (rows.size() < 2) {
    throw Error(errc::io_error, path.string() + ": expected a header row plus data rows");
  }
  NamedPanel panel;
  for (const auto& name : rows[0]) panel.names.push_back(strip(name));
  panel.values = rows_to_matrix(rows, 1, path);
  if (panel.values.cols() != static_cast<Eigen::Index>(panel.names.size())) {
    throw Error(errc::io_error, path.string() + ": header and data column counts differ");
  }
  return panel;
}

void write_time_series_csv(const fs::path& path, const std::vector<std::string>& names,
                           const Matrix& values) {
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw Error(errc::invalid_argument, "one column name per node is required");
  }
  std::ofstream out = open_out(path);
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j > 0) out << ',';
    out << names[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
}

void write_membership_csv(const fs::path& path, const Membership& g) {
  std::ofstream out = open_out(path);
  out << "node,label\n";
  for (int i = 0; i < g.size(); ++i) {
    out << (i + 1) << ',' << g.label(i) << '\n';
  }
}

Membership read_membership_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  if (rows.size() < 2 || rows[0].size() != 2) {
    throw Error(errc::io_error, path.string() + ": expected node,label rows");
  }
  std::vector<int> labels(rows.size() - 1, 0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const long node = parse_int(rows[i][0], path);
    const long label = parse_int(rows[i][1], path);
    if (node < 1 || node > static_cast<long>(labels.size())) {
      throw Error(errc::io_error, path.string() + ": node index " + std::to_string(node) +
                                      " out of range");
    }
    labels[static_cast<std::size_t>(node - 1)] = static_cast<int>(label);
  }
  return Membership::from_labels(std::move(labels));
}

void write_association_csv(const fs::path& path, const Eigen::MatrixXi& counts) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (j > 0) out << ',';
      out << counts(i, j);
    }
    out << '\n';
  }
}

void write_pairs_csv(const fs::path& path, const std::vector<std::pair<int, int>>& pairs) {
  std::ofstream out = open_out(path);
  out << "i,j\n";
  for (const auto& [i, j] : pairs) {
    out << (i + 1) << ',' << (j + 1) << '\n';
  }
}

std::vector<std::pair<int, int>> read_pairs_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty() || rows[0].size() != 2) {
    throw Error(errc::io_error, path.string() + ": expected i,j rows");
  }
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    pairs.emplace_back(static_cast<int>(parse_int(rows[r][0], path)) - 1,
                       static_cast<int>(parse_int(rows[r][1], path)) - 1);
  }
  return pairs;
}

void write_states_csv(const fs::path& path, const dynstate::StateSequence& seq) {
  std::ofstream out = open_out(path);
  out << "subject,time,state\n";
  for (std::size_t r = 0; r < seq.labels.size(); ++r) {
    for (std::size_t t = 0; t < seq.labels[r].size(); ++t) {
      out << (r + 1) << ',' << (t + 1) << ',' << seq.labels[r][t] << '\n';
    }
  }
}

dynstate::StateSequence read_states_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty() || rows[0].size() != 3) {
    throw Error(errc::io_error, path.string() + ": expected subject,time,state rows");
  }
  dynstate::StateSequence seq;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const long subject = parse_int(rows[r][0], path);
    const long time = parse_int(rows[r][1], path);
    const long state = parse_int(rows[r][2], path);
    if (subject < 1 || time < 1) {
      throw Error(errc::io_error, path.string() + ": subject and time must be 1-based");
    }
    if (seq.labels.size() < static_cast<std::size_t>(subject)) {
      seq.labels.resize(static_cast<std::size_t>(subject));
    }
    auto& mine = seq.labels[static_cast<std::size_t>(subject - 1)];
    if (mine.size() < static_cast<std::size_t>(time)) {
      mine.resize(static_cast<std::size_t>(time), 0);
    }
    mine[static_cast<std::size_t>(time - 1)] = static_cast<int>(state);
  }
  return seq;
}

void write_betas_csv(const fs::path& path, const dynstate::BetaSequences& betas,
                     const std::vector<std::pair<int, int>>& layout) {
  std::ofstream out = open_out(path);
  out << "subject,time";
  for (const auto& [k, l] : layout) {
    out << ",b_" << (k + 1) << '_' << (l + 1);
  }
  out << '\n';
  for (std::size_t r = 0; r < betas.size(); ++r) {
    const Matrix& rows = betas[r];
    if (rows.cols() != static_cast<Eigen::Index>(layout.size())) {
      throw Error(errc::dimension_mismatch, "beta columns do not match the layout");
    }
    for (Eigen::Index t = 0; t < rows.rows(); ++t) {
      out << (r + 1) << ',' << (t + 1);
      for (Eigen::Index d = 0; d < rows.cols(); ++d) {
        out << ',' << format_double(rows(t, d));
      }
      out << '\n';
    }
  }
}

BetaFile read_betas_csv(const fs::path& path) {
  const auto rows = read_rows(path);
  if (rows.empty() || rows[0].size() < 3) {
    throw Error(errc::io_error, path.string() + ": expected subject,time,b_... rows");
  }
  BetaFile file;
  for (std::size_t c = 2; c < rows[0].size(); ++c) {
    const std::string head = strip(rows[0][c]);
    int k = 0;
    int l = 0;
    if (std::sscanf(head.c_str(), "b_%d_%d", &k, &l) != 2 || k < 1 || l < k) {
      throw Error(errc::io_error, path.string() + ": malformed beta column '" + head + "'");
    }
    file.layout.emplace_back(k - 1, l - 1);
  }
  // First pass sizes each subject, second pass fills values.
  std::vector<long> lengths;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw Error(errc::io_error, path.string() + ": ragged row " + std::to_string(r + 1));
    }
    const long subject = parse_int(rows[r][0], path);
    const long time = parse_int(rows[r][1], path);
    if (subject < 1 || time < 1) {
      throw Error(errc::io_error, path.string() + ": subject and time must be 1-based");
    }
    if (lengths.size() < static_cast<std::size_t>(subject)) {
      lengths.resize(static_cast<std::size_t>(subject), 0);
    }
    lengths[static_cast<std::size_t>(subject - 1)] =
        std::max(lengths[static_cast<std::size_t>(subject - 1)], time);
  }
  const auto dim = static_cast<Eigen::Index>(file.layout.size());
  for (const long t_len : lengths) {
    file.betas.emplace_back(Matrix::Zero(static_cast<Eigen::Index>(t_len), dim));
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const long subject = parse_int(rows[r][0], path);
    const long time = parse_int(rows[r][1], path);
    Matrix& m = file.betas[static_cast<std::size_t>(subject - 1)];
    for (Eigen::Index d = 0; d < dim; ++d) {
      m(static_cast<Eigen::Index>(time - 1), d) =
          parse_double(rows[r][static_cast<std::size_t>(d) + 2], path);
    }
  }
  return file;
}

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_to_json(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    arr.push_back(std::move(row));
  }
  return arr;
}

Vector json_to_vector(const json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

Matrix json_to_matrix(const json& arr) {
  const auto rows = static_cast<Eigen::Index>(arr.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(arr[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = arr[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

}  // namespace

void write_model_json(const fs::path& path, const dynstate::HmmModel& model, int k) {
  json doc;
  doc["S"] = model.num_states;
  doc["K"] = k;
  doc["D"] = model.dim();
  doc["pi0"] = vector_to_json(model.initial);
  doc["Pi"] = matrix_to_json(model.transition);
  doc["means"] = matrix_to_json(model.means);
  doc["covariances"] = matrix_to_json(model.variances);
  doc["converged"] = model.converged;
  doc["log_likelihood"] = model.log_likelihood;
  doc["iterations"] = model.iterations;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

ModelFile read_model_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw Error(errc::io_error, path.string() + ": " + e.what());
  }
  ModelFile file;
  file.k = doc.at("K").get<int>();
  file.model.num_states = doc.at("S").get<int>();
  file.model.initial = json_to_vector(doc.at("pi0"));
  file.model.transition = json_to_matrix(doc.at("Pi"));
  file.model.means = json_to_matrix(doc.at("means"));
  file.model.variances = json_to_matrix(doc.at("covariances"));
  file.model.converged = doc.value("converged", true);
  file.model.log_likelihood = doc.value("log_likelihood", 0.0);
  file.model.iterations = doc.value("iterations", 0);
  return file;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 1469598103934665603ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string file_hash(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::uint64_t hash = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

void record_file(Manifest& man, const fs::path& root, const std::string& relative) {
  const fs::path full = root / relative;
  json entry;
  entry["bytes"] = static_cast<std::uint64_t>(fs::file_size(full));
  entry["fnv1a64"] = file_hash(full);
  man.files[relative] = std::move(entry);
}

void write_manifest(const fs::path& path, const Manifest& man) {
  json doc;
  doc["stage"] = man.stage;
  doc["version"] = man.version;
  doc["config"] = man.config;
  doc["data"] = man.data;
  doc["seeds"] = man.seeds;
  doc["timings_ms"] = man.timings_ms;
  json files = json::object();
  for (const auto& [rel, entry] : man.files) files[rel] = entry;
  doc["files"] = std::move(files);
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in = open_in(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw Error(errc::io_error, path.string() + ": " + e.what());
  }
  Manifest man;
  man.stage = doc.at("stage").get<std::string>();
  man.version = doc.value("version", "");
  man.config = doc.value("config", json::object());
  man.data = doc.value("data", json::object());
  man.seeds = doc.value("seeds", json::object());
  if (doc.contains("timings_ms")) {
    for (const auto& [key, value] : doc["timings_ms"].items()) {
      man.timings_ms[key] = value.get<double>();
    }
  }
  if (doc.contains("files")) {
    for (const auto& [key, value] : doc["files"].items()) {
      man.files[key] = value;
    }
  }
  return man;
}

}  // namespace blockdyn::io

#include "klsurv/io.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace klsurv::io {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

namespace {

struct Field {
  std::string text;
  std::size_t column;  // 1-based
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<Field> split_csv(const std::string& line) {
  std::vector<Field> out;
  std::size_t start = 0;
  for (std::size_t col = 1;; ++col) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = comma == std::string::npos ? line.size() : comma;
    out.push_back({trim(std::string_view(line).substr(start, end - start)), col});
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

double parse_real(const Field& f, std::size_t line) {
  double v = 0.0;
  const char* b = f.text.data();
  const char* e = b + f.text.size();
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || f.text.empty()) {
    throw InputError(fmt::format("'{}' is not a number", f.text), line, f.column);
  }
  if (!std::isfinite(v)) {
    throw InputError(fmt::format("non-finite value '{}'", f.text), line, f.column);
  }
  return v;
}

long parse_integer(const Field& f, std::size_t line) {
  long v = 0;
  const char* b = f.text.data();
  const char* e = b + f.text.size();
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || f.text.empty()) {
    throw InputError(fmt::format("'{}' is not an integer", f.text), line, f.column);
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

}  // namespace

SurvivalDataset read_dataset_csv(std::istream& in, std::optional<int> tau) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (line_no == 0 || blank(line)) throw InputError("empty data file");
  const auto header = split_csv(line);
  const std::size_t header_line = line_no;
  const char* required[] = {"id", "time", "event"};
  for (std::size_t j = 0; j < 3; ++j) {
    if (header.size() <= j || header[j].text != required[j]) {
      throw InputError(fmt::format("expected column '{}'", required[j]),
                       header_line, j + 1);
    }
  }
  std::vector<std::string> names;
  for (std::size_t j = 3; j < header.size(); ++j) {
    if (header[j].text.empty()) {
      throw InputError("empty covariate name", header_line, j + 1);
    }
    names.push_back(header[j].text);
  }
  CovariateSchema schema = [&] {
    try {
      return CovariateSchema(names);
    } catch (const InputError& e) {
      throw InputError(e.what(), header_line, 4);
    }
  }();

  std::vector<SubjectRecord> subjects;
  std::unordered_set<std::string> ids;
  int max_time = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw InputError(fmt::format("expected {} fields, found {}",
                                   header.size(), fields.size()),
                       line_no, std::min(fields.size(), header.size()) + 1);
    }
    SubjectRecord s;
    s.id = fields[0].text;
    if (s.id.empty()) throw InputError("empty id", line_no, 1);
    if (!ids.insert(s.id).second) {
      throw InputError(fmt::format("duplicate subject id '{}'", s.id), line_no, 1);
    }
    const long t = parse_integer(fields[1], line_no);
    if (t < 1 || (tau && t > *tau)) {
      throw InputError(fmt::format("time {} outside 1..{}", t,
                                   tau ? std::to_string(*tau) : "tau"),
                       line_no, 2);
    }
    s.observed_time = static_cast<int>(t);
    const long ev = parse_integer(fields[2], line_no);
    if (ev != 0 && ev != 1) {
      throw InputError(fmt::format("event must be 0 or 1, got {}", ev), line_no, 3);
    }
    s.event = ev == 1;
    s.covariates.resize(static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      s.covariates[static_cast<Eigen::Index>(j)] = parse_real(fields[j + 3], line_no);
    }
    max_time = std::max(max_time, s.observed_time);
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw InputError("data file has no subjects");
  return SurvivalDataset(std::move(schema), std::move(subjects),
                         tau.value_or(max_time));
}

SurvivalDataset read_dataset_csv(const std::filesystem::path& path,
                                 std::optional<int> tau) {
  auto in = open_in(path);
  try {
    return read_dataset_csv(in, tau);
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_dataset_csv(std::ostream& out, const SurvivalDataset& data) {
  out << "id,time,event";
  for (const auto& n : data.schema().names()) out << ',' << n;
  out << '\n';
  for (const auto& s : data.subjects()) {
    out << s.id << ',' << s.observed_time << ',' << (s.event ? 1 : 0);
    for (Eigen::Index j = 0; j < s.covariates.size(); ++j) {
      out << ',' << format_double(s.covariates[j]);
    }
    out << '\n';
  }
}

CovariateRows read_covariates_csv(std::istream& in,
                                  const CovariateSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (line_no == 0 || blank(line)) throw InputError("empty covariate file");
  const auto header = split_csv(line);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < header.size(); ++j) column[header[j].text] = j;
  if (!column.contains("id")) throw InputError("missing column 'id'", line_no, 1);
  std::vector<std::size_t> source;
  for (const auto& name : schema.names()) {
    const auto it = column.find(name);
    if (it == column.end()) {
      throw InputError(fmt::format("missing covariate column '{}'", name), line_no,
                       header.size() + 1);
    }
    source.push_back(it->second);
  }
  CovariateRows rows;
  std::vector<Eigen::VectorXd> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw InputError(fmt::format("expected {} fields, found {}",
                                   header.size(), fields.size()),
                       line_no, 1);
    }
    rows.ids.push_back(fields[column["id"]].text);
    Eigen::VectorXd x(static_cast<Eigen::Index>(source.size()));
    for (std::size_t j = 0; j < source.size(); ++j) {
      x[static_cast<Eigen::Index>(j)] = parse_real(fields[source[j]], line_no);
    }
    values.push_back(std::move(x));
  }
  rows.values.resize(static_cast<Eigen::Index>(values.size()),
                     static_cast<Eigen::Index>(schema.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows.values.row(static_cast<Eigen::Index>(i)) = values[i].transpose();
  }
  return rows;
}

CovariateRows read_covariates_csv(const std::filesystem::path& path,
                                  const CovariateSchema& schema) {
  auto in = open_in(path);
  try {
    return read_covariates_csv(in, schema);
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

namespace {

json parse_json(std::istream& in) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(e.what());
  }
}

void check_version(const json& doc) {
  if (!doc.is_object()) throw InputError("expected a JSON object");
  if (!doc.contains("format_version")) {
    throw InputError("missing mandatory field 'format_version'");
  }
  if (doc.at("format_version") != kFormatVersion) {
    throw InputError(fmt::format("unsupported format_version {} (expected {})",
                                 doc.at("format_version").dump(), kFormatVersion));
  }
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw InputError(fmt::format("missing field '{}'", key));
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(fmt::format("field '{}' has the wrong type", key));
  }
}

double json_real(const json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError(fmt::format("{} must be a number", what));
}

json json_real_value(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

Eigen::VectorXd read_vector(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_array()) {
    throw InputError(fmt::format("field '{}' must be an array", key));
  }
  const auto& arr = doc.at(key);
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] =
        json_real(arr[i], fmt::format("{}[{}]", key, i));
  }
  return v;
}

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(json_real_value(v[i]));
  return arr;
}

}  // namespace

PriorModel read_prior_json(std::istream& in) {
  const json doc = parse_json(in);
  check_version(doc);
  PriorModel prior;
  prior.label = doc.value("label", std::string{});
  prior.link = Link::parse(field<std::string>(doc, "link"));
  prior.tau = field<int>(doc, "tau");
  prior.eta_hat = read_vector(doc, "eta");
  if (!doc.contains("coefficients") || !doc.at("coefficients").is_object()) {
    throw InputError("field 'coefficients' must be an object");
  }
  for (const auto& [name, value] : doc.at("coefficients").items()) {
    prior.coefficients.emplace_back(name,
                                    json_real(value, "coefficient " + name));
  }
  prior.validate();
  return prior;
}

PriorModel read_prior_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_prior_json(in);
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_prior_json(std::ostream& out, const PriorModel& prior) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "prior";
  doc["label"] = prior.label;
  doc["link"] = std::string(prior.link.name());
  doc["tau"] = prior.tau;
  doc["eta"] = vector_json(prior.eta_hat);
  json coef = json::object();
  for (const auto& [name, value] : prior.coefficients) coef[name] = value;
  doc["coefficients"] = coef;
  out << doc.dump(2) << '\n';
}

FittedModel read_model_json(std::istream& in) {
  const json doc = parse_json(in);
  check_version(doc);
  if (doc.value("kind", std::string{}) != "model") {
    throw InputError("not a fitted model file (kind must be 'model')");
  }
  FittedModel model;
  model.link = Link::parse(field<std::string>(doc, "link"));
  model.tau = field<int>(doc, "tau");
  const auto names = field<std::vector<std::string>>(doc, "covariates");
  model.schema = CovariateSchema(names);
  model.params.eta = read_vector(doc, "eta");
  if (model.params.eta.size() != model.tau) {
    throw InputError("eta length does not match tau");
  }
  const auto estimable = field<std::vector<bool>>(doc, "eta_estimable");
  if (estimable.size() != static_cast<std::size_t>(model.tau)) {
    throw InputError("eta_estimable length does not match tau");
  }
  model.eta_estimable = estimable;
  if (!doc.contains("beta") || !doc.at("beta").is_object()) {
    throw InputError("field 'beta' must be an object");
  }
  const json& beta = doc.at("beta");
  model.params.beta.resize(static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!beta.contains(names[j])) {
      throw InputError(fmt::format("beta has no entry for '{}'", names[j]));
    }
    model.params.beta[static_cast<Eigen::Index>(j)] =
        json_real(beta.at(names[j]), "beta " + names[j]);
  }
  if (beta.size() != names.size()) {
    throw InputError("beta has entries for unknown covariates");
  }
  model.lambda_used = json_real(doc.at("lambda_used"), "lambda_used");
  const json& conv = doc.at("convergence");
  model.converged = field<bool>(conv, "converged");
  model.n_iter = field<int>(conv, "n_iter");
  model.final_objective = json_real(conv.at("final_objective"), "final_objective");
  model.gradient_norm = json_real(conv.at("gradient_norm"), "gradient_norm");
  return model;
}

FittedModel read_model_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_model_json(in);
  } catch (const Error& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_model_json(std::ostream& out, const FittedModel& model,
                      const std::string& label,
                      const std::string& manifest_json) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "model";
  doc["label"] = label;
  doc["link"] = std::string(model.link.name());
  doc["tau"] = model.tau;
  doc["covariates"] = model.schema.names();
  doc["eta"] = vector_json(model.params.eta);
  std::vector<bool> estimable = model.eta_estimable;
  if (estimable.empty()) estimable.assign(static_cast<std::size_t>(model.tau), true);
  doc["eta_estimable"] = estimable;
  json beta = json::object();
  for (std::size_t j = 0; j < model.schema.size(); ++j) {
    beta[model.schema.names()[j]] = model.params.beta[static_cast<Eigen::Index>(j)];
  }
  doc["beta"] = beta;
  doc["lambda_used"] = json_real_value(model.lambda_used);
  doc["convergence"] = {{"converged", model.converged},
                        {"n_iter", model.n_iter},
                        {"final_objective", json_real_value(model.final_objective)},
                        {"gradient_norm", json_real_value(model.gradient_norm)}};
  if (!manifest_json.empty()) doc["manifest"] = json::parse(manifest_json);
  out << doc.dump(2) << '\n';
}

bool is_prior_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  const json doc = parse_json(in);
  return doc.is_object() && doc.value("kind", std::string{"prior"}) == "prior";
}

std::string sha256_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace klsurv::io

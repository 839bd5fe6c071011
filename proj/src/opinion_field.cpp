#include "opflow/opinion_field.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "opflow/errors.hpp"

namespace opflow {
namespace {

// Three values each rounded to 9 significant digits.
constexpr double kCsvMassTolerance = 2e-8;

std::string format9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

double round9(double x) { return std::strtod(format9(x).c_str(), nullptr); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

template <typename T>
T parse(const std::string& s, const std::filesystem::path& path, std::size_t lineno) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(lineno) + ": bad field '" + s + "'");
  }
  return value;
}

std::ifstream open_with_header(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::format_error, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw Error(ErrorCode::format_error, path.string() + ": expected header '" + header + "'");
  return in;
}

}  // namespace

DynamicOpinionField DynamicOpinionField::unobserved(std::size_t times, std::size_t nodes) {
  const auto t = static_cast<Eigen::Index>(times);
  const auto n = static_cast<Eigen::Index>(nodes);
  return {Eigen::MatrixXd::Zero(t, n), Eigen::MatrixXd::Zero(t, n), Eigen::MatrixXd::Zero(t, n),
          BoolArray::Constant(t, n, false)};
}

bool DynamicOpinionField::is_observed(std::size_t t, std::size_t i) const {
  if (t >= times() || i >= nodes()) throw Error(ErrorCode::index_out_of_range, "field entry out of range");
  return observed(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
}

Opinion DynamicOpinionField::at(std::size_t t, std::size_t i) const {
  if (!is_observed(t, i)) return Opinion::vacuous();
  const auto r = static_cast<Eigen::Index>(t);
  const auto c = static_cast<Eigen::Index>(i);
  // Entries read back from CSV can sit slightly off the simplex.
  const double s = b(r, c) + d(r, c) + u(r, c);
  return Opinion::make(b(r, c) / s, d(r, c) / s, u(r, c) / s);
}

void DynamicOpinionField::set(std::size_t t, std::size_t i, const Opinion& w) {
  if (t >= times() || i >= nodes()) throw Error(ErrorCode::index_out_of_range, "field entry out of range");
  const auto r = static_cast<Eigen::Index>(t);
  const auto c = static_cast<Eigen::Index>(i);
  b(r, c) = w.b();
  d(r, c) = w.d();
  u(r, c) = w.u();
  observed(r, c) = true;
}

void DynamicOpinionField::hide(std::size_t t, std::size_t i) {
  if (t >= times() || i >= nodes()) throw Error(ErrorCode::index_out_of_range, "field entry out of range");
  const auto r = static_cast<Eigen::Index>(t);
  const auto c = static_cast<Eigen::Index>(i);
  b(r, c) = d(r, c) = u(r, c) = 0.0;
  observed(r, c) = false;
}

Eigen::VectorXd DynamicOpinionField::mask_row(std::size_t t) const {
  return observed.row(static_cast<Eigen::Index>(t)).cast<double>().matrix().transpose();
}

void DynamicOpinionField::validate(double tol) const {
  for (Eigen::Index t = 0; t < b.rows(); ++t) {
    for (Eigen::Index i = 0; i < b.cols(); ++i) {
      if (!observed(t, i)) continue;
      const double s = b(t, i) + d(t, i) + u(t, i);
      if (std::fabs(s - 1.0) > tol) {
        throw Error(ErrorCode::mass_sum_violation,
                    "entry (" + std::to_string(t) + ", " + std::to_string(i) + ") sums to " + std::to_string(s));
      }
    }
  }
}

void write_opinion_csv(const std::filesystem::path& path, const DynamicOpinionField& field) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "t,node_id,b,d,u,observed\n";
  for (Eigen::Index t = 0; t < field.b.rows(); ++t) {
    for (Eigen::Index i = 0; i < field.b.cols(); ++i) {
      out << t << ',' << i << ',' << format9(field.b(t, i)) << ',' << format9(field.d(t, i)) << ','
          << format9(field.u(t, i)) << ',' << (field.observed(t, i) ? 1 : 0) << '\n';
    }
  }
}

DynamicOpinionField read_opinion_csv(const std::filesystem::path& path) {
  std::ifstream in = open_with_header(path, "t,node_id,b,d,u,observed");
  struct Row {
    std::size_t t, i;
    double b, d, u;
    bool observed;
  };
  std::vector<Row> rows;
  std::size_t times = 0, nodes = 0;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) {
      throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    }
    Row r{parse<std::size_t>(cells[0], path, lineno), parse<std::size_t>(cells[1], path, lineno),
          parse<double>(cells[2], path, lineno),      parse<double>(cells[3], path, lineno),
          parse<double>(cells[4], path, lineno),      parse<int>(cells[5], path, lineno) != 0};
    times = std::max(times, r.t + 1);
    nodes = std::max(nodes, r.i + 1);
    rows.push_back(r);
  }
  auto field = DynamicOpinionField::unobserved(times, nodes);
  for (const auto& r : rows) {
    const auto t = static_cast<Eigen::Index>(r.t);
    const auto i = static_cast<Eigen::Index>(r.i);
    field.b(t, i) = r.b;
    field.d(t, i) = r.d;
    field.u(t, i) = r.u;
    field.observed(t, i) = r.observed;
  }
  field.validate(kCsvMassTolerance);
  return field;
}

DynamicOpinionField round_to_csv_precision(const DynamicOpinionField& field) {
  DynamicOpinionField out = field;
  out.b = field.b.unaryExpr(&round9);
  out.d = field.d.unaryExpr(&round9);
  out.u = field.u.unaryExpr(&round9);
  return out;
}

void write_mask_csv(const std::filesystem::path& path, const BoolArray& mask) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "t,node_id\n";
  for (Eigen::Index t = 0; t < mask.rows(); ++t) {
    for (Eigen::Index i = 0; i < mask.cols(); ++i) {
      if (mask(t, i)) out << t << ',' << i << '\n';
    }
  }
}

BoolArray read_mask_csv(const std::filesystem::path& path, std::size_t times, std::size_t nodes) {
  std::ifstream in = open_with_header(path, "t,node_id");
  BoolArray mask = BoolArray::Constant(static_cast<Eigen::Index>(times), static_cast<Eigen::Index>(nodes), false);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) {
      throw Error(ErrorCode::format_error, path.string() + ":" + std::to_string(lineno) + ": expected 2 fields");
    }
    const auto t = parse<std::size_t>(cells[0], path, lineno);
    const auto i = parse<std::size_t>(cells[1], path, lineno);
    if (t >= times || i >= nodes) throw Error(ErrorCode::index_out_of_range, path.string() + ": entry outside field");
    mask(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = true;
  }
  return mask;
}

}  // namespace opflow

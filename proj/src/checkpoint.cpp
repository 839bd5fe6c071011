#include "opflow/checkpoint.hpp"

#include <fstream>

#include "opflow/errors.hpp"

namespace opflow {

void save_checkpoint(const std::filesystem::path& path, std::span<nn::Parameter* const> params,
                     const nlohmann::json& meta) {
  nlohmann::json doc;
  doc["meta"] = meta;
  doc["parameters"] = nlohmann::json::array();
  for (const nn::Parameter* p : params) {
    std::vector<double> values;
    values.reserve(p->size());
    const Matrix& v = p->value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) values.push_back(v(i, j));
    }
    doc["parameters"].push_back({{"name", p->name()}, {"shape", p->shape()}, {"values", values}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << kCheckpointMagic << '\n' << doc.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw Error(ErrorCode::format_error, path.string() + ": not an OPFLOW-CKPT-1 file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  ckpt.meta = doc.value("meta", nlohmann::json::object());
  for (const auto& entry : doc.at("parameters")) {
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto values = entry.at("values").get<std::vector<double>>();
    const auto [rows, cols] = nn::matrix_layout(shape);
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw Error(ErrorCode::format_error, "parameter " + entry.at("name").get<std::string>() + " has wrong size");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
    }
    ckpt.parameters.emplace_back(entry.at("name").get<std::string>(), std::move(shape), std::move(m));
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, std::span<nn::Parameter* const> params) {
  for (nn::Parameter* p : params) {
    auto it = std::find_if(ckpt.parameters.begin(), ckpt.parameters.end(),
                           [&](const nn::Parameter& q) { return q.name() == p->name(); });
    if (it == ckpt.parameters.end()) throw Error(ErrorCode::format_error, "checkpoint lacks " + p->name());
    if (it->shape() != p->shape()) throw Error(ErrorCode::shape_mismatch, "checkpoint shape differs for " + p->name());
    p->value() = it->value();
    p->zero_grad();
  }
}

}  // namespace opflow

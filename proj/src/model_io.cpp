#include "godsbox/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "godsbox/error.hpp"

namespace godsbox::model_io {

using models::AnyModel;
using models::BodsModel;
using models::GodsModel;
using models::HyperParams;
using models::KGodsModel;
using models::SlackMode;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Common {
  std::string type;
  Eigen::MatrixXd w1, w2;
  Eigen::VectorXd b1, b2;
  const HyperParams* hyper;
  std::size_t trained_n;
  std::uint64_t seed;
};

Common common_of(const AnyModel& model) {
  struct Visitor {
    Common operator()(const BodsModel& m) const {
      return {"bods", m.w1, m.w2, Eigen::VectorXd::Constant(1, m.b1),
              Eigen::VectorXd::Constant(1, m.b2), &m.hyper, m.trained_n, m.seed};
    }
    Common operator()(const GodsModel& m) const {
      return {"gods", m.params.w1().mat(), m.params.w2().mat(), m.params.b1(), m.params.b2(),
              &m.hyper, m.trained_n, m.seed};
    }
    Common operator()(const KGodsModel& m) const {
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.w1.cols());
      return {"kgods", m.w1, m.w2, zero, zero, &m.hyper, m.trained_n, m.seed};
    }
  };
  return std::visit(Visitor{}, model);
}

Eigen::MatrixXd read_matrix(const json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  const auto values = j.at(key).get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(rows * cols)) {
    throw ValidationError(std::string(key) + " has " + std::to_string(values.size()) +
                          " entries, expected " + std::to_string(rows * cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = values[static_cast<std::size_t>(i * cols + c)];
  }
  if (!m.allFinite()) throw ValidationError(std::string(key) + " contains non-finite values");
  return m;
}

Eigen::VectorXd read_vector(const json& j, const char* key, Eigen::Index size) {
  return read_matrix(j, key, size, 1).col(0);
}

manifold::StiefelPoint read_frame(const json& j, const char* key, Eigen::Index d, Eigen::Index k) {
  try {
    return manifold::StiefelPoint(read_matrix(j, key, d, k));
  } catch (const InvalidArgument& e) {
    throw ValidationError(std::string(key) + ": " + e.what());
  }
}

}  // namespace

std::string model_type(const AnyModel& model) { return common_of(model).type; }

std::string to_json(const AnyModel& model, int indent) {
  const Common c = common_of(model);
  const HyperParams& h = *c.hyper;
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["model_type"] = c.type;
  j["d"] = c.w1.rows();
  j["K"] = c.w1.cols();
  j["eta"] = h.eta;
  j["nu"] = h.nu;
  j["C"] = h.c;
  j["normalize_rows"] = h.normalize_rows;
  j["slack"] = h.slack == SlackMode::closed_form ? "closed-form" : "zero";
  j["W1"] = flatten(c.w1);
  j["b1"] = to_vec(c.b1);
  j["W2"] = flatten(c.w2);
  j["b2"] = to_vec(c.b2);
  j["seed"] = c.seed;
  j["trained_n"] = c.trained_n;
  if (const auto* k = std::get_if<KGodsModel>(&model)) j["kernel_ridge"] = k->ridge;
  return j.dump(indent);
}

AnyModel from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw ValidationError("unsupported model format_version " + std::to_string(version));
    }
    const auto type = j.at("model_type").get<std::string>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto k = j.at("K").get<Eigen::Index>();
    if (d < 1 || k < 1 || k > d) throw ValidationError("invalid model shape d/K");

    HyperParams h;
    h.k = k;
    h.eta = j.at("eta").get<double>();
    h.nu = j.at("nu").get<double>();
    h.c = j.at("C").get<double>();
    h.normalize_rows = j.at("normalize_rows").get<bool>();
    if (j.contains("slack")) {
      const auto s = j.at("slack").get<std::string>();
      if (s == "closed-form") {
        h.slack = SlackMode::closed_form;
      } else if (s == "zero") {
        h.slack = SlackMode::zero;
      } else {
        throw ValidationError("unknown slack mode '" + s + "'");
      }
    }
    try {
      h.validate();
    } catch (const InvalidArgument& e) {
      throw ValidationError(e.what());
    }
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto trained_n = j.at("trained_n").get<std::size_t>();

    if (type == "gods") {
      manifold::ProductPoint p(read_frame(j, "W1", d, k), read_vector(j, "b1", k),
                               read_frame(j, "W2", d, k), read_vector(j, "b2", k));
      return GodsModel{std::move(p), h, trained_n, seed};
    }
    if (type == "bods") {
      if (k != 1) throw ValidationError("a bods model must have K = 1");
      BodsModel m;
      m.w1 = read_frame(j, "W1", d, 1).mat().col(0);
      m.w2 = read_frame(j, "W2", d, 1).mat().col(0);
      m.b1 = read_vector(j, "b1", 1)(0);
      m.b2 = read_vector(j, "b2", 1)(0);
      m.hyper = h;
      m.trained_n = trained_n;
      m.seed = seed;
      return m;
    }
    if (type == "kgods") {
      KGodsModel m;
      m.w1 = read_matrix(j, "W1", d, k);
      m.w2 = read_matrix(j, "W2", d, k);
      if (!read_vector(j, "b1", k).isZero(0.0) || !read_vector(j, "b2", k).isZero(0.0)) {
        throw ValidationError("kgods biases must be zero");
      }
      m.ridge = j.value("kernel_ridge", 0.0);
      m.hyper = h;
      m.trained_n = trained_n;
      m.seed = seed;
      return m;
    }
    throw ValidationError("unknown model_type '" + type + "'");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << to_json(model) << '\n';
  if (!out) throw IoError("failed writing model file " + path.string());
}

AnyModel load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace godsbox::model_io

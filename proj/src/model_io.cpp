#include "keytap/model_io.hpp"

#include "keytap/errors.hpp"
#include "keytap/io.hpp"

namespace keytap {

using nlohmann::json;

namespace {

json row_vector(const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::RowVectorXd row_vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(row_vector(m.row(i)));
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = row_vector_from(j[i]);
    if (r.size() != cols) throw ParseError("model matrix row has the wrong width", 0);
    m.row(static_cast<Eigen::Index>(i)) = r;
  }
  return m;
}

}  // namespace

json to_json(const KeyClassifier& model) {
  json j;
  j["format"] = "keytap-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = to_string(model.kind);
  j["classes"] = model.classes;
  j["input_length"] = model.input_length;
  j["selected_features"] = model.selected;
  j["standardization"] = {{"mean", row_vector(model.standardizer.mean)},
                          {"inv_scale", row_vector(model.standardizer.inv_scale)}};
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  if (const auto* lin = std::get_if<LinearModel>(&model.model)) {
    j["weights"] = matrix(lin->weights);
    j["bias"] = row_vector(lin->bias.transpose());
  } else if (const auto* knn = std::get_if<KnnModel>(&model.model)) {
    j["k"] = knn->k;
    j["exemplars"] = matrix(knn->points);
    j["exemplar_labels"] = knn->labels;
  } else {
    const auto& forest = std::get<ForestModel>(model.model);
    json trees = json::array();
    for (const auto& t : forest.trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes) {
        if (n.feature < 0) {
          nodes.push_back({{"leaf", n.distribution}});
        } else {
          nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
        }
      }
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
  }
  return j;
}

KeyClassifier classifier_from_json(const json& j) {
  try {
    if (j.at("format") != "keytap-model") throw ParseError("not a keytap model file", 0);
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw ParseError("unsupported model version " + j.at("version").dump(), 0);
    }
    KeyClassifier m;
    m.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.input_length = j.at("input_length").get<std::size_t>();
    m.selected = j.at("selected_features").get<std::vector<std::size_t>>();
    m.standardizer.mean = row_vector_from(j.at("standardization").at("mean"));
    m.standardizer.inv_scale = row_vector_from(j.at("standardization").at("inv_scale"));
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", 0);
    const auto d = static_cast<Eigen::Index>(m.selected.size());
    switch (m.kind) {
      case ClassifierKind::kLogisticRegression:
      case ClassifierKind::kLinearSvm:
      case ClassifierKind::kLda:
        m.model = LinearModel{matrix_from(j.at("weights"), d), row_vector_from(j.at("bias")).transpose()};
        break;
      case ClassifierKind::kKnn:
        m.model = KnnModel{matrix_from(j.at("exemplars"), d), j.at("exemplar_labels").get<std::vector<int>>(),
                           j.at("k").get<int>()};
        break;
      case ClassifierKind::kRandomForest: {
        ForestModel forest;
        for (const auto& t : j.at("trees")) {
          DecisionTree tree;
          for (const auto& n : t) {
            DecisionTree::Node node;
            if (n.contains("leaf")) {
              node.distribution = n.at("leaf").get<std::vector<double>>();
            } else {
              node.feature = n.at("feature").get<int>();
              node.threshold = n.at("threshold").get<double>();
              node.left = n.at("left").get<int>();
              node.right = n.at("right").get<int>();
            }
            tree.nodes.push_back(std::move(node));
          }
          forest.trees.push_back(std::move(tree));
        }
        m.model = std::move(forest);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what(), 0);
  }
}

json to_json(const FeatureConfig& cfg) {
  const auto& s = cfg.spectral;
  return {{"kind", to_string(cfg.kind)},
          {"normalize", cfg.normalize},
          {"window_s", s.window_s},
          {"step_s", s.step_s},
          {"n_mels", s.n_mels},
          {"n_coeffs", s.n_coeffs},
          {"fmin_hz", s.fmin_hz},
          {"fmax_hz", s.fmax_hz},
          {"fft_size", s.fft_size},
          {"window", s.window == WindowKind::kHamming ? "hamming" : "rectangular"},
          {"log_floor", s.log_floor},
          {"concatenate_frames", s.concatenate_frames}};
}

FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig cfg;
  try {
    cfg.kind = feature_kind_from_string(j.value("kind", std::string("mfcc")));
    cfg.normalize = j.value("normalize", cfg.normalize);
    auto& s = cfg.spectral;
    s.window_s = j.value("window_s", s.window_s);
    s.step_s = j.value("step_s", s.step_s);
    s.n_mels = j.value("n_mels", s.n_mels);
    s.n_coeffs = j.value("n_coeffs", s.n_coeffs);
    s.fmin_hz = j.value("fmin_hz", s.fmin_hz);
    s.fmax_hz = j.value("fmax_hz", s.fmax_hz);
    s.fft_size = j.value("fft_size", s.fft_size);
    const auto w = j.value("window", std::string("hamming"));
    if (w != "hamming" && w != "rectangular") throw ContractError("window must be hamming or rectangular");
    s.window = w == "hamming" ? WindowKind::kHamming : WindowKind::kRectangular;
    s.log_floor = j.value("log_floor", s.log_floor);
    s.concatenate_frames = j.value("concatenate_frames", s.concatenate_frames);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed feature config: ") + e.what(), 0);
  }
  return cfg;
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  json j = to_json(model.classifier);
  j["features"] = to_json(model.features);
  write_file_atomic(path, j.dump(1) + "\n");
}

ModelFile load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not JSON: ") + e.what(), e.byte);
  }
  ModelFile m;
  m.classifier = classifier_from_json(j);
  if (j.contains("features")) m.features = feature_config_from_json(j.at("features"));
  return m;
}

}  // namespace keytap

#include "tobart/serialize.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace tobart {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json tree_to_json(const Tree& tree) {
  json nodes = json::array();
  for (const auto& nd : tree.nodes())
    nodes.push_back({nd.var, nd.split, nd.bandwidth, nd.mu, nd.left, nd.right, nd.parent});
  return nodes;
}

Tree tree_from_json(const json& nodes) {
  std::vector<TreeNode> arena;
  arena.reserve(nodes.size());
  for (const auto& jn : nodes) {
    TreeNode nd;
    nd.var = jn.at(0).get<int>();
    nd.split = jn.at(1).get<double>();
    nd.bandwidth = jn.at(2).get<double>();
    nd.mu = jn.at(3).get<double>();
    nd.left = jn.at(4).get<int>();
    nd.right = jn.at(5).get<int>();
    nd.parent = jn.at(6).get<int>();
    arena.push_back(nd);
  }
  return Tree::from_nodes(std::move(arena));
}

json options_to_json(const ForestOptions& o) {
  return {{"m", o.m},
          {"mode", o.mode == TreeMode::kSoft ? "soft" : "hard"},
          {"alpha_tree", o.alpha_tree},
          {"beta_tree", o.beta_tree},
          {"kappa", o.kappa},
          {"min_leaf", o.min_leaf},
          {"p_grow", o.p_grow},
          {"p_prune", o.p_prune},
          {"p_change", o.p_change},
          {"sparse", o.sparse},
          {"bandwidth_prior_mean", o.bandwidth_prior_mean},
          {"bandwidth_step", o.bandwidth_step}};
}

ForestOptions options_from_json(const json& j) {
  ForestOptions o;
  o.m = j.at("m").get<int>();
  o.mode = j.at("mode").get<std::string>() == "soft" ? TreeMode::kSoft : TreeMode::kHard;
  o.alpha_tree = j.at("alpha_tree").get<double>();
  o.beta_tree = j.at("beta_tree").get<double>();
  o.kappa = j.at("kappa").get<double>();
  o.min_leaf = j.at("min_leaf").get<int>();
  o.p_grow = j.at("p_grow").get<double>();
  o.p_prune = j.at("p_prune").get<double>();
  o.p_change = j.at("p_change").get<double>();
  o.sparse = j.at("sparse").get<bool>();
  o.bandwidth_prior_mean = j.at("bandwidth_prior_mean").get<double>();
  o.bandwidth_step = j.at("bandwidth_step").get<double>();
  return o;
}

json forest_to_json_obj(const ForestState& f) {
  json trees = json::array();
  for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
  return {{"format", "tobart-forest"},
          {"version", kFormatVersion},
          {"options", options_to_json(f.opts)},
          {"trees", trees},
          {"tree_bandwidth", f.tree_bandwidth},
          {"sigma_mu", f.sigma_mu},
          {"split_probs", f.split_probs},
          {"a_sparse", f.a_sparse},
          {"bandwidth_prior", f.bandwidth_prior}};
}

ForestState forest_from_json_obj(const json& j) {
  if (j.at("format").get<std::string>() != "tobart-forest")
    throw std::invalid_argument("forest_from_json: not a forest dump");
  if (j.at("version").get<int>() != kFormatVersion)
    throw std::invalid_argument("forest_from_json: unsupported version");
  ForestState f;
  f.opts = options_from_json(j.at("options"));
  for (const auto& jt : j.at("trees")) f.trees.push_back(tree_from_json(jt));
  f.tree_bandwidth = j.at("tree_bandwidth").get<std::vector<double>>();
  f.sigma_mu = j.at("sigma_mu").get<double>();
  f.split_probs = j.at("split_probs").get<std::vector<double>>();
  f.a_sparse = j.at("a_sparse").get<double>();
  f.bandwidth_prior = j.at("bandwidth_prior").get<double>();
  return f;
}

double json_bound(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -kInf;
    if (s == "inf") return kInf;
    throw std::invalid_argument("bad bound in model file: " + s);
  }
  return j.get<double>();
}

json bound_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

}  // namespace

std::string forest_to_json(const ForestState& forest) {
  return forest_to_json_obj(forest).dump();
}

ForestState forest_from_json(const std::string& json_text) {
  return forest_from_json_obj(json::parse(json_text));
}

std::string model_to_json(const PosteriorDraws& d) {
  json j;
  j["format"] = "tobart-model";
  j["version"] = kFormatVersion;
  j["mode"] = d.mode == TreeMode::kSoft ? "soft" : "hard";
  j["error_model"] = d.error_model == ErrorModel::kDp ? "dp" : "normal";
  j["bounds"] = {bound_json(d.bounds.a), bound_json(d.bounds.b)};
  j["center"] = d.center;
  j["sigma"] = d.sigma;
  j["calibration"] = {{"sigma_hat", d.calib.sigma_hat},
                      {"method", sigma_hat_method_name(d.calib.sigma_hat_method)},
                      {"lambda", d.calib.lambda},
                      {"q", d.calib.q},
                      {"nu", d.calib.nu},
                      {"k0", d.calib.k0},
                      {"k_s", d.calib.k_s},
                      {"center", d.calib.center}};
  json forests = json::array();
  for (const auto& snapshot : d.forests) {
    json trees = json::array();
    for (const auto& t : snapshot) trees.push_back(tree_to_json(t));
    forests.push_back(std::move(trees));
  }
  j["forests"] = std::move(forests);
  if (d.error_model == ErrorModel::kDp) {
    j["base"] = {{"nu", d.base.nu},
                 {"lambda", d.base.lambda},
                 {"gamma0", d.base.gamma0},
                 {"k0", d.base.k0},
                 {"k_s", d.base.k_s}};
    json clusters = json::array();
    for (const auto& cl : d.dp_clusters) {
      json one = json::array();
      for (const auto& c : cl) one.push_back({c.gamma, c.sigma, c.size});
      clusters.push_back(std::move(one));
    }
    j["dp_clusters"] = std::move(clusters);
    j["dp_alpha"] = d.dp_alpha;
  }
  return j.dump();
}

PosteriorDraws model_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  if (j.at("format").get<std::string>() != "tobart-model")
    throw std::invalid_argument("model_from_json: not a model dump");
  if (j.at("version").get<int>() != kFormatVersion)
    throw std::invalid_argument("model_from_json: unsupported version");
  PosteriorDraws d;
  d.mode = j.at("mode").get<std::string>() == "soft" ? TreeMode::kSoft : TreeMode::kHard;
  d.error_model =
      j.at("error_model").get<std::string>() == "dp" ? ErrorModel::kDp : ErrorModel::kHomoskedastic;
  d.bounds.a = json_bound(j.at("bounds").at(0));
  d.bounds.b = json_bound(j.at("bounds").at(1));
  d.center = j.at("center").get<double>();
  d.sigma = j.at("sigma").get<std::vector<double>>();
  const json& cal = j.at("calibration");
  d.calib.sigma_hat = cal.at("sigma_hat").get<double>();
  d.calib.sigma_hat_method = parse_sigma_hat_method(cal.at("method").get<std::string>());
  d.calib.lambda = cal.at("lambda").get<double>();
  d.calib.q = cal.at("q").get<double>();
  d.calib.nu = cal.at("nu").get<double>();
  d.calib.k0 = cal.at("k0").get<double>();
  d.calib.k_s = cal.at("k_s").get<double>();
  d.calib.center = cal.at("center").get<double>();
  for (const auto& jt : j.at("forests")) {
    std::vector<Tree> snapshot;
    for (const auto& t : jt) snapshot.push_back(tree_from_json(t));
    d.forests.push_back(std::move(snapshot));
  }
  if (d.error_model == ErrorModel::kDp) {
    const json& base = j.at("base");
    d.base.nu = base.at("nu").get<double>();
    d.base.lambda = base.at("lambda").get<double>();
    d.base.gamma0 = base.at("gamma0").get<double>();
    d.base.k0 = base.at("k0").get<double>();
    d.base.k_s = base.at("k_s").get<double>();
    for (const auto& jc : j.at("dp_clusters")) {
      std::vector<DpCluster> cl;
      for (const auto& c : jc)
        cl.push_back(DpCluster{c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<int>()});
      d.dp_clusters.push_back(std::move(cl));
    }
    d.dp_alpha = j.at("dp_alpha").get<std::vector<double>>();
  }
  d.config.mode = d.mode;
  d.config.error_model = d.error_model;
  return d;
}

void save_model(const PosteriorDraws& draws, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << model_to_json(draws);
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

PosteriorDraws load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

PosteriorDraws predict_draws_from_model(const PosteriorDraws& model, const Eigen::MatrixXd& x,
                                        RngStream& rng) {
  if (model.forests.empty())
    throw std::invalid_argument("predict_draws_from_model: dump has no forest snapshots");
  PosteriorDraws out;
  out.error_model = model.error_model;
  out.mode = model.mode;
  out.bounds = model.bounds;
  out.center = model.center;
  out.calib = model.calib;
  out.sigma = model.sigma;
  out.base = model.base;
  const bool soft = model.mode == TreeMode::kSoft;
  for (std::size_t d = 0; d < model.forests.size(); ++d) {
    Eigen::VectorXd f(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (const auto& tree : model.forests[d])
        s += soft ? soft_predict(tree, x.row(i)) : hard_predict(tree, x.row(i));
      f[i] = s + model.center;
    }
    out.f_test.push_back(std::move(f));
    if (model.error_model == ErrorModel::kDp) {
      std::vector<std::pair<double, double>> oos(static_cast<std::size_t>(x.rows()));
      for (auto& pr : oos)
        pr = draw_oos_error(rng, model.dp_clusters[d], model.dp_alpha[d], model.base);
      out.oos_test.push_back(std::move(oos));
    }
  }
  return out;
}

}  // namespace tobart

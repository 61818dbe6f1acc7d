#include "matgen/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace matgen::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> default_stretch_grid(int points, double lambda_max) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = 1.0 + (lambda_max - 1.0) * i / (points - 1);
  return grid;
}

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.n_individuals < 0) throw std::invalid_argument("negative individual count");
  std::mt19937_64 rng(cfg.seed);
  std::gamma_distribution<double> g_mu(cfg.mu.shape, cfg.mu.scale);
  std::gamma_distribution<double> g_k1(cfg.k1.shape, cfg.k1.scale);
  std::gamma_distribution<double> g_k2(cfg.k2.shape, cfg.k2.scale);
  const auto grid = default_stretch_grid(cfg.grid_points, cfg.lambda_max);

  Dataset ds;
  for (int i = 0; i < cfg.n_individuals; ++i) {
    mech::MayNewmanParams p;
    p.mu = g_mu(rng);
    p.k1 = g_k1(rng);
    p.k2 = g_k2(rng);
    std::vector<mech::BiaxialCurve> curves;
    for (auto proto : cfg.protocols) {
      mech::LoadingProtocol lp{proto, grid};
      curves.push_back(mech::may_newman_curve(p, lp));
    }
    ds.individuals.push_back(std::move(curves));
    ds.true_params.push_back(p);
  }
  return ds;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_to_vector(const json& a) {
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json net_to_json(const engine::DenseNet& net) {
  json j;
  json widths = json::array();
  widths.push_back(net.input_width());
  json acts = json::array();
  for (const auto& l : net.layers()) {
    widths.push_back(static_cast<int>(l.W.rows()));
    acts.push_back(engine::to_string(l.act));
  }
  j["widths"] = widths;
  j["activations"] = acts;
  j["params"] = vector_to_json(net.params_flat());
  return j;
}

engine::DenseNet net_from_json(const json& j) {
  std::vector<int> widths = j.at("widths").get<std::vector<int>>();
  std::vector<engine::Activation> acts;
  for (const auto& a : j.at("activations")) acts.push_back(engine::activation_from_string(a));
  engine::DenseNet net(widths, acts);
  net.set_params_flat(json_to_vector(j.at("params")));
  return net;
}

json arch_to_json(const node::NodeArch& arch) {
  json j;
  j["kind"] = node::to_string(arch.kind);
  j["hidden"] = arch.hidden;
  j["last_hidden"] = arch.last_hidden;
  j["tau_steps"] = arch.tau_steps;
  return j;
}

node::NodeArch arch_from_json(const json& j) {
  node::NodeArch arch;
  arch.kind = node::arch_from_string(j.at("kind").get<std::string>());
  arch.hidden = j.at("hidden").get<std::vector<int>>();
  arch.last_hidden = j.at("last_hidden").get<std::vector<int>>();
  arch.tau_steps = j.at("tau_steps").get<int>();
  return arch;
}

json model_to_json(const FittedModel& m) {
  json j;
  j["version"] = 1;
  j["arch"] = arch_to_json(m.model.arch());
  j["shared"] = vector_to_json(m.model.shared());
  json phis = json::array();
  for (const auto& phi : m.phis) phis.push_back(vector_to_json(phi));
  j["phis"] = phis;
  j["mae"] = m.mae;
  return j;
}

FittedModel model_from_json(const json& j) {
  if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported model version");
  FittedModel m;
  m.model = node::ConstitutiveModel(arch_from_json(j.at("arch")), 0);
  m.model.set_shared(json_to_vector(j.at("shared")));
  for (const auto& phi : j.at("phis")) m.phis.push_back(json_to_vector(phi));
  if (j.contains("mae")) m.mae = j.at("mae").get<std::vector<double>>();
  return m;
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("parse error in " + path.string() + ": " + e.what());
  }
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  for (size_t i = 0; i < ds.individuals.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "individual_%04zu.csv", i);
    manifest << name << "\n";
    std::ostringstream csv;
    csv << "protocol,lambda,sigma_xx,sigma_yy\n";
    for (const auto& c : ds.individuals[i]) {
      for (size_t k = 0; k < c.protocol.stretch_grid.size(); ++k)
        csv << mech::to_string(c.protocol.kind) << ',' << format_double(c.protocol.stretch_grid[k])
            << ',' << format_double(c.sigma_xx[k]) << ',' << format_double(c.sigma_yy[k]) << "\n";
    }
    write_file_atomic(dir / name, csv.str());
  }
  write_file_atomic(dir / "manifest.txt", manifest.str());
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::invalid_argument("cannot open manifest in " + dir.string());
  Dataset ds;
  std::string name;
  while (std::getline(manifest, name)) {
    if (name.empty()) continue;
    std::ifstream in(dir / name);
    if (!in) throw std::invalid_argument("missing dataset file " + name);
    std::string line;
    std::getline(in, line);  // header
    // rebuild one curve per protocol, preserving order of appearance
    std::vector<mech::BiaxialCurve> curves;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != 4)
        throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": expected 4 columns");
      const auto proto = mech::protocol_from_string(cells[0]);
      auto it = std::find_if(curves.begin(), curves.end(),
                             [&](const auto& c) { return c.protocol.kind == proto; });
      if (it == curves.end()) {
        curves.push_back({{proto, {}}, {}, {}});
        it = curves.end() - 1;
      }
      it->protocol.stretch_grid.push_back(std::stod(cells[1]));
      it->sigma_xx.push_back(std::stod(cells[2]));
      it->sigma_yy.push_back(std::stod(cells[3]));
    }
    ds.individuals.push_back(std::move(curves));
  }
  if (ds.individuals.empty()) throw std::invalid_argument("empty dataset in " + dir.string());
  return ds;
}

void save_model(const FittedModel& m, const fs::path& path) {
  write_file_atomic(path, model_to_json(m).dump(2));
}

FittedModel load_model(const fs::path& path) { return model_from_json(load_json_file(path)); }

void save_score(const ScoreArtifact& a, const fs::path& path) {
  json j;
  j["version"] = 1;
  j["net"] = net_to_json(a.score.net);
  j["schedule"] = {{"beta_min", a.score.schedule.beta_min},
                   {"beta_max", a.score.schedule.beta_max},
                   {"T", a.score.schedule.T},
                   {"n_steps", a.score.schedule.n_steps}};
  j["standardizer"] = {{"mean", vector_to_json(a.score.standardizer.mean)},
                       {"std", vector_to_json(a.score.standardizer.std)}};
  j["first_epoch_loss"] = a.score.first_epoch_loss;
  j["final_epoch_loss"] = a.score.final_epoch_loss;
  j["model"] = model_to_json(a.fitted);
  write_file_atomic(path, j.dump(2));
}

ScoreArtifact load_score(const fs::path& path) {
  const json j = load_json_file(path);
  if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported score version");
  ScoreArtifact a;
  a.score.net = net_from_json(j.at("net"));
  a.score.schedule.beta_min = j.at("schedule").at("beta_min").get<double>();
  a.score.schedule.beta_max = j.at("schedule").at("beta_max").get<double>();
  a.score.schedule.T = j.at("schedule").at("T").get<double>();
  a.score.schedule.n_steps = j.at("schedule").at("n_steps").get<int>();
  a.score.standardizer.mean = json_to_vector(j.at("standardizer").at("mean"));
  a.score.standardizer.std = json_to_vector(j.at("standardizer").at("std"));
  a.score.first_epoch_loss = j.value("first_epoch_loss", 0.0);
  a.score.final_epoch_loss = j.value("final_epoch_loss", 0.0);
  a.fitted = model_from_json(j.at("model"));
  return a;
}

void save_samples(const Eigen::MatrixXd& cols, const fs::path& path) {
  std::ostringstream os;
  for (Eigen::Index r = 0; r < cols.rows(); ++r) os << (r ? "," : "") << "phi_" << r;
  os << "\n";
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    for (Eigen::Index r = 0; r < cols.rows(); ++r)
      os << (r ? "," : "") << format_double(cols(r, j));
    os << "\n";
  }
  write_file_atomic(path, os.str());
}

Eigen::MatrixXd load_samples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  const int dim = static_cast<int>(split_csv_line(line).size());
  std::vector<Eigen::VectorXd> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != dim)
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                  ": column count mismatch");
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = std::stod(cells[i]);
    rows.push_back(v);
  }
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = rows[i];
  return out;
}

void save_field(const fields::ParameterField& f, const Eigen::MatrixXd& coords,
                const fs::path& path) {
  std::ostringstream os;
  os << "x,y";
  for (Eigen::Index r = 0; r < f.phi.rows(); ++r) os << ",phi_" << r;
  os << "\n";
  for (Eigen::Index j = 0; j < f.phi.cols(); ++j) {
    os << format_double(coords(0, j)) << ',' << format_double(coords(1, j));
    for (Eigen::Index r = 0; r < f.phi.rows(); ++r) os << ',' << format_double(f.phi(r, j));
    os << "\n";
  }
  write_file_atomic(path, os.str());
}

fields::ParameterField load_field(const fs::path& path, Eigen::MatrixXd* coords) {
  const Eigen::MatrixXd all = load_samples(path);  // (2+P) x n
  fields::ParameterField f;
  if (coords) *coords = all.topRows(2);
  f.phi = all.bottomRows(all.rows() - 2);
  return f;
}

void save_column(const Eigen::VectorXd& v, const std::string& header, const fs::path& path) {
  std::ostringstream os;
  os << header << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << format_double(v[i]) << "\n";
  write_file_atomic(path, os.str());
}

Eigen::VectorXd load_column(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> vals;
  while (std::getline(in, line))
    if (!line.empty()) vals.push_back(std::stod(line));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

fields::TriMesh load_mesh(const fs::path& nodes_file, const fs::path& tris_file) {
  fields::TriMesh mesh;
  {
    std::ifstream in(nodes_file);
    if (!in) throw std::invalid_argument("cannot open " + nodes_file.string());
    std::vector<std::array<double, 2>> pts;
    double x, y;
    while (in >> x >> y) pts.push_back({x, y});
    mesh.nodes.resize(2, static_cast<Eigen::Index>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i)
      mesh.nodes.col(static_cast<Eigen::Index>(i)) << pts[i][0], pts[i][1];
  }
  {
    std::ifstream in(tris_file);
    if (!in) throw std::invalid_argument("cannot open " + tris_file.string());
    std::vector<std::array<int, 3>> tris;
    int a, b, c;
    while (in >> a >> b >> c) tris.push_back({a, b, c});
    mesh.triangles.resize(3, static_cast<Eigen::Index>(tris.size()));
    for (size_t i = 0; i < tris.size(); ++i)
      mesh.triangles.col(static_cast<Eigen::Index>(i)) << tris[i][0], tris[i][1], tris[i][2];
  }
  mesh.validate();
  return mesh;
}

void save_mesh(const fields::TriMesh& mesh, const fs::path& nodes_file,
               const fs::path& tris_file) {
  std::ostringstream nodes;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    nodes << format_double(mesh.nodes(0, i)) << ' ' << format_double(mesh.nodes(1, i)) << "\n";
  write_file_atomic(nodes_file, nodes.str());
  std::ostringstream tris;
  for (int t = 0; t < mesh.n_tris(); ++t)
    tris << mesh.triangles(0, t) << ' ' << mesh.triangles(1, t) << ' ' << mesh.triangles(2, t)
         << "\n";
  write_file_atomic(tris_file, tris.str());
}

diffusion::Observation load_observation(const fs::path& path, double noise) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  diffusion::Observation obs;
  obs.noise = noise;
  std::vector<double> values;
  std::string line;
  int lineno = 0;
  bool first_data = true;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (lineno == 1 && (cells[0] == "protocol" || cells[0] == "param")) continue;  // header
    const bool protocol_row = cells[0] == "offx" || cells[0] == "offy" ||
                              cells[0] == "equibiaxial";
    if (first_data)
      obs.direct = !protocol_row;
    if (obs.direct) {
      // param,index,value
      if (protocol_row) fail("cannot mix direct and stress observations");
      if (cells.size() != 3) fail("expected param,index,value");
      obs.indices.push_back(std::stoi(cells[1]));
      values.push_back(std::stod(cells[2]));
    } else {
      if (!protocol_row) fail("cannot mix direct and stress observations");
      if (cells.size() < 3) fail("expected protocol,lambda,sigma_xx[,sigma_yy]");
      const auto proto = mech::protocol_from_string(cells[0]);
      const double lambda = std::stod(cells[1]);
      obs.protocols.push_back(proto);
      obs.lambdas.push_back(lambda);
      obs.components.push_back(0);
      values.push_back(std::stod(cells[2]));
      if (cells.size() >= 4 && !cells[3].empty()) {
        obs.protocols.push_back(proto);
        obs.lambdas.push_back(lambda);
        obs.components.push_back(1);
        values.push_back(std::stod(cells[3]));
      }
    }
    first_data = false;
  }
  obs.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  obs.validate();
  return obs;
}

void save_eigenbasis(const fields::EigenBasis& basis, const fs::path& path) {
  json j;
  j["version"] = 1;
  j["eigenvalues"] = vector_to_json(basis.eigenvalues);
  json vecs = json::array();
  for (Eigen::Index c = 0; c < basis.eigenvectors.cols(); ++c)
    vecs.push_back(vector_to_json(basis.eigenvectors.col(c)));
  j["eigenvectors"] = vecs;
  j["lumped_mass"] = vector_to_json(basis.lumped_mass);
  j["total_area"] = basis.total_area;
  write_file_atomic(path, j.dump());
}

fields::EigenBasis load_eigenbasis(const fs::path& path) {
  const json j = load_json_file(path);
  fields::EigenBasis basis;
  basis.eigenvalues = json_to_vector(j.at("eigenvalues"));
  const auto& vecs = j.at("eigenvectors");
  basis.eigenvectors.resize(json_to_vector(vecs[0]).size(),
                            static_cast<Eigen::Index>(vecs.size()));
  for (size_t c = 0; c < vecs.size(); ++c)
    basis.eigenvectors.col(static_cast<Eigen::Index>(c)) = json_to_vector(vecs[c]);
  basis.lumped_mass = json_to_vector(j.at("lumped_mass"));
  basis.total_area = j.at("total_area").get<double>();
  return basis;
}

}  // namespace matgen::io

#ifndef MATGEN_IO_HPP
#define MATGEN_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "matgen/diffusion.hpp"
#include "matgen/fields.hpp"
#include "matgen/mech.hpp"
#include "matgen/node_energy.hpp"

namespace matgen::io {

struct GammaSpec {
  double shape = 1.0;
  double scale = 1.0;
};

struct SynthConfig {
  GammaSpec mu{5.0, 0.01};
  GammaSpec k1{2.0, 0.02};
  GammaSpec k2{4.0, 0.5};
  std::vector<mech::Protocol> protocols = {mech::Protocol::OffX, mech::Protocol::OffY,
                                           mech::Protocol::Equibiaxial};
  int grid_points = 20;
  double lambda_max = 1.25;
  int n_individuals = 0;
  uint64_t seed = 0;
};

struct Dataset {
  // individuals[i] holds one BiaxialCurve per protocol
  std::vector<std::vector<mech::BiaxialCurve>> individuals;
  std::vector<mech::MayNewmanParams> true_params;  // present for synthetic data
};

std::vector<double> default_stretch_grid(int points, double lambda_max);

Dataset synth_generate(const SynthConfig& cfg);

// Atomic text write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct FittedModel {
  node::ConstitutiveModel model;
  std::vector<Eigen::VectorXd> phis;
  std::vector<double> mae;
};

void save_model(const FittedModel& m, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

struct ScoreArtifact {
  diffusion::ScoreModel score;
  FittedModel fitted;  // constitutive context for stress conditioning / evaluation
};

void save_score(const ScoreArtifact& a, const std::filesystem::path& path);
ScoreArtifact load_score(const std::filesystem::path& path);

// samples.csv: header phi_0..phi_{P-1}; one sample per row.
void save_samples(const Eigen::MatrixXd& cols_are_samples, const std::filesystem::path& path);
Eigen::MatrixXd load_samples(const std::filesystem::path& path);  // returns P x n

// field.csv: x,y,phi_0,...  one point per row.
void save_field(const fields::ParameterField& f, const Eigen::MatrixXd& coords,
                const std::filesystem::path& path);
fields::ParameterField load_field(const std::filesystem::path& path, Eigen::MatrixXd* coords);

// plain single-column CSV with header
void save_column(const Eigen::VectorXd& v, const std::string& header,
                 const std::filesystem::path& path);
Eigen::VectorXd load_column(const std::filesystem::path& path);

fields::TriMesh load_mesh(const std::filesystem::path& nodes_file,
                          const std::filesystem::path& tris_file);
void save_mesh(const fields::TriMesh& mesh, const std::filesystem::path& nodes_file,
               const std::filesystem::path& tris_file);

diffusion::Observation load_observation(const std::filesystem::path& path, double noise);

void save_eigenbasis(const fields::EigenBasis& basis, const std::filesystem::path& path);
fields::EigenBasis load_eigenbasis(const std::filesystem::path& path);

}  // namespace matgen::io

#endif

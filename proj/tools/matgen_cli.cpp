// Command line pipeline: synthetic data, population fitting, score training,
// unconditional / conditional / field sampling, and distribution metrics.

#include <cstdio>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "matgen/diffusion.hpp"
#include "matgen/fields.hpp"
#include "matgen/io.hpp"
#include "matgen/metrics.hpp"
#include "matgen/node_energy.hpp"

namespace {

using namespace matgen;

int run(int argc, char** argv) {
  CLI::App app{"Population hyperelastic model generation via NODE energies and diffusion"};
  app.require_subcommand(1);

  uint64_t seed = 0;
  app.add_option("--seed", seed, "global RNG seed")->capture_default_str();

  // synth-gen
  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic population dataset");
  int synth_n = 10;
  std::string synth_out;
  synth->add_option("--n", synth_n, "number of individuals")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit a population constitutive model");
  std::string fit_data, fit_arch = "iso2", fit_out;
  int fit_steps = 4000;
  double fit_lr = 1e-3;
  fit->add_option("--data", fit_data, "dataset directory")->required();
  fit->add_option("--arch", fit_arch, "iso2|aniso5")->capture_default_str();
  fit->add_option("--out", fit_out, "output model.json")->required();
  fit->add_option("--steps", fit_steps, "optimizer steps")->capture_default_str();
  fit->add_option("--lr", fit_lr, "learning rate")->capture_default_str();

  // score-train
  auto* st = app.add_subcommand("score-train", "train the score network on fitted phis");
  std::string st_model, st_out, st_target = "exact";
  int st_epochs = 1000, st_batch = 100;
  double st_lr = 1e-3;
  st->add_option("--model", st_model, "fitted model.json")->required();
  st->add_option("--out", st_out, "output score.json")->required();
  st->add_option("--target", st_target, "exact|denoising")->capture_default_str();
  st->add_option("--epochs", st_epochs)->capture_default_str();
  st->add_option("--batch", st_batch)->capture_default_str();
  st->add_option("--lr", st_lr)->capture_default_str();

  // sample
  auto* sample = app.add_subcommand("sample", "generate unconditional parameter samples");
  std::string sm_score, sm_out;
  int sm_n = 1000;
  sample->add_option("--score", sm_score)->required();
  sample->add_option("--n", sm_n)->capture_default_str();
  sample->add_option("--out", sm_out)->required();

  // sample-cond
  auto* cond = app.add_subcommand("sample-cond", "generate conditioned parameter samples");
  std::string sc_score, sc_obs, sc_out;
  double sc_sigma = 0.05;
  int sc_n = 1000;
  cond->add_option("--score", sc_score)->required();
  cond->add_option("--obs", sc_obs, "observation csv")->required();
  cond->add_option("--sigma", sc_sigma, "observation noise")->required();
  cond->add_option("--n", sc_n)->capture_default_str();
  cond->add_option("--out", sc_out)->required();

  // field-sample
  auto* field = app.add_subcommand("field-sample", "generate a heterogeneous parameter field");
  std::string fs_score, fs_grid, fs_mesh, fs_out, fs_obs;
  double fs_ell = 0.2, fs_sigma = 0.05;
  int fs_neig = 256;
  field->add_option("--score", fs_score)->required();
  field->add_option("--grid", fs_grid, "nx,ny,Lx,Ly");
  field->add_option("--mesh", fs_mesh, "nodes.txt,tris.txt");
  field->add_option("--ell", fs_ell, "correlation length")->required();
  field->add_option("--neig", fs_neig, "eigenpairs for mesh sampling")->capture_default_str();
  field->add_option("--obs", fs_obs, "optional observation csv for conditioning");
  field->add_option("--sigma", fs_sigma, "observation noise")->capture_default_str();
  field->add_option("--out", fs_out)->required();

  // stress-eval
  auto* se = app.add_subcommand("stress-eval", "evaluate stress QoI for parameter samples");
  std::string se_model, se_phi, se_proto = "equibiaxial", se_out;
  double se_lambda = 1.1;
  se->add_option("--model", se_model)->required();
  se->add_option("--phi", se_phi, "samples.csv")->required();
  se->add_option("--protocol", se_proto)->capture_default_str();
  se->add_option("--lambda", se_lambda)->capture_default_str();
  se->add_option("--out", se_out)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "compare two sample sets");
  std::string ev_a, ev_b, ev_kde;
  int ev_gmm = 0;
  ev->add_option("--a", ev_a)->required();
  ev->add_option("--b", ev_b)->required();
  ev->add_option("--gmm", ev_gmm, "fit a k-component GMM baseline to --a");
  ev->add_option("--kde", ev_kde, "emit a KDE grid of --a to this file");

  // eig
  auto* eig = app.add_subcommand("eig", "Laplace-Beltrami eigenbasis of a mesh");
  std::string eg_mesh, eg_out;
  int eg_neig = 256;
  eig->add_option("--mesh", eg_mesh, "nodes.txt,tris.txt")->required();
  eig->add_option("--neig", eg_neig)->capture_default_str();
  eig->add_option("--out", eg_out)->required();

  // --seed may appear before or after the subcommand name
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(seed);

  if (*synth) {
    io::SynthConfig cfg;
    cfg.n_individuals = synth_n;
    cfg.seed = seed;
    io::save_dataset(io::synth_generate(cfg), synth_out);
    std::cout << "wrote " << synth_n << " individuals to " << synth_out << "\n";
  } else if (*fit) {
    const auto ds = io::load_dataset(fit_data);
    node::NodeArch arch;
    arch.kind = node::arch_from_string(fit_arch);
    node::FitConfig cfg;
    cfg.max_steps = fit_steps;
    cfg.lr = fit_lr;
    cfg.seed = seed;
    const auto pf = node::fit_population(ds.individuals, arch, cfg);
    io::save_model({pf.model, pf.phis, pf.mae}, fit_out);
    double worst = 0.0;
    for (double m : pf.mae) worst = std::max(worst, m);
    std::cout << "final loss " << pf.final_loss << ", worst individual MAE " << worst << "\n";
  } else if (*st) {
    const auto fitted = io::load_model(st_model);
    if (fitted.phis.size() < 2) throw std::invalid_argument("need >= 2 fitted individuals");
    Eigen::MatrixXd data(fitted.phis[0].size(), fitted.phis.size());
    for (size_t i = 0; i < fitted.phis.size(); ++i)
      data.col(static_cast<Eigen::Index>(i)) = fitted.phis[i];
    diffusion::TrainConfig cfg;
    cfg.epochs = st_epochs;
    cfg.batch = st_batch;
    cfg.lr = st_lr;
    cfg.seed = seed;
    cfg.target = st_target == "denoising" ? diffusion::ScoreTarget::Denoising
                                          : diffusion::ScoreTarget::ExactMixture;
    diffusion::Schedule sched;
    auto score = diffusion::train_score(data, sched, cfg);
    io::save_score({score, fitted}, st_out);
    std::cout << "epoch loss " << score.first_epoch_loss << " -> " << score.final_epoch_loss
              << "\n";
  } else if (*sample) {
    const auto a = io::load_score(sm_score);
    const auto samples = diffusion::reverse_sde_sample(
        a.score.as_score_fn(), a.score.schedule, a.score.dim(), sm_n, rng,
        &a.score.standardizer);
    io::save_samples(samples, sm_out);
    std::cout << "wrote " << sm_n << " samples\n";
  } else if (*cond) {
    const auto a = io::load_score(sc_score);
    auto obs = io::load_observation(sc_obs, sc_sigma);
    const auto samples = diffusion::conditional_sample(
        a.score.as_score_fn(), obs, &a.fitted.model, a.score.standardizer, a.score.schedule,
        a.score.dim(), sc_n, rng);
    io::save_samples(samples, sc_out);
    std::cout << "wrote " << sc_n << " conditioned samples\n";
  } else if (*field) {
    const auto a = io::load_score(fs_score);
    diffusion::ScoreFn score = a.score.as_score_fn();
    if (!fs_obs.empty()) {
      auto obs = io::load_observation(fs_obs, fs_sigma);
      auto base = a.score.as_score_fn();
      score = [base, obs, &a](const Eigen::MatrixXd& Phi, double t) {
        Eigen::MatrixXd s = base(Phi, t);
        for (Eigen::Index j = 0; j < Phi.cols(); ++j)
          s.col(j) += diffusion::likelihood_score(obs, &a.fitted.model, a.score.standardizer,
                                                  Phi.col(j));
        return s;
      };
    }
    fields::ParameterField out;
    Eigen::MatrixXd coords;
    if (!fs_grid.empty()) {
      int nx, ny;
      double Lx, Ly;
      if (std::sscanf(fs_grid.c_str(), "%d,%d,%lf,%lf", &nx, &ny, &Lx, &Ly) != 4)
        throw std::invalid_argument("--grid expects nx,ny,Lx,Ly");
      const auto points = fields::PointSet::grid2d(nx, ny, Lx, Ly);
      fields::GpPointSampler sampler(points, fs_ell);
      out = fields::field_reverse_sde(score, fields::make_sampler(sampler), points.size(),
                                      a.score.dim(), a.score.schedule, rng,
                                      &a.score.standardizer);
      coords = points.coords;
    } else if (!fs_mesh.empty()) {
      const auto comma = fs_mesh.find(',');
      if (comma == std::string::npos)
        throw std::invalid_argument("--mesh expects nodes.txt,tris.txt");
      const auto mesh = io::load_mesh(fs_mesh.substr(0, comma), fs_mesh.substr(comma + 1));
      const int neig = std::min(fs_neig, mesh.n_nodes());
      const auto basis = fields::laplace_eigenbasis(mesh, neig);
      fields::MaternConfig mc;
      mc.ell = fs_ell;
      fields::MaternFieldSampler sampler(basis, mc);
      out = fields::field_reverse_sde(score, fields::make_sampler(sampler), mesh.n_nodes(),
                                      a.score.dim(), a.score.schedule, rng,
                                      &a.score.standardizer);
      coords = mesh.nodes;
    } else {
      throw std::invalid_argument("one of --grid or --mesh is required");
    }
    out.ell = fs_ell;
    out.seed = seed;
    io::save_field(out, coords, fs_out);
    std::cout << "wrote field with " << out.phi.cols() << " points\n";
  } else if (*se) {
    const auto fitted = io::load_model(se_model);
    const Eigen::MatrixXd phis = io::load_samples(se_phi);
    std::vector<Eigen::VectorXd> list;
    for (Eigen::Index j = 0; j < phis.cols(); ++j) list.push_back(phis.col(j));
    const auto qoi = metrics::qoi_stress_samples(list, fitted.model,
                                                 mech::protocol_from_string(se_proto), se_lambda);
    io::save_column(qoi.col(0), "sigma_xx", se_out);
    std::cout << "wrote " << qoi.rows() << " stress values\n";
  } else if (*ev) {
    const Eigen::VectorXd va = io::load_column(ev_a);
    const Eigen::VectorXd vb = io::load_column(ev_b);
    metrics::SampleSet A = va, B = vb;
    const double d2 = metrics::energy_distance_sq(A, B);
    std::cout << "energy_distance_sq " << d2 << "\n";
    std::cout << "energy_distance " << std::sqrt(std::max(0.0, d2)) << "\n";
    if (ev_gmm > 0) {
      const auto gmm = metrics::gmm_fit_em(A, ev_gmm, seed);
      auto gs = metrics::gmm_sample(gmm, static_cast<int>(B.rows()), rng);
      std::cout << "gmm_energy_distance_sq " << metrics::energy_distance_sq(gs, B) << "\n";
    }
    if (!ev_kde.empty()) {
      const double lo = va.minCoeff(), hi = va.maxCoeff(), pad = 0.25 * (hi - lo);
      Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(256, lo - pad, hi + pad);
      const Eigen::VectorXd dens = metrics::kde_pdf(A, grid);
      std::ostringstream os;
      os << "x,density\n";
      for (int i = 0; i < grid.size(); ++i) os << grid[i] << ',' << dens[i] << "\n";
      io::write_file_atomic(ev_kde, os.str());
    }
  } else if (*eig) {
    const auto comma = eg_mesh.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("--mesh expects nodes.txt,tris.txt");
    const auto mesh = io::load_mesh(eg_mesh.substr(0, comma), eg_mesh.substr(comma + 1));
    const auto basis = fields::laplace_eigenbasis(mesh, std::min(eg_neig, mesh.n_nodes()));
    io::save_eigenbasis(basis, eg_out);
    std::cout << "wrote " << basis.eigenvalues.size() << " eigenpairs\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}

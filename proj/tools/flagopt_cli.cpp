// Command-line driver: load an FCIDUMP, build a guess, run one of the
// Riemannian solvers and report the result. Exit codes: 0 converged,
// 1 not converged within the budget, 2 usage/input error.

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "flagopt/flagopt.hpp"

using namespace flagopt;

namespace {

FlagPoint guess_from_file(const std::string& path, const FlagShape& shape) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open guess file " + path);
  const int n = shape.n_basis;
  Matrix C(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(in >> C(i, j)))
        throw std::runtime_error("guess file " + path + " does not hold a " +
                                 std::to_string(n) + "x" + std::to_string(n) + " matrix");
  // Polar re-orthogonalization tolerates lightly drifted external orbitals.
  Eigen::JacobiSVD<Matrix> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix Q = svd.matrixU() * svd.matrixV().transpose();
  const double correction = (C - Q).norm();
  if (correction > 1e-6)
    std::cerr << "warning: guess orbitals were re-orthogonalized (correction "
              << correction << ")\n";
  return FlagPoint(shape, std::move(Q));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian ROHF orbital optimizer on the flag manifold"};

  std::string fcidump_path, guess_file, trace_path;
  int n_internal = -1, n_active = -1;
  std::string method = "rcg", beta = "pr", restart = "dynamic", precond = "none";
  std::string guess = "core", output = "text";
  int memory = 8, max_iterations = 1000;
  double tolerance = 1e-5, fixed_restart_threshold = 0.5;
  unsigned long long seed = 0;

  app.add_option("fcidump", fcidump_path, "FCIDUMP integral file")->required();
  app.add_option("--n-internal", n_internal,
                 "doubly occupied orbitals (default: (NELEC-MS2)/2 from the header)");
  app.add_option("--n-active", n_active, "singly occupied orbitals (default: MS2)");
  app.add_option("--method", method, "rsd | rcg | rlbfgs")
      ->check(CLI::IsMember({"rsd", "rcg", "rlbfgs"}));
  app.add_option("--beta", beta, "CG update: fr | pr | hs")
      ->check(CLI::IsMember({"fr", "pr", "hs"}));
  app.add_option("--memory", memory, "L-BFGS history depth")->check(CLI::NonNegativeNumber);
  app.add_option("--restart", restart, "L-BFGS restart strategy: dynamic | fixed")
      ->check(CLI::IsMember({"dynamic", "fixed"}));
  app.add_option("--fixed-restart-threshold", fixed_restart_threshold,
                 "relative deviation triggering a fixed-mode restart");
  app.add_option("--preconditioner", precond, "none | sylvester")
      ->check(CLI::IsMember({"none", "sylvester"}));
  app.add_option("--tolerance", tolerance, "gradient-norm convergence threshold");
  app.add_option("--max-iterations", max_iterations, "iteration budget");
  app.add_option("--guess", guess, "core | random | file")
      ->check(CLI::IsMember({"core", "random", "file"}));
  app.add_option("--guess-file", guess_file, "orbital matrix for --guess file");
  app.add_option("--seed", seed, "seed for --guess random");
  app.add_option("--trace", trace_path, "write the per-iteration trace to this file");
  app.add_option("--output", output, "summary style: text | structured")
      ->check(CLI::IsMember({"text", "structured"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    std::ifstream in(fcidump_path);
    if (!in) {
      std::cerr << "error: cannot open " << fcidump_path << "\n";
      return 2;
    }
    const rohf::IntegralSet ints = rohf::parse_fcidump(
        in, [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; });

    if (n_active < 0) n_active = ints.metadata.ms2;
    if (n_internal < 0) {
      if (ints.metadata.nelec < n_active || (ints.metadata.nelec - n_active) % 2 != 0) {
        std::cerr << "error: cannot infer --n-internal from NELEC=" << ints.metadata.nelec
                  << " and MS2=" << ints.metadata.ms2 << "\n";
        return 2;
      }
      n_internal = (ints.metadata.nelec - n_active) / 2;
    }
    if (n_internal + n_active > ints.n_orb() || n_internal + n_active < 1 ||
        n_internal < 0 || n_active < 0) {
      std::cerr << "error: occupation (" << n_internal << "," << n_active
                << ") inconsistent with NORB=" << ints.n_orb() << "\n";
      return 2;
    }
    const FlagShape shape(ints.n_orb(), n_internal, n_active);
    if (shape.n_electrons() != ints.metadata.nelec)
      std::cerr << "warning: occupation implies " << shape.n_electrons()
                << " electrons but the header says NELEC=" << ints.metadata.nelec << "\n";

    FlagPoint x0;
    if (guess == "core") {
      x0 = rohf::core_guess(ints, shape);
    } else if (guess == "random") {
      x0 = random_point(shape, seed);
    } else {
      if (guess_file.empty()) {
        std::cerr << "error: --guess file requires --guess-file\n";
        return 2;
      }
      x0 = guess_from_file(guess_file, shape);
    }

    opt::MethodConfig cfg;
    cfg.method = method == "rsd"   ? opt::Method::RSD
                 : method == "rcg" ? opt::Method::RCG
                                   : opt::Method::RLBFGS;
    cfg.beta_variant = beta == "fr"   ? opt::BetaVariant::FletcherReeves
                       : beta == "hs" ? opt::BetaVariant::HestenesStiefel
                                      : opt::BetaVariant::PolakRibiere;
    cfg.memory = memory;
    cfg.restart = restart == "fixed" ? opt::RestartStrategy::Fixed
                                     : opt::RestartStrategy::Dynamic;
    cfg.fixed_restart_threshold = fixed_restart_threshold;
    cfg.use_preconditioner = precond == "sylvester";
    cfg.tolerance = tolerance;
    cfg.max_iterations = max_iterations;

    const opt::Objective obj = rohf::make_objective(ints, shape, cfg.use_preconditioner);

    const auto t_start = std::chrono::steady_clock::now();
    const opt::OptimResult result = opt::solve(obj, x0, cfg);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!trace_path.empty()) {
      std::ofstream out(trace_path);
      if (!out) {
        std::cerr << "error: cannot write trace file " << trace_path << "\n";
        return 2;
      }
      opt::write_trace(out, result.trace);
    }

    const opt::IterationRecord last = result.trace.back();
    char energy_str[64];
    std::snprintf(energy_str, sizeof(energy_str), "%.12f", last.energy);
    if (output == "structured") {
      std::cout << "converged=" << (result.converged ? "true" : "false") << "\n"
                << "final_energy=" << energy_str << "\n"
                << "final_grad_norm=" << opt::format_g17(last.grad_norm) << "\n"
                << "iterations=" << result.iterations << "\n"
                << "method=" << method << "\n"
                << "n_internal=" << n_internal << "\n"
                << "n_active=" << n_active << "\n"
                << "wall_time_s=" << wall_s << "\n";
    } else {
      std::cout << (result.converged ? "converged" : "NOT converged") << " after "
                << result.iterations << " iterations\n"
                << "  final energy    " << energy_str << " Hartree\n"
                << "  gradient norm   " << opt::format_g17(last.grad_norm) << "\n"
                << "  wall time       " << wall_s << " s\n";
      if (!result.message.empty()) std::cout << "  note: " << result.message << "\n";
    }
    return result.converged ? 0 : 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << fcidump_path << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

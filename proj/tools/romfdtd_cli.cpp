// Command-line front end: run, check, compare, radius.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "romfdtd/romfdtd.hpp"

namespace {

using namespace romfdtd;

int exit_code_for(const Error& e) {
  if (is_parse_error(e.code())) return 2;
  if (e.code() == ErrorCode::kPassivity) return 3;
  if (e.code() == ErrorCode::kInstability) return 4;
  return 1;
}

void print_region_summary(const Simulation& sim) {
  for (std::size_t r = 0; r < sim.region_count(); ++r) {
    const RegionInfo& info = sim.region_info(r);
    std::printf("region %zu: full order %d, embedded order %d (q1=%d, q2=%d), ports %d, interface edges %d%s\n", r,
                info.full_order, info.reduced_order, info.q1, info.q2, info.ports, info.interface_edges,
                info.breakdown ? ", Krylov space exhausted" : "");
  }
}

int cmd_run(const std::string& path, const std::string& out, const std::string& spectrum_out, std::size_t probe) {
  const Scenario sc = load_scenario(path);
  Simulation sim(sc);
  std::printf("dt = %.6e s (coarse limit %.6e s, scheme limit %.6e s), %ld steps\n", sim.dt(), sim.coarse_limit(),
              sim.scheme_limit(), sc.steps);
  print_region_summary(sim);
  const RunRecord rec = sim.run();
  write_records(rec, out);
  std::printf("wrote %s\n", out.c_str());
  if (!spectrum_out.empty()) {
    write_spectrum(frequency_response(rec, probe), spectrum_out);
    std::printf("wrote %s\n", spectrum_out.c_str());
  }
  return 0;
}

int cmd_check(const std::string& path) {
  const Scenario sc = load_scenario(path);
  SimulationOptions opt;
  opt.verify_passivity = false;
  Simulation sim(sc, opt);
  std::printf("dt = %.6e s\ncoarse CFL limit = %.6e s\nreference limit = %.6e s\nscheme limit = %.6e s\n", sim.dt(),
              sim.coarse_limit(), sim.reference_limit(), sim.scheme_limit());
  bool pass = sim.dt() <= sim.coarse_limit();
  for (std::size_t r = 0; r < sim.region_count(); ++r) {
    const RegionInfo& info = sim.region_info(r);
    const PassivityReport rep = check_passivity(sim.region_model(r), sim.dt());
    const Eigen::VectorXd s = generalized_singular_values(sim.region_model(r));
    std::printf("region %zu: order %d -> %d, fine CFL %.6e s, model limit %.6e s\n", r, info.full_order,
                info.reduced_order, info.fine_cfl, info.model_limit);
    std::printf("  R > 0: %s (min eig %.3e)\n", rep.cond_a ? "pass" : "FAIL", rep.min_eig_r);
    std::printf("  F + F^T >= 0: %s (min eig %.3e)\n", rep.cond_b ? "pass" : "FAIL", rep.min_eig_f);
    std::printf("  B = L S: %s (max residual %.3e)\n", rep.cond_c ? "pass" : "FAIL", rep.max_b_minus_ls);
    std::printf("  largest singular values:");
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(5, s.size()); ++k) std::printf(" %.6e", s[k]);
    std::printf(" (2/dt = %.6e)\n", 2.0 / sim.dt());
    pass = pass && rep.pass();
  }
  std::printf("%s\n", pass ? "all checks pass" : "passivity check failed");
  return pass ? 0 : 3;
}

int cmd_compare(const std::string& path, int refinement, std::size_t probe) {
  const Scenario sc = load_scenario(path);
  Simulation sim(sc);
  const int r = refinement > 0 ? refinement : (sc.regions.empty() ? 1 : sc.regions.front().refinement);
  const RunRecord rec = sim.run();
  const Scenario fine = make_all_fine(sc, r, sim.dt());
  const RunRecord ref = run(fine);
  SpectrumOptions so;
  const Spectrum a = frequency_response(rec, probe, so);
  const Spectrum b = frequency_response(ref, probe, so);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.freq.size(); ++k) {
    const double d = std::abs(a.value[k]) - std::abs(b.value[k]);
    num += d * d;
    den += std::norm(b.value[k]);
  }
  std::printf("relative L2 deviation of |H(f)|: %.4e\n", den > 0.0 ? std::sqrt(num / den) : 0.0);
  const double fmax = a.freq.back();
  const auto pa = find_peaks(a, 0.0, fmax);
  const auto pb = find_peaks(b, 0.0, fmax);
  std::printf("peaks (embedded / all-fine):\n");
  for (double fb : pb) {
    double best = -1.0;
    for (double fa : pa)
      if (best < 0.0 || std::abs(fa - fb) < std::abs(best - fb)) best = fa;
    if (best < 0.0) std::printf("  %.6e Hz: no match\n", fb);
    else std::printf("  %.6e / %.6e Hz (%.3f%%)\n", best, fb, 100.0 * (best - fb) / fb);
  }
  return 0;
}

int cmd_radius(const std::string& path, double factor) {
  const Scenario sc = load_scenario(path);
  SimulationOptions opt;
  opt.verify_passivity = false;
  if (factor > 0.0) {
    Simulation probe_sim(sc, opt);
    opt.dt = factor * probe_sim.scheme_limit();
  }
  Simulation sim(sc, opt);
  const double rho = amplification_spectral_radius(sc, opt);
  std::printf("dt = %.6e s (%.4f x scheme limit), state size %d\nspectral radius = %.15f\n", sim.dt(),
              sim.dt() / sim.scheme_limit(), sim.packed_size(), rho);
  return rho <= 1.0 + 1e-10 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2-D TEz FDTD with embedded reduced-order fine regions"};
  app.require_subcommand(1);

  std::string scenario, out = "records.csv", spectrum_out;
  std::size_t probe = 0;
  int refinement = 0;
  double factor = 0.0;

  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write probe records");
  run_cmd->add_option("scenario", scenario, "scenario file")->required();
  run_cmd->add_option("-o,--output", out, "probe CSV path");
  run_cmd->add_option("--spectrum", spectrum_out, "also write the frequency response of one probe");
  run_cmd->add_option("--probe", probe, "probe index for --spectrum");

  auto* check_cmd = app.add_subcommand("check", "passivity report and CFL limits per region");
  check_cmd->add_option("scenario", scenario, "scenario file")->required();

  auto* cmp_cmd = app.add_subcommand("compare", "compare against an all-fine reference run");
  cmp_cmd->add_option("scenario", scenario, "scenario file")->required();
  cmp_cmd->add_option("--refinement", refinement, "reference refinement (default: first region's)");
  cmp_cmd->add_option("--probe", probe, "probe index");

  auto* rad_cmd = app.add_subcommand("radius", "spectral radius of the one-step operator (small scenes)");
  rad_cmd->add_option("scenario", scenario, "scenario file")->required();
  rad_cmd->add_option("--factor", factor, "time step as a multiple of the scheme limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return cmd_run(scenario, out, spectrum_out, probe);
    if (*check_cmd) return cmd_check(scenario);
    if (*cmp_cmd) return cmd_compare(scenario, refinement, probe);
    if (*rad_cmd) return cmd_radius(scenario, factor);
  } catch (const Error& e) {
    std::cerr << "error " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

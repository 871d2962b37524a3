// Command-line front end: simulate, sweeps, validation and reference solves.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agdiff/agdiff.hpp"

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    try {
      std::size_t pos = 0;
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(std::stod(item, &pos));
      } else {
        const long long v = std::stoll(item, &pos);
        if (v <= 0) throw std::invalid_argument(item);
        out.push_back(static_cast<T>(v));
      }
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw agdiff::Error(std::string("cannot parse ") + what + " entry `" + item + "`");
    }
  }
  if (out.empty()) throw agdiff::Error(std::string("empty ") + what + " list");
  return out;
}

std::filesystem::path output_dir(const agdiff::RunConfig& cfg, const std::string& override_dir) {
  return override_dir.empty() ? std::filesystem::path(cfg.outputs_dir) : std::filesystem::path(override_dir);
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle approximation of 1D aggregation-diffusion on a torus"};
  app.require_subcommand(1);
  std::string config, out_dir, n_list = "64,128,256,512", l_list = "8,16,32", eps_list = "1e-1,1e-2,1e-3";
  std::size_t oracle_m = 0, fv_m = 0; // 0: oracle.cells from the config

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "run configuration (flat key = value or JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (default: outputs.dir)");
  };
  auto* simulate = app.add_subcommand("simulate", "evolve one configuration and write diagnostics");
  add_common(simulate);
  auto* sweep_n = app.add_subcommand("sweep-n", "particle-number convergence against the finite-volume oracle");
  add_common(sweep_n);
  sweep_n->add_option("--n", n_list, "increasing particle counts");
  sweep_n->add_option("--oracle-m", oracle_m, "oracle cell count (default: oracle.cells)");
  auto* sweep_domain = app.add_subcommand("sweep-domain", "domain-growth consistency at fixed N/L");
  add_common(sweep_domain);
  sweep_domain->add_option("--l", l_list, "increasing torus lengths");
  auto* sweep_pos = app.add_subcommand("sweep-positivity", "vacuum-floor consistency");
  add_common(sweep_pos);
  sweep_pos->add_option("--eps", eps_list, "decreasing vacuum floors");
  auto* validate = app.add_subcommand("validate", "check kernel/nonlinearity assumptions and inequalities");
  add_common(validate);
  auto* oracle = app.add_subcommand("oracle", "finite-volume reference snapshots");
  add_common(oracle);
  oracle->add_option("--m", fv_m, "cell count (default: oracle.cells)");

  CLI11_PARSE(app, argc, argv);

  try {
    const agdiff::RunConfig cfg = agdiff::parse_config(config);
    const auto dir = output_dir(cfg, out_dir);

    if (*simulate) return agdiff::run_simulate(cfg, dir);

    if (*sweep_n) {
      const auto r = agdiff::sweep_n(cfg, parse_list<std::size_t>(n_list, "--n"),
                                     oracle_m ? oracle_m : cfg.oracle_cells);
      agdiff::write_file_atomic(dir / "sweep_n.csv", agdiff::sweep_n_csv(r));
      print_warnings(r.warnings);
      std::cout << agdiff::sweep_n_csv(r);
      if (!r.monotone) std::cerr << "space-time L1 errors are not monotone in N (10% slack)\n";
      return r.monotone ? 0 : 1;
    }

    if (*sweep_domain) {
      const auto r = agdiff::sweep_domain(cfg, parse_list<double>(l_list, "--l"));
      agdiff::write_file_atomic(dir / "sweep_domain.csv", agdiff::chain_csv(r, "L"));
      print_warnings(r.warnings);
      std::cout << agdiff::chain_csv(r, "L");
      return r.decreasing ? 0 : 1;
    }

    if (*sweep_pos) {
      const auto r = agdiff::sweep_positivity(cfg, parse_list<double>(eps_list, "--eps"));
      agdiff::write_file_atomic(dir / "sweep_positivity.csv", agdiff::chain_csv(r, "eps"));
      print_warnings(r.warnings);
      std::cout << agdiff::chain_csv(r, "eps");
      return r.decreasing ? 0 : 1;
    }

    if (*validate) {
      const auto r = agdiff::run_validate(cfg);
      agdiff::print_report(std::cout, "kernel", r.kernel);
      agdiff::print_report(std::cout, "nonlinearity", r.nonlinearity);
      std::cout << "inequalities: " << r.violations << " violations over " << r.states << " random states\n";
      print_warnings(r.warnings);
      return r.exit_code;
    }

    if (*oracle) {
      const auto r = agdiff::run_oracle(cfg, fv_m ? fv_m : cfg.oracle_cells);
      agdiff::write_reference(dir / "oracle", r.fv.snapshots);
      std::ostringstream os;
      os << "t,mass,min_value\n";
      for (const auto& s : r.fv.snapshots)
        os << agdiff::format_double(s.t) << ',' << agdiff::format_double(s.density.mass()) << ','
           << agdiff::format_double(*std::min_element(s.density.values.begin(), s.density.values.end())) << '\n';
      agdiff::write_file_atomic(dir / "oracle" / "mass.csv", os.str());
      if (!r.barenblatt_errors.empty()) {
        std::ostringstream es;
        es << "t,l1_error\n";
        for (const auto& e : r.barenblatt_errors)
          es << agdiff::format_double(e.t) << ',' << agdiff::format_double(e.l1) << '\n';
        agdiff::write_file_atomic(dir / "oracle" / "barenblatt_errors.csv", es.str());
        std::cout << es.str();
      }
      std::cout << "steps: " << r.fv.steps << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

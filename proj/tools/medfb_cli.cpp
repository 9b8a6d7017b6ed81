// Command-line front end: capacity, simulate, sweep, lowerbound.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medfb/medfb.hpp"

namespace {

using namespace medfb;

std::vector<double> parse_list(const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == ',' || c == '(' || c == ')') c = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw std::invalid_argument("cannot parse number list '" + text + "'");
  return out;
}

void print_row(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_real(v[i]);
  os << '\n';
}

int cmd_capacity(const std::string& spec, double tol) {
  const auto theta = load_policies(spec);
  if (auto w = theta.coverage_warning()) std::cerr << "warning: " << *w << '\n';
  ChiCapacityOptions opt;
  opt.tol = tol;
  const auto chi = chi_capacity(theta, opt);
  const auto kl = kl_capacity(theta);
  std::cout << format_real(chi.lower) << ' ' << format_real(chi.upper) << ' '
            << (chi.certified_exact ? "true" : "false") << ' ' << format_real(kl.value) << '\n';
  return 0;
}

int cmd_simulate(const std::string& path, const std::string& output_dir) {
  auto parsed = parse_config_file(path);
  if (!parsed.sweep.empty())
    throw std::invalid_argument("simulate: config has a [sweep] section; use the sweep command");
  if (!output_dir.empty()) parsed.base.output_dir = output_dir;
  const auto res = run_experiment(parsed.base);
  const auto paths = write_outputs(res);
  write_summary_csv(std::cout, res.summary);
  std::cerr << "trace: " << paths.trace.string() << '\n';
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& output_dir) {
  auto parsed = parse_config_file(path);
  if (!output_dir.empty()) parsed.base.output_dir = output_dir;
  const auto res = run_sweep(parsed);
  for (const auto& s : res.summaries) write_summary_row(std::cout, s);
  return 0;
}

void print_instance(const LowerBoundInstance& inst, std::size_t max_envs) {
  std::cout << "gap " << format_real(inst.gap) << "\nconstant_c " << format_real(inst.constant_c)
            << "\nfeedback " << to_string(inst.feedback) << '\n';
  if (inst.feedback == FeedbackMode::linear)
    std::cout << "sigma " << format_real(inst.sigma) << "\nclipped "
              << (inst.clipped ? "true" : "false") << '\n';
  std::cout << "# policies\n";
  write_policy_set(std::cout, inst.policy_set);
  const std::size_t shown = std::min(inst.num_environments, max_envs);
  std::cout << "# environments (row 1 is the all-1/2 reference)\n"
            << shown << ' ' << inst.policy_set.num_outcomes() << '\n';
  for (std::size_t i = 0; i < shown; ++i) print_row(std::cout, inst.environment(i));
  if (shown < inst.num_environments)
    std::cout << "# " << inst.num_environments - shown << " more environments not shown\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mediator-feedback bandits: capacity, simulation, lower-bound instances"};
  app.require_subcommand(1);

  auto* cap = app.add_subcommand("capacity", "Print 'chi_lower chi_upper certified kl_value'");
  std::string policies;
  double tol = 1e-6;
  cap->add_option("--policies", policies, "Policy matrix file or family spec, e.g. epsilon_greedy(4,0.5)")
      ->required();
  cap->add_option("--tol", tol, "Certification tolerance for the chi-squared bracket");

  auto* sim = app.add_subcommand("simulate", "Run one experiment from a config file");
  std::string config, output_dir;
  sim->add_option("--config", config, "Experiment config file")->required();
  sim->add_option("--output-dir", output_dir, "Override experiment.output_dir");

  auto* sweep = app.add_subcommand("sweep", "Run the grid described by a config's [sweep] section");
  sweep->add_option("--config", config, "Experiment config file")->required();
  sweep->add_option("--output-dir", output_dir, "Override experiment.output_dir");

  auto* lb = app.add_subcommand("lowerbound", "Print a lower-bound construction");
  std::string family, p_text, q_text;
  std::size_t horizon = 1000, n = 2, m = 1, q = 2, max_envs = 64;
  double epsilon = 0.5, sigma = 1.0;
  bool unclipped = false;
  lb->add_option("--family", family, "two | eps | multitask | linear")
      ->required()
      ->check(CLI::IsMember({"two", "eps", "multitask", "linear"}));
  lb->add_option("--horizon,-T", horizon, "Horizon T");
  lb->add_option("--p", p_text, "First policy (two), comma separated");
  lb->add_option("--q-policy", q_text, "Second policy (two), comma separated");
  lb->add_option("--n", n, "Number of policies (eps, linear)");
  lb->add_option("--epsilon", epsilon, "Exploration level (eps, linear)");
  lb->add_option("--m", m, "Number of sections (multitask)");
  lb->add_option("--q", q, "Arms per section (multitask)");
  lb->add_option("--sigma", sigma, "Noise level (linear, unclipped only)");
  lb->add_flag("--unclipped", unclipped, "Unclipped Gaussian variant (linear)");
  lb->add_option("--max-envs", max_envs, "Maximum number of environments printed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cap) return cmd_capacity(policies, tol);
    if (*sim) return cmd_simulate(config, output_dir);
    if (*sweep) return cmd_sweep(config, output_dir);
    if (*lb) {
      LowerBoundInstance inst;
      if (family == "two") {
        if (p_text.empty() || q_text.empty())
          throw std::invalid_argument("lowerbound two: --p and --q-policy are required");
        inst = lb_two_policy(Distribution(parse_list(p_text)), Distribution(parse_list(q_text)),
                             horizon);
      } else if (family == "eps") {
        inst = lb_epsilon_greedy(n, epsilon, horizon);
      } else if (family == "multitask") {
        inst = lb_multitask(m, q, horizon);
      } else {
        inst = lb_linear_gaussian(n, epsilon, horizon, !unclipped, sigma);
      }
      print_instance(inst, max_envs);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// rtlm: offline profiling, simulation runs, policy comparison and reports.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <rtlm/cli.hpp>

namespace {

using rtlm::cli::Json;

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> trace, profile, policy, beta_schedule, variance, out, sweep;
  std::optional<double> alpha, lambda, b, k, xi, malicious_ratio, horizon;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policies, seeds;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--set", f.sets, "override any config key, e.g. --set sim.cpu_lanes=8");
  cmd->add_option("--trace", f.trace, "trace file (trace)");
  cmd->add_option("--profile", f.profile, "profile file (profile)");
  cmd->add_option("--policy", f.policy, "FIFO, EDF, LUF, MUF, SLACK or UP (scheduler.policy)");
  cmd->add_option("--alpha", f.alpha, "uncertainty weight (scheduler.alpha)");
  cmd->add_option("--lambda", f.lambda, "consolidation ratio bound (scheduler.lambda)");
  cmd->add_option("--b", f.b, "staging multiplier (scheduler.b)");
  cmd->add_option("--k", f.k, "offload quantile (scheduler.k)");
  cmd->add_option("--beta-schedule", f.beta_schedule, "arrivals per minute: 60, 10,20 or 10:150:10 (workload.beta_schedule)");
  cmd->add_option("--xi", f.xi, "arrival wait interval in seconds (workload.xi)");
  cmd->add_option("--malicious-ratio", f.malicious_ratio, "fraction of inflated tasks (workload.malicious_ratio)");
  cmd->add_option("--variance", f.variance, "small, normal or large (workload.variance)")
      ->check(CLI::IsMember({"small", "normal", "large", "all"}));
  cmd->add_option("--horizon", f.horizon, "simulation stop time in seconds (sim.horizon)");
  cmd->add_option("--seed", f.seed, "root seed (seed)");
  cmd->add_option("--out", f.out, "output directory (out)");
}

Json build_config(const CommonFlags& f) {
  Json cfg = f.config.empty() ? rtlm::cli::default_config() : rtlm::cli::load_config(f.config);
  auto put = [&](const char* key, const auto& v) {
    if (v) rtlm::cli::set_path(cfg, key, *v);
  };
  put("trace", f.trace);
  put("profile", f.profile);
  put("scheduler.policy", f.policy);
  put("scheduler.alpha", f.alpha);
  put("scheduler.lambda", f.lambda);
  put("scheduler.b", f.b);
  put("scheduler.k", f.k);
  put("workload.beta_schedule", f.beta_schedule);
  put("workload.xi", f.xi);
  put("workload.malicious_ratio", f.malicious_ratio);
  put("workload.variance", f.variance);
  put("sim.horizon", f.horizon);
  put("seed", f.seed);
  put("out", f.out);
  put("sweep", f.sweep);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(tok);
    }
    return out;
  };
  if (f.policies) rtlm::cli::set_path(cfg, "compare.policies", split(*f.policies));
  if (f.seeds) {
    Json seeds = Json::array();
    for (const auto& s : split(*f.seeds)) seeds.push_back(rtlm::cli::parse_value(s));
    rtlm::cli::set_path(cfg, "compare.seeds", seeds);
  }
  for (const auto& s : f.sets) rtlm::cli::apply_assignment(cfg, s);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware LM inference scheduling simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, cmp_flags;
  auto* run = app.add_subcommand("run", "simulate one configuration");
  add_common(run, run_flags);

  auto* cmp = app.add_subcommand("compare", "compare policies across seeds, optionally sweeping a parameter");
  add_common(cmp, cmp_flags);
  cmp->add_option("--policies", cmp_flags.policies, "comma-separated policies (compare.policies)");
  cmp->add_option("--seeds", cmp_flags.seeds, "comma-separated seeds (compare.seeds)");
  cmp->add_option("--sweep", cmp_flags.sweep, "param:lo:hi:step, e.g. alpha:0:2:0.1 (sweep)");

  rtlm::cli::ProfileArgs prof;
  std::string hidden;
  auto* pro = app.add_subcommand("profile", "train the length estimator and write a profile");
  bool reference_only = false;
  pro->add_option("--trace", prof.trace, "training trace (JSON lines)");
  pro->add_flag("--reference", reference_only, "write the untrained reference calibration of --model");
  pro->add_option("--model", prof.model, "reference LM calibration")
      ->check(CLI::IsMember({"dialogpt", "blenderbot", "bart", "t5"}));
  pro->add_option("--k", prof.k, "offload quantile");
  pro->add_option("--seed", prof.seed, "training seed");
  pro->add_option("--epochs", prof.epochs, "training epochs");
  pro->add_option("--lr", prof.learning_rate, "learning rate");
  pro->add_option("--batch-size", prof.batch_size, "mini-batch size");
  pro->add_option("--hidden", hidden, "hidden layer sizes, e.g. 100,200,200,100");
  pro->add_flag("--with-input-length", prof.include_input_length, "add input length as a seventh feature");
  pro->add_option("--out", prof.out, "profile output path");

  std::string log_path;
  auto* rep = app.add_subcommand("report", "recompute metrics from a per-task log");
  rep->add_option("log", log_path, "tasks.csv written by run")->required();

  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 1, synth_first = 0;
  std::string synth_out;
  auto* syn = app.add_subcommand("synth", "write a synthetic trace");
  syn->add_option("--n", synth_n, "number of records");
  syn->add_option("--seed", synth_seed, "generator seed");
  syn->add_option("--first-id", synth_first, "id of the first record");
  syn->add_option("--out", synth_out, "output path (JSON lines)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? rtlm::cli::kExitOk : rtlm::cli::kExitConfig;
  }

  try {
    if (*run) {
      rtlm::cli::cmd_run(build_config(run_flags), std::cout);
    } else if (*cmp) {
      rtlm::cli::cmd_compare(build_config(cmp_flags), std::cout);
    } else if (*pro) {
      if (reference_only) {
        auto a = rtlm::reference_profile(prof.model);
        rtlm::save_profile(a, prof.out);
        std::cout << "wrote reference profile " << prof.model << " to " << prof.out << "\n";
        return rtlm::cli::kExitOk;
      }
      if (prof.trace.empty()) throw rtlm::ConfigError("profile needs --trace (or --reference)");
      if (!hidden.empty()) {
        prof.hidden.clear();
        std::stringstream ss(hidden);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          try {
            prof.hidden.push_back(std::stoi(tok));
          } catch (const std::exception&) {
            throw rtlm::ConfigError("bad --hidden value '" + hidden + "'");
          }
        }
      }
      rtlm::cli::cmd_profile(prof, std::cout);
    } else if (*rep) {
      rtlm::cli::cmd_report(log_path, std::cout);
    } else if (*syn) {
      rtlm::workload::save_trace(rtlm::synth::synthesize_trace(synth_n, synth_seed, {}, synth_first), synth_out);
      std::cout << "wrote " << synth_n << " records to " << synth_out << "\n";
    }
  } catch (const rtlm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rtlm::cli::kExitConfig;
  } catch (const rtlm::EstimatorMissing& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rtlm::cli::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rtlm::cli::kExitRuntime;
  }
  return rtlm::cli::kExitOk;
}

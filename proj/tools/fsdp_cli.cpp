#include <iostream>

#include "CLI11.hpp"
#include "fsdp/commands.hpp"

int main(int argc, char** argv) {
  using namespace fsdp;
  CLI::App app{"Overtaking planner simulation and benchmarks"};
  app.require_subcommand(1);
  CommandOptions opt;
  std::string out, buffer;
  int seeds = 0;
  std::vector<std::string> smax;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "scenario YAML file")->required();
    sub->add_option("--out", out, "output directory (overrides FSDP_OUT_DIR and the scenario)");
  };
  CLI::App* run = app.add_subcommand("run", "run seeded episodes and write logs and metrics");
  common(run);
  run->add_option("--seeds", seeds, "number of episodes")->check(CLI::PositiveNumber);
  CLI::App* sweep = app.add_subcommand("sweep", "success rate against the speed scaler");
  common(sweep);
  sweep->add_option("--seeds", seeds, "episodes per speed scaler")->check(CLI::PositiveNumber);
  sweep->add_option("--smax", smax, "comma-separated speed scalers")->delimiter(',')->required();
  CLI::App* bench = app.add_subcommand("predict-bench", "dense GP vs sparse GP timing and RMSE");
  common(bench);
  bench->add_option("--m", opt.m, "comma-separated inducing point counts")->delimiter(',');
  bench->add_option("--buffer", buffer, "recorded buffer snapshot (JSON)");
  CLI::App* validate = app.add_subcommand("validate-config", "check a scenario file");
  validate->add_option("--scenario", opt.scenario, "scenario YAML file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (!out.empty()) opt.out = out;
  if (!buffer.empty()) opt.buffer = buffer;
  if (seeds > 0) opt.seeds = seeds;
  for (const auto& s : smax) {
    double v = 0.0;
    if (s.empty() || !CLI::detail::lexical_cast(s, v)) {
      std::cerr << "--smax: '" << s << "' is not a number\n";
      return kExitConfig;
    }
    opt.smax.push_back(v);
  }

  if (run->parsed()) return cmd_run(opt, std::cout);
  if (sweep->parsed()) return cmd_sweep(opt, std::cout);
  if (bench->parsed()) return cmd_predict_bench(opt, std::cout);
  return cmd_validate_config(opt, std::cout);
}

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mpmfg/experiment.hpp"
#include "../tests/acceptance/acceptance.hpp"

namespace {

int run_config(mpmfg::ExperimentConfig cfg, const std::optional< std::string >& out, std::optional< std::uint64_t > seed,
               std::optional< std::size_t > threads)
{
   if(seed) cfg.seed = *seed;
   if(threads) {
      if(*threads < 1) throw mpmfg::ConfigError("threads", "must be >= 1");
      cfg.threads = *threads;
   }
   const auto dir = mpmfg::resolve_output_dir(cfg, out);
   const auto result = mpmfg::run(cfg, dir);
   std::cout << "wrote " << dir.string() << " (converged: " << (result.converged ? "yes" : "no") << ")\n";
   return 0;
}

void report(const mpmfg::ConfigError& e)
{
   std::cerr << e.to_json().dump() << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
   CLI::App app{"Multi-population mean-field game solvers and learners"};
   app.require_subcommand(1);

   std::string config_path;
   std::optional< std::string > out;
   std::optional< std::uint64_t > seed;
   std::optional< std::size_t > threads;
   auto* run = app.add_subcommand("run", "Run an experiment from a JSON configuration");
   run->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
   run->add_option("--out", out, "output directory (default: $MPMFG_OUT, then ./mpmfg_out)");
   run->add_option("--seed", seed, "override the configured seed");
   run->add_option("--threads", threads, "worker threads; results do not depend on it");

   auto* exact = app.add_subcommand("epidemic-exact", "Exact solver on the epidemic benchmark with default settings");
   exact->add_option("--out", out, "output directory");
   exact->add_option("--threads", threads, "worker threads");

   std::vector< int > only;
   auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
   verify->add_option("--only", only, "run only these criteria (1-10)")->check(CLI::Range(1, 10));

   CLI11_PARSE(app, argc, argv);

   try {
      if(*run) return run_config(mpmfg::load_config(config_path), out, seed, threads);
      if(*exact) {
         mpmfg::ExperimentConfig cfg;
         cfg.mode = mpmfg::RunMode::exact;
         return run_config(cfg, out, std::nullopt, threads);
      }
      if(*verify) return mpmfg::acceptance::run_suite(only, std::cout);
   } catch(const mpmfg::ConfigError& e) {
      report(e);
      return 2;
   } catch(const std::exception& e) {
      std::cerr << mpmfg::json{{"error", {{"field", nullptr}, {"message", e.what()}}}}.dump() << '\n';
      return 1;
   }
   return 0;
}

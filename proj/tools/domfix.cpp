// Command line front end. Flag parsing only; the command logic lives in the
// headers so the tests can drive it in-process.

#include <iostream>

#include <CLI11.hpp>

#include "domfix/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"workbench for recursive domain equations over finite posets"};
  app.require_subcommand(1);

  domfix::cli::RunConfig cfg;

  auto add_shared = [&cfg](CLI::App* cmd) {
    cmd->add_option("--rank", cfg.rank, "truncation rank / verification bound")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "seed for randomized batteries")->capture_default_str();
  };

  CLI::App* solve = app.add_subcommand("solve", "solve declarations, report compacts per rank");
  solve->add_option("inputs", cfg.inputs, "declaration files");
  add_shared(solve);
  solve->add_option("--format", cfg.format, "text, json, or dot")->capture_default_str();
  solve->add_option("--type", cfg.type_name, "restrict output to one declaration");

  CLI::App* check = app.add_subcommand("check", "run law batteries, exit 2 on any failure");
  check->add_option("inputs", cfg.inputs, "declaration files");
  add_shared(check);
  check->add_option("--format", cfg.format, "text or json")->capture_default_str();
  check->add_option("--suite", cfg.suites, "session, substitution, unfolding");
  check->add_option("--builtin", cfg.builtins,
                    "conway, eplaws, colimit, parameter, iterate, all");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) return domfix::cli::cmd_solve(cfg, std::cout, std::cerr);
  return domfix::cli::cmd_check(cfg, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rpn/cli_ops.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rpnaug: embedding-space data augmentation toolkit"};
  app.require_subcommand(1);

  rpn::CliInvocation invocation;
  std::string config_path;
  std::string output_dir = ".";

  const auto add = [&](const std::string& name, const std::string& description) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("-c,--config", config_path, "key=value config file");
    sub->add_option("-o,--out", output_dir, "output directory")
        ->default_str(output_dir);
    sub->add_option("overrides", invocation.overrides,
                    "key=value overrides, applied after the config file");
    return sub;
  };

  add("train", "train a model and write metrics, checkpoint and config echo");
  add("eval", "evaluate a checkpoint on one split");
  add("augment", "run the noising chain over a tensor dump and trace it");
  add("grid", "epsilon x steps search, dev-accuracy summary");
  add("bench", "augmentation throughput scaling report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rpn::kExitUsage;
  }

  invocation.subcommand = app.get_subcommands().front()->get_name();
  invocation.config_path = config_path;
  invocation.output_dir = output_dir;
  return rpn::run_cli(invocation, std::cout, std::cerr);
}

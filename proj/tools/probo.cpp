#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probo/cli.hpp"

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// "a=1,b=2" -> {a:"1", b:"2"}
std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> out;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("expected key=value, got '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  namespace pc = probo::cli;

  CLI::App app{"probo: reproducibility ledger with escrowed verification"};
  app.require_subcommand(1);

  pc::Paths paths;
  std::optional<probo::Timestamp> now;
  std::string config_file;
  app.add_option("--chain", paths.chain, "Chain file (JSON Lines)");
  app.add_option("--bank", paths.bank, "Bank state file (JSON)");
  app.add_option("--config", config_file, "Network config JSON used by init");
  app.add_option("--now", now, "Fixed timestamp (Unix seconds) instead of the wall clock");

  // init
  auto* init = app.add_subcommand("init", "Create the genesis block and bank");
  pc::InitOptions init_opts;
  std::string nodes_arg, alloc_arg, affiliations_arg;
  std::optional<probo::Probos> equal;
  init->add_option("--nodes", nodes_arg, "Comma-separated node ids");
  init->add_option("--equal", equal, "Equal initial allocation per node");
  init->add_option("--alloc", alloc_arg, "Explicit allocation id=probos,...");
  init->add_option("--affiliations", affiliations_arg, "Institution per node id=inst,...");
  init->add_option("--min-deposit", init_opts.min_deposit);
  init->add_option("--verifier-reward", init_opts.verifier_reward);
  init->add_option("--min-reports", init_opts.min_reports);
  init->add_option("--accept-threshold", init_opts.accept_threshold, "e.g. 2/3 or 0.5");
  init->add_option("--horizon-hours", init_opts.horizon_hours);
  init->add_flag("--force", init_opts.force, "Overwrite existing files");

  // submit
  auto* submit = app.add_subcommand("submit", "Submit a study with its output commitment and deposit");
  std::string descriptor_file, outputs_file;
  std::optional<probo::Probos> deposit;
  submit->add_option("descriptor", descriptor_file)->required();
  submit->add_option("outputs", outputs_file)->required();
  submit->add_option("--deposit", deposit, "Deposit in probos (default: min_deposit)");

  // verify
  auto* verify = app.add_subcommand("verify", "File a verifier report");
  std::string request_id, verifier, verifier_outputs;
  verify->add_option("request_id", request_id)->required();
  verify->add_option("verifier", verifier)->required();
  verify->add_option("outputs", verifier_outputs)->required();

  // tick
  auto* tick = app.add_subcommand("tick", "Advance time and expire overdue requests");
  probo::Timestamp new_now = 0;
  tick->add_option("new_now", new_now, "New current time (Unix seconds)")->required();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Validate the chain and print blocks");
  pc::InspectSelector selector;
  inspect->add_option("--block", selector.block);
  inspect->add_option("--request", selector.request_id);

  // rank
  auto* rank = app.add_subcommand("rank", "Print the reputation ranking as CSV");
  probo::ReputationWeights weights;
  bool institutions = false;
  rank->add_option("--w-accept", weights.w_accept);
  rank->add_option("--w-verify", weights.w_verify);
  rank->add_option("--w-reject", weights.w_reject);
  rank->add_flag("--institutions", institutions, "Aggregate by affiliation");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
  std::string scenario_file, out_dir;
  simulate->add_option("scenario", scenario_file)->required();
  simulate->add_option("out_dir", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pc::kEnvFailure;
  }

  const pc::Clock clock{now};
  auto& out = std::cout;
  auto& err = std::cerr;

  if (*init) {
    try {
      init_opts.nodes = split(nodes_arg, ',');
      init_opts.equal = equal;
      for (const auto& [id, v] : parse_pairs(alloc_arg)) init_opts.allocation[id] = std::stoll(v);
      init_opts.affiliations = parse_pairs(affiliations_arg);
    } catch (const std::exception& e) {
      err << "invalid allocation: " << e.what() << "\n";
      return pc::kEnvFailure;
    }
    if (!config_file.empty()) init_opts.config_file = config_file;
    return pc::cmd_init(paths, clock, init_opts, out, err);
  }
  if (*submit) return pc::cmd_submit(paths, clock, descriptor_file, outputs_file, deposit, out, err);
  if (*verify) return pc::cmd_verify(paths, clock, request_id, verifier, verifier_outputs, out, err);
  if (*tick) return pc::cmd_tick(paths, new_now, out, err);
  if (*inspect) return pc::cmd_inspect(paths, selector, out, err);
  if (*rank) return pc::cmd_rank(paths, weights, institutions, out, err);
  if (*simulate) return pc::cmd_simulate(scenario_file, out_dir, out, err);
  return pc::kEnvFailure;
}

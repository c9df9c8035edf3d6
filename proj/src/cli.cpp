#include "wsfl/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "wsfl/config_file.hpp"
#include "wsfl/nas_search.hpp"

namespace wsfl {

namespace {

namespace fs = std::filesystem;

std::string num_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  long seed = -1;  // -1 = take the config's seed
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--seed", args.seed, "master seed (overrides the config)");
  cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
  cmd->add_option("--out", args.out_dir, "output directory");
}

FullConfig load(const CommonArgs& args) {
  FullConfig cfg = load_config(args.config_path, args.overrides);
  if (args.seed >= 0) cfg.exp.seed = static_cast<std::uint64_t>(args.seed);
  return cfg;
}

std::ofstream open_out(const CommonArgs& args, const std::string& filename) {
  fs::create_directories(args.out_dir);
  const fs::path path = fs::path(args.out_dir) / filename;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::cout << path.string() << "\n";
  return out;
}

int cmd_train(const CommonArgs& args, const std::string& resume_path) {
  FullConfig cfg = load(args);
  RunResult result;
  if (resume_path.empty()) {
    result = run(cfg.exp);
  } else {
    ServerState state = load_checkpoint(resume_path, cfg.exp.space);
    result = run_from(cfg.exp, std::move(state));
  }
  {
    auto out = open_out(args, "metrics.csv");
    write_metrics_csv(out, result.metrics);
  }
  const fs::path ckpt = fs::path(args.out_dir) / "checkpoint.bin";
  save_checkpoint(ckpt.string(), cfg.exp.space, result.state);
  std::cout << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_path,
             const std::vector<std::string>& arch_texts) {
  FullConfig cfg = load(args);
  const ServerState state = load_checkpoint(ckpt_path, cfg.exp.space);
  std::vector<ArchDescriptor> archs;
  for (const auto& text : arch_texts) archs.push_back(parse_arch(cfg.exp.space, text));
  if (archs.empty()) archs = cfg.exp.eval_archs;
  const Federation fed = build_federation(cfg.exp);
  auto out = open_out(args, "eval.csv");
  out << "arch,test_accuracy,flops,params\n";
  for (const auto& arch : archs)
    out << format_arch(cfg.exp.space, arch) << ','
        << num_text(evaluate(cfg.exp.space, state.weights, arch, fed.data)) << ','
        << flops(cfg.exp.space, arch) << ',' << param_count(cfg.exp.space, arch) << '\n';
  return 0;
}

int cmd_nas(const CommonArgs& args, const std::string& ckpt_path, std::vector<double> budgets) {
  FullConfig cfg = load(args);
  const ServerState state = load_checkpoint(ckpt_path, cfg.exp.space);
  if (budgets.empty()) {
    if (cfg.nas.flops_budget < 1)
      throw std::runtime_error("nas: provide --budget or set [nas] flops_budget");
    budgets.push_back(static_cast<double>(cfg.nas.flops_budget));
  }
  const Federation fed = build_federation(cfg.exp);
  auto out = open_out(args, "nas.csv");
  out << "# fitness: accuracy on the experiment dataset's test split";
  if (cfg.nas.eval_subset_size > 0)
    out << " (seeded subset of " << cfg.nas.eval_subset_size << " rows)";
  out << ", seed " << cfg.exp.seed << "\n";
  out << "constraint,accuracy,flops,descriptor\n";
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    NasConfig nas = cfg.nas;
    nas.flops_budget = static_cast<std::int64_t>(budgets[i]);
    Rng rng(derive_seed(cfg.exp.seed, {0x6e6173ULL, static_cast<std::uint64_t>(i)}));
    const NasResult res = evolve(cfg.exp.space, state.weights, fed.data, nas, rng);
    out << num_text(budgets[i]) << ',' << num_text(res.accuracy) << ',' << res.flops << ','
        << format_arch(cfg.exp.space, res.best) << '\n';
  }
  return 0;
}

CostLedger simulate_plan_costs(const ExperimentConfig& cfg, const Federation& fed) {
  CostLedger ledger(cfg.clients);
  TrackingState tracking = TrackingState::fresh(cfg.clients);
  for (long t = 1; t <= cfg.rounds; ++t) {
    Rng rng(derive_seed(cfg.seed, {0x636f7374ULL, static_cast<std::uint64_t>(t)}));
    std::vector<int> participants = sample_clients(cfg.clients, cfg.participation, rng);
    RoundPlan plan;
    switch (cfg.distribution) {
      case HeuristicKind::random:
        plan = plan_random(cfg.space, t, std::move(participants), rng);
        break;
      case HeuristicKind::sandwich:
        plan = plan_sandwich(cfg.space, t, std::move(participants), rng);
        break;
      case HeuristicKind::tracking_sandwich:
        plan = plan_tracking_sandwich(cfg.space, t, std::move(participants), tracking, rng);
        break;
      case HeuristicKind::largest_only:
        plan = plan_largest_only(cfg.space, t, std::move(participants));
        break;
    }
    ledger.record_round(cfg.space, plan, fed.samples_by_client, cfg.local);
  }
  return ledger;
}

int cmd_cost(const CommonArgs& args) {
  FullConfig cfg = load(args);
  if (cfg.exp.rounds < 1) throw std::runtime_error("cost: rounds must be >= 1");
  const Federation fed = build_federation(cfg.exp);
  const CostLedger ledger = simulate_plan_costs(cfg.exp, fed);
  const double sf_comp = superfed_avg_comp(ledger);
  const double sf_comm = superfed_avg_comm(ledger);
  const std::vector<ArchDescriptor> family = default_report_family(cfg.exp.space);
  const int s_size = cfg.exp.round_client_count();

  auto out = open_out(args, "cost.csv");
  out << "family_size,ifedavg_comp,ifedavg_comm,superfed_comp,superfed_comm\n";
  for (std::size_t k = 1; k <= family.size(); ++k) {
    const std::span<const ArchDescriptor> prefix(family.data(), k);
    out << k << ',' << num_text(ifedavg_comp(cfg.exp.space, prefix)) << ','
        << num_text(ifedavg_comm(cfg.exp.space, prefix, s_size)) << ',' << num_text(sf_comp)
        << ',' << num_text(sf_comm) << '\n';
  }
  return 0;
}

int cmd_partition_report(const CommonArgs& args) {
  FullConfig cfg = load(args);
  const Federation fed = build_federation(cfg.exp);
  const auto rows =
      class_distribution_report(fed.partitions, fed.data.train_y, fed.data.num_classes);
  auto out = open_out(args, "partitions.csv");
  write_class_report_csv(out, rows);
  return 0;
}

int cmd_lr_grid(const CommonArgs& args, std::vector<double> lrs) {
  FullConfig cfg = load(args);
  if (lrs.empty()) lrs = {0.03, 0.1};
  const auto rows = lr_grid(cfg.exp, lrs);
  auto out = open_out(args, "lr_grid.csv");
  out << "learning_rate,final_accuracy\n";
  for (const auto& row : rows)
    out << num_text(row.learning_rate) << ',' << num_text(row.final_accuracy) << '\n';
  return 0;
}

int cmd_compare_ablation(const CommonArgs& args) {
  FullConfig cfg = load(args);
  struct Variant {
    const char* label;
    HeuristicKind dist;
    AggregatorKind agg;
  };
  const Variant variants[] = {
      {"overlap + R", HeuristicKind::random, AggregatorKind::overlap},
      {"overlap + S", HeuristicKind::sandwich, AggregatorKind::overlap},
      {"overlap + TS", HeuristicKind::tracking_sandwich, AggregatorKind::overlap},
      {"Wt beta-decay + TS", HeuristicKind::tracking_sandwich, AggregatorKind::maxnet},
  };
  auto out = open_out(args, "ablation.csv");
  out << "heuristic,round,arch,test_accuracy,beta_t,comm_bytes_cum,comp_flops_cum\n";
  for (const auto& variant : variants) {
    ExperimentConfig exp = cfg.exp;
    exp.distribution = variant.dist;
    exp.aggregator = variant.agg;
    const RunResult result = run(exp);
    for (const auto& r : result.metrics)
      out << variant.label << ',' << r.round << ',' << r.arch << ','
          << num_text(r.test_accuracy) << ',' << num_text(r.beta_t) << ','
          << num_text(r.comm_bytes_cum) << ',' << num_text(r.comp_flops_cum) << '\n';
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"weight-shared federated learning simulator"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, nas_args, cost_args, part_args, lr_args, abl_args;
  std::string resume_path, eval_ckpt, nas_ckpt;
  std::vector<std::string> eval_arch_texts;
  std::vector<double> nas_budgets, lr_values;

  auto* train = app.add_subcommand("train", "run the federated training loop");
  add_common(train, train_args);
  train->add_option("--resume", resume_path, "checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "evaluate descriptors from a checkpoint");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--arch", eval_arch_texts, "descriptor text (repeatable)");

  auto* nas = app.add_subcommand("nas", "evolutionary search under a FLOPs budget");
  add_common(nas, nas_args);
  nas->add_option("--checkpoint", nas_ckpt, "checkpoint file")->required();
  nas->add_option("--budget", nas_budgets, "FLOPs budget (repeatable)");

  auto* cost = app.add_subcommand("cost", "family-size cost report");
  add_common(cost, cost_args);

  auto* part = app.add_subcommand("partition-report", "client/class sample counts");
  add_common(part, part_args);

  auto* lr = app.add_subcommand("lr-grid", "learning-rate grid with single-arch FedAvg");
  add_common(lr, lr_args);
  lr->add_option("--lr", lr_values, "learning rate (repeatable)");

  auto* abl = app.add_subcommand("compare-ablation", "run the four heuristic variants");
  add_common(abl, abl_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, resume_path);
    if (eval->parsed()) return cmd_eval(eval_args, eval_ckpt, eval_arch_texts);
    if (nas->parsed()) return cmd_nas(nas_args, nas_ckpt, nas_budgets);
    if (cost->parsed()) return cmd_cost(cost_args);
    if (part->parsed()) return cmd_partition_report(part_args);
    if (lr->parsed()) return cmd_lr_grid(lr_args, lr_values);
    if (abl->parsed()) return cmd_compare_ablation(abl_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace wsfl

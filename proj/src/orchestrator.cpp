#include "wsfl/orchestrator.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wsfl {

namespace {

using seeds::kClient;
using seeds::kData;
using seeds::kInit;
using seeds::kPartition;
using seeds::kRound;

int floor_participants(double participation, int clients) {
  return std::max(static_cast<int>(std::floor(participation * clients + 1e-9)), 1);
}

}  // namespace

int ExperimentConfig::round_client_count() const {
  return floor_participants(participation, clients);
}

void ExperimentConfig::finalize() {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  space.validate();
  if (data.kind != "blobs" && data.kind != "csv") fail("data.kind must be blobs or csv");
  if (data.kind == "blobs") {
    if (data.classes != space.num_classes)
      fail("data.classes must equal space.num_classes for blobs data");
    if (data.per_class < 1) fail("data.per_class must be >= 1");
    if (data.spread < 0.0) fail("data.spread must be >= 0");
  } else if (data.path.empty()) {
    fail("data.path is required when data.kind = csv");
  }
  if (clients < 1) fail("clients must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0)) fail("participation must lie in (0, 1]");
  if (!(alpha > 0.0)) fail("alpha must be > 0");
  if (rounds < 0) fail("rounds must be >= 0");
  if (eval_every < 1) fail("eval_every must be >= 1");
  local.validate();

  if (beta.beta_end <= 0.0)
    beta.beta_end = std::min(beta.beta0, 1.0 / static_cast<double>(round_client_count()));
  if (beta.decay_rounds <= 0)
    beta.decay_rounds = std::max<long>(1, std::llround(0.8 * static_cast<double>(rounds)));
  beta.validate();

  if (eval_archs.empty()) eval_archs = {largest(space), smallest(space)};
  for (auto& arch : eval_archs) arch = canonicalize(space, arch);
}

Federation build_federation(const ExperimentConfig& cfg) {
  Federation fed;
  if (cfg.data.kind == "blobs") {
    fed.data = synth_blobs(cfg.data.classes, cfg.space.input_dim, cfg.data.per_class,
                           cfg.data.spread, derive_seed(cfg.seed, {kData}));
  } else {
    fed.data = load_csv(cfg.data.path);
    if (fed.data.input_dim() != cfg.space.input_dim)
      throw std::invalid_argument("config: csv feature dimension does not match space.input_dim");
    if (fed.data.num_classes != cfg.space.num_classes)
      throw std::invalid_argument("config: csv class count does not match space.num_classes");
  }
  Rng part_rng(derive_seed(cfg.seed, {kPartition}));
  fed.partitions = dirichlet_partition(fed.data.train_y, cfg.clients, cfg.alpha, part_rng);
  fed.samples_by_client.resize(static_cast<std::size_t>(cfg.clients));
  for (const auto& part : fed.partitions)
    fed.samples_by_client[static_cast<std::size_t>(part.client_id)] = part.n_k();
  return fed;
}

namespace {

void eval_rows(const ExperimentConfig& cfg, const Federation& fed, const ServerState& state,
               double beta_used, std::vector<MetricsRow>& metrics) {
  for (const auto& arch : cfg.eval_archs) {
    MetricsRow row;
    row.round = state.round;
    row.arch = format_arch(cfg.space, arch);
    row.test_accuracy = evaluate(cfg.space, state.weights, arch, fed.data);
    row.beta_t = beta_used;
    row.comm_bytes_cum = state.ledger.total_bytes();
    row.comp_flops_cum = state.ledger.total_flops();
    metrics.push_back(std::move(row));
  }
}

RunResult run_loop(const ExperimentConfig& cfg, const Federation& fed, ServerState state,
                   bool emit_initial) {
  RunResult result{std::move(state), {}};
  ServerState& st = result.state;
  if (emit_initial) eval_rows(cfg, fed, st, 0.0, result.metrics);

  for (long t = st.round + 1; t <= cfg.rounds; ++t) {
    Rng round_rng(derive_seed(st.seed, {kRound, static_cast<std::uint64_t>(t)}));
    std::vector<int> participants = sample_clients(cfg.clients, cfg.participation, round_rng);

    RoundPlan plan;
    switch (cfg.distribution) {
      case HeuristicKind::random:
        plan = plan_random(cfg.space, t, std::move(participants), round_rng);
        break;
      case HeuristicKind::sandwich:
        plan = plan_sandwich(cfg.space, t, std::move(participants), round_rng);
        break;
      case HeuristicKind::tracking_sandwich:
        plan = plan_tracking_sandwich(cfg.space, t, std::move(participants), st.tracking,
                                      round_rng);
        break;
      case HeuristicKind::largest_only:
        plan = plan_largest_only(cfg.space, t, std::move(participants));
        break;
    }

    std::vector<ClientUpdate> updates;
    updates.reserve(plan.participants.size());
    for (std::size_t i = 0; i < plan.participants.size(); ++i) {
      const int client = plan.participants[i];
      const ArchDescriptor& arch = plan.archs[i];
      SubnetWeights w = extract(cfg.space, st.weights, arch);
      Rng client_rng(derive_seed(
          st.seed, {kClient, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(client)}));
      SubnetWeights trained;
      try {
        trained = client_update(cfg.space, fed.data,
                                fed.partitions[static_cast<std::size_t>(client)], w, cfg.local,
                                client_rng);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("round " + std::to_string(t) + ": " + e.what());
      }
      updates.push_back(
          ClientUpdate{client, arch, std::move(trained),
                       fed.samples_by_client[static_cast<std::size_t>(client)]});
    }

    double beta_used = 0.0;
    if (cfg.aggregator == AggregatorKind::maxnet) {
      beta_used = beta_at(cfg.beta, t);
      st.weights =
          aggregate_maxnet(cfg.space, st.weights, updates, plan.largest_holder, beta_used);
    } else {
      st.weights = aggregate_overlap(cfg.space, st.weights, updates);
    }
    st.ledger.record_round(cfg.space, plan, fed.samples_by_client, cfg.local);
    st.round = t;

    if (t % cfg.eval_every == 0 || t == cfg.rounds)
      eval_rows(cfg, fed, st, beta_used, result.metrics);
  }
  return result;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.finalize();
  const Federation fed = build_federation(c);
  ServerState state;
  state.round = 0;
  state.weights = init_supernet(c.space, derive_seed(c.seed, {kInit}));
  state.tracking = TrackingState::fresh(c.clients);
  state.ledger = CostLedger(c.clients);
  state.seed = c.seed;
  return run_loop(c, fed, std::move(state), /*emit_initial=*/true);
}

RunResult run_from(const ExperimentConfig& cfg, ServerState state) {
  ExperimentConfig c = cfg;
  c.finalize();
  if (state.tracking.clients() != c.clients)
    throw std::invalid_argument("run_from: checkpoint client count does not match config");
  const Federation fed = build_federation(c);
  return run_loop(c, fed, std::move(state), /*emit_initial=*/false);
}

// --- checkpoint format -------------------------------------------------

namespace {

std::string num_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_le_doubles(std::ostream& out, const Eigen::MatrixXd& t) {
  // Row-major buffer, little-endian.
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      double v = t(r, c);
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      char raw[8];
      std::memcpy(raw, &bits, sizeof raw);
      out.write(raw, sizeof raw);
    }
}

void read_le_doubles(std::istream& in, Eigen::MatrixXd& t) {
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      char raw[8];
      in.read(raw, sizeof raw);
      std::uint64_t bits;
      std::memcpy(&bits, raw, sizeof bits);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      t(r, c) = v;
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const SpaceConfig& space, const ServerState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  std::ostringstream m;
  m << "wsfl-ckpt 1\n";
  m << "space.stages " << space.stages << '\n';
  m << "space.base_depth " << space.base_depth << '\n';
  m << "space.max_extra_depth " << space.max_extra_depth << '\n';
  m << "space.ratio_choices";
  for (double r : space.ratio_choices) m << ' ' << num_text(r);
  m << '\n';
  m << "space.hidden_width " << space.hidden_width << '\n';
  m << "space.max_mid_width " << space.max_mid_width << '\n';
  m << "space.input_dim " << space.input_dim << '\n';
  m << "space.num_classes " << space.num_classes << '\n';
  m << "round " << state.round << '\n';
  m << "seed " << state.seed << '\n';
  m << "tracking " << state.tracking.clients() << '\n';
  for (int k = 0; k < state.tracking.clients(); ++k)
    m << "track " << k << ' ' << state.tracking.smallest_count[static_cast<std::size_t>(k)] << ' '
      << state.tracking.largest_count[static_cast<std::size_t>(k)] << '\n';
  m << "ledger.clients " << state.ledger.clients() << '\n';
  m << "ledger.rounds " << state.ledger.rounds() << '\n';
  m << "ledger.entries " << state.ledger.entries().size() << '\n';
  for (const auto& e : state.ledger.entries())
    m << "entry " << e.round << ' ' << e.client_id << ' ' << format_arch(space, e.arch) << ' '
      << num_text(e.flops) << ' ' << num_text(e.bytes_down) << ' ' << num_text(e.bytes_up) << '\n';
  m << "tensors " << state.weights.size() << '\n';
  std::uint64_t offset = 0;
  for (Eigen::Index i = 0; i < state.weights.size(); ++i) {
    const auto& t = state.weights.tensor(i);
    m << "tensor " << state.weights.name(i) << ' ' << t.rows() << ' ' << t.cols() << " f64 "
      << offset << '\n';
    offset += static_cast<std::uint64_t>(t.size()) * 8;
  }
  m << "end\n";
  out << m.str();
  for (Eigen::Index i = 0; i < state.weights.size(); ++i)
    write_le_doubles(out, state.weights.tensor(i));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

namespace {

[[noreturn]] void ckpt_fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("load_checkpoint: " + path + ": " + what);
}

std::istringstream expect_line(std::istream& in, const std::string& path, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) ckpt_fail(path, "truncated manifest (wanted " + key + ")");
  std::istringstream ss(line);
  std::string head;
  ss >> head;
  if (head != key) ckpt_fail(path, "expected '" + key + "', found '" + head + "'");
  return ss;
}

}  // namespace

ServerState load_checkpoint(const std::string& path, const SpaceConfig& expected_space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ckpt_fail(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "wsfl-ckpt 1") ckpt_fail(path, "bad magic line");

  SpaceConfig space;
  expect_line(in, path, "space.stages") >> space.stages;
  expect_line(in, path, "space.base_depth") >> space.base_depth;
  expect_line(in, path, "space.max_extra_depth") >> space.max_extra_depth;
  {
    auto ss = expect_line(in, path, "space.ratio_choices");
    space.ratio_choices.clear();
    double v;
    while (ss >> v) space.ratio_choices.push_back(v);
  }
  expect_line(in, path, "space.hidden_width") >> space.hidden_width;
  expect_line(in, path, "space.max_mid_width") >> space.max_mid_width;
  expect_line(in, path, "space.input_dim") >> space.input_dim;
  expect_line(in, path, "space.num_classes") >> space.num_classes;
  if (!(space == expected_space))
    ckpt_fail(path, "checkpoint space config does not match the experiment's space config");

  ServerState state;
  expect_line(in, path, "round") >> state.round;
  expect_line(in, path, "seed") >> state.seed;
  int clients = 0;
  expect_line(in, path, "tracking") >> clients;
  if (clients < 0) ckpt_fail(path, "bad tracking client count");
  state.tracking = TrackingState::fresh(clients);
  for (int k = 0; k < clients; ++k) {
    int id;
    auto ss = expect_line(in, path, "track");
    ss >> id >> state.tracking.smallest_count[static_cast<std::size_t>(k)] >>
        state.tracking.largest_count[static_cast<std::size_t>(k)];
    if (!ss || id != k) ckpt_fail(path, "bad tracking line");
  }
  int ledger_clients = 0;
  long ledger_rounds = 0;
  std::size_t entry_count = 0;
  expect_line(in, path, "ledger.clients") >> ledger_clients;
  expect_line(in, path, "ledger.rounds") >> ledger_rounds;
  expect_line(in, path, "ledger.entries") >> entry_count;
  std::vector<CostEntry> entries;
  entries.reserve(entry_count);
  for (std::size_t i = 0; i < entry_count; ++i) {
    auto ss = expect_line(in, path, "entry");
    CostEntry e;
    std::string arch_text;
    ss >> e.round >> e.client_id >> arch_text >> e.flops >> e.bytes_down >> e.bytes_up;
    if (!ss) ckpt_fail(path, "bad ledger entry");
    e.arch = parse_arch(space, arch_text);
    entries.push_back(std::move(e));
  }
  state.ledger.restore(std::move(entries), ledger_clients, ledger_rounds);

  std::size_t tensor_count = 0;
  expect_line(in, path, "tensors") >> tensor_count;
  state.weights = ParamSet::zeros(space);
  if (tensor_count != static_cast<std::size_t>(state.weights.size()))
    ckpt_fail(path, "tensor count does not match the space layout");
  for (std::size_t i = 0; i < tensor_count; ++i) {
    auto ss = expect_line(in, path, "tensor");
    std::string name, dtype;
    Eigen::Index rows, cols;
    std::uint64_t offset;
    ss >> name >> rows >> cols >> dtype >> offset;
    if (!ss || dtype != "f64") ckpt_fail(path, "bad tensor line");
    const auto idx = static_cast<Eigen::Index>(i);
    if (name != state.weights.name(idx) || rows != state.weights.tensor(idx).rows() ||
        cols != state.weights.tensor(idx).cols())
      ckpt_fail(path, "tensor name/shape mismatch for " + name);
  }
  if (!std::getline(in, line) || line != "end") ckpt_fail(path, "missing end marker");
  for (Eigen::Index i = 0; i < state.weights.size(); ++i)
    read_le_doubles(in, state.weights.tensor(i));
  if (!in) ckpt_fail(path, "truncated tensor payload");
  return state;
}

std::vector<LrGridRow> lr_grid(const ExperimentConfig& cfg, std::span<const double> lr_values) {
  if (lr_values.empty()) throw std::invalid_argument("lr_grid: empty learning-rate list");
  std::vector<LrGridRow> rows;
  rows.reserve(lr_values.size());
  for (double lr : lr_values) {
    ExperimentConfig c = cfg;
    c.finalize();
    c.distribution = HeuristicKind::largest_only;
    c.aggregator = AggregatorKind::overlap;
    c.local.learning_rate = lr;
    c.eval_archs = {largest(c.space)};
    RunResult res = run(c);
    const Federation fed = build_federation(c);
    rows.push_back({lr, evaluate(c.space, res.state.weights, largest(c.space), fed.data)});
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "round,arch,test_accuracy,beta_t,comm_bytes_cum,comp_flops_cum\n";
  for (const auto& r : rows)
    out << r.round << ',' << r.arch << ',' << num_text(r.test_accuracy) << ','
        << num_text(r.beta_t) << ',' << num_text(r.comm_bytes_cum) << ','
        << num_text(r.comp_flops_cum) << '\n';
}

}  // namespace wsfl

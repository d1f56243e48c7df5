#include "sslab/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "sslab/error.hpp"
#include "sslab/rng.hpp"

namespace sslab {

namespace {

using clock_type = std::chrono::steady_clock;

std::uint64_t elapsed_ns(clock_type::time_point from, clock_type::time_point to) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(to - from).count());
}

constexpr std::uint64_t preshuffle_stream = std::numeric_limits<std::uint64_t>::max();

Dataset preshuffled(const Dataset &data, std::uint64_t seed) {
  std::vector<row_id> order(data.size());
  std::iota(order.begin(), order.end(), row_id{0});
  Rng rng(seed, preshuffle_stream);
  rng.shuffle(std::span<row_id>(order));
  return data.permuted(order);
}

}  // namespace

void RunConfig::validate() const {
  if (data_path.empty()) throw config_error("no dataset path given");
  if (epochs == 0) throw config_error("epochs must be at least 1");
  if (sampler.batch_size == 0) throw config_error("batch size must be positive");
  if (sampler.stride == 0) throw config_error("stride must be positive");
  if (C && (!(*C > 0.0) || !std::isfinite(*C))) {
    throw config_error(fmt::format("C must be positive, got {}", *C));
  }
  if (p_star && !std::isfinite(*p_star)) throw config_error("provided p* is not finite");
  if (step == StepKind::LineSearch) StepRule::backtracking(line_search);
  if (block_size < row_header_bytes) throw config_error("block size too small");
  if (!label_map.empty()) LabelMap::parse(label_map);
  if (format == DataFormat::BlockStore && preshuffle &&
      (store_path.empty() || store_path == data_path)) {
    throw config_error("preshuffling a block store needs a distinct --store output path");
  }
}

double resolve_C(const RunConfig &config, std::size_t rows) {
  return config.C ? *config.C : 1.0 / static_cast<double>(rows);
}

Workload prepare_workload(const RunConfig &config) {
  config.validate();
  if (config.format == DataFormat::Libsvm) {
    std::optional<LabelMap> map;
    if (!config.label_map.empty()) map = LabelMap::parse(config.label_map);
    ParseOptions opts;
    opts.label_map = map ? &*map : nullptr;
    opts.n_features = config.n_features;
    Dataset data = load_libsvm(config.data_path, opts);
    if (config.preshuffle) data = preshuffled(data, config.sampler.seed);
    const std::string store_path =
        config.store_path.empty() ? config.data_path + ".mbl" : config.store_path;
    BlockStore store = write_block_store(data, store_path, config.block_size);
    return Workload{std::move(store), std::move(data)};
  }

  BlockStore store = BlockStore::open(config.data_path);
  if (config.n_features && *config.n_features != store.n_features()) {
    throw config_error(fmt::format("store has {} features, config expects {}",
                                   store.n_features(), *config.n_features));
  }
  Dataset data = store.read_all();
  if (config.preshuffle) {
    data = preshuffled(data, config.sampler.seed);
    store = write_block_store(data, config.store_path, store.block_size());
  }
  return Workload{std::move(store), std::move(data)};
}

OptimumEstimate estimate_optimum(const Objective &objective, std::uint64_t max_iters, double tol) {
  const double L = objective.curvature_constants().lipschitz;
  Vector w = Vector::Zero(static_cast<Eigen::Index>(objective.dim()));
  OptimumEstimate est;
  Vector g = objective.full_gradient(w);
  est.grad_norm = g.norm();
  while (est.grad_norm > tol && est.iterations < max_iters) {
    w -= g / L;
    ++est.iterations;
    g = objective.full_gradient(w);
    est.grad_norm = g.norm();
  }
  if (!w.allFinite()) throw numerical_error("reference gradient descent diverged");
  est.p_star = objective.value(w);
  est.converged = est.grad_norm <= tol;
  est.provenance = fmt::format(
      "full-batch gradient descent, step 1/L (L={:.10g}), C={:.10g}, {} iterations, |grad|={:.3e}, "
      "tol={:.1e}{}",
      L, objective.C(), est.iterations, est.grad_norm, tol,
      est.converged ? "" : "; WARNING: not converged within budget");
  return est;
}

RunResult run_experiment(const Workload &workload, const RunConfig &config,
                         const std::optional<OptimumEstimate> &optimum) {
  config.validate();
  const Dataset &data = workload.data;
  const BlockStore &store = workload.store;
  if (store.size() != data.size() || store.n_features() != data.n_features()) {
    throw config_error("block store and in-memory dataset disagree in shape");
  }
  if (config.n_features && *config.n_features != data.n_features()) {
    throw config_error(fmt::format("data has {} features, config expects {}", data.n_features(),
                                   *config.n_features));
  }

  RunResult result;
  result.C = resolve_C(config, data.size());
  const Objective objective(data, result.C);
  result.curvature = objective.curvature_constants();

  if (optimum) {
    result.optimum = *optimum;
  } else if (config.p_star) {
    result.optimum.p_star = *config.p_star;
    result.optimum.provenance = "provided";
  } else {
    result.optimum = estimate_optimum(objective);
  }

  const StepRule rule = config.step == StepKind::Constant
                            ? StepRule::constant(1.0 / result.curvature.lipschitz)
                            : StepRule::backtracking(config.line_search);

  Solver solver(config.method, objective, Vector::Zero(static_cast<Eigen::Index>(data.n_features())));
  Sampler sampler(config.sampler, data.size());
  result.initial_objective = objective.value(solver.w());

  std::vector<row_id> ids;
  std::uint64_t access_ns = 0;
  std::uint64_t compute_ns = 0;
  double max_grad_norm = 0.0;
  const auto wall_start = clock_type::now();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch > 1) sampler.epoch_reset();
    if (config.drop_cache_hint) store.drop_cache_hint();

    auto t0 = clock_type::now();
    solver.begin_epoch();
    compute_ns += elapsed_ns(t0, clock_type::now());

    EpochAccess acc;
    while (!sampler.exhausted()) {
      sampler.next_batch(ids);
      t0 = clock_type::now();
      BatchRead read = store.read_batch(ids);
      const auto t1 = clock_type::now();
      const StepInfo info = solver.step(Batch{ids, read.rows}, rule);
      const auto t2 = clock_type::now();
      access_ns += elapsed_ns(t0, t1);
      compute_ns += elapsed_ns(t1, t2);

      max_grad_norm = std::max(max_grad_norm, info.batch_grad_norm);
      ++acc.batches;
      acc.rows_read += read.rows.size();
      acc.blocks_touched += read.timings.blocks_touched;
      acc.bytes_read += read.timings.bytes_read;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.objective = objective.value(solver.w());
    if (!std::isfinite(row.objective)) {
      throw numerical_error(fmt::format("objective is not finite after epoch {}", epoch));
    }
    row.gap = row.objective - result.optimum.p_star;
    row.cum_access_ns = access_ns;
    row.cum_compute_ns = compute_ns;
    row.cum_wall_ns = elapsed_ns(wall_start, clock_type::now());
    row.max_batch_grad_norm = max_grad_norm;
    result.rows.push_back(row);
    result.access.push_back(acc);
  }
  result.w = solver.w();
  return result;
}

RunResult run_experiment(const RunConfig &config) {
  const Workload workload = prepare_workload(config);
  return run_experiment(workload, config);
}

void write_metrics_csv(std::ostream &out, const std::vector<MetricsRow> &rows) {
  out << metrics_csv_header << '\n';
  for (const auto &r : rows) {
    out << fmt::format("{},{:.10g},{:.10g},{},{},{},{:.10g}\n", r.epoch, r.objective, r.gap,
                       r.cum_wall_ns, r.cum_access_ns, r.cum_compute_ns, r.max_batch_grad_norm);
  }
}

void emit_csv(const std::vector<MetricsRow> &rows, const std::string &path) {
  if (rows.empty()) throw std::invalid_argument("no metrics rows to write");
  std::ofstream out(path);
  if (!out) throw io_error(fmt::format("cannot create '{}'", path));
  write_metrics_csv(out, rows);
  out.flush();
  if (!out) throw io_error(fmt::format("write to '{}' failed", path));
}

namespace {

template <typename T>
T parse_field(std::string_view tok, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw io_error(fmt::format("metrics csv line {}: bad field '{}'", line, tok));
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> read_metrics_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header) {
    throw io_error("metrics csv: missing or unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 7) throw io_error(fmt::format("metrics csv line {}: expected 7 fields", line_no));
    MetricsRow r;
    r.epoch = parse_field<std::uint64_t>(f[0], line_no);
    r.objective = parse_field<double>(f[1], line_no);
    r.gap = parse_field<double>(f[2], line_no);
    r.cum_wall_ns = parse_field<std::uint64_t>(f[3], line_no);
    r.cum_access_ns = parse_field<std::uint64_t>(f[4], line_no);
    r.cum_compute_ns = parse_field<std::uint64_t>(f[5], line_no);
    r.max_batch_grad_norm = parse_field<double>(f[6], line_no);
    rows.push_back(r);
  }
  return rows;
}

Comparison compare_samplers(const Workload &workload, const RunConfig &base,
                            const std::vector<SamplerKind> &samplers, bool parallel) {
  if (samplers.size() < 2) throw config_error("compare needs at least two samplers");
  base.validate();

  // one p* for every run so the gap columns are comparable
  OptimumEstimate optimum;
  if (base.p_star) {
    optimum.p_star = *base.p_star;
    optimum.provenance = "provided";
  } else {
    const Objective objective(workload.data, resolve_C(base, workload.data.size()));
    optimum = estimate_optimum(objective);
  }

  Comparison out;
  out.runs.resize(samplers.size());
  auto run_one = [&](std::size_t k) {
    RunConfig cfg = base;
    cfg.sampler.kind = samplers[k];
    out.runs[k] = run_experiment(workload, cfg, optimum);
  };

  if (parallel) {
    std::vector<std::exception_ptr> errors(samplers.size());
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < samplers.size(); ++k) {
      threads.emplace_back([&, k] {
        try {
          run_one(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
    for (auto &t : threads) t.join();
    for (auto &e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t k = 0; k < samplers.size(); ++k) run_one(k);
  }

  std::optional<std::size_t> reference;
  for (SamplerKind want : {SamplerKind::RandomWithoutReplacement, SamplerKind::RandomWithReplacement}) {
    for (std::size_t k = 0; k < samplers.size() && !reference; ++k) {
      if (samplers[k] == want) reference = k;
    }
  }

  for (std::size_t k = 0; k < samplers.size(); ++k) {
    const RunResult &run = out.runs[k];
    SamplerSummary s;
    s.kind = samplers[k];
    s.final_objective = run.rows.back().objective;
    s.total_wall_ns = run.rows.back().cum_wall_ns;
    s.total_access_ns = run.rows.back().cum_access_ns;
    s.total_compute_ns = run.rows.back().cum_compute_ns;
    for (const auto &a : run.access) s.blocks_touched += a.blocks_touched;
    s.timing_valid = !parallel;
    out.summary.push_back(s);
  }
  for (auto &s : out.summary) {
    const double ref = reference ? static_cast<double>(out.summary[*reference].total_access_ns) : 0.0;
    s.access_ratio_vs_rs = ref > 0.0 ? static_cast<double>(s.total_access_ns) / ref
                                     : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Comparison compare_samplers(const RunConfig &base, const std::vector<SamplerKind> &samplers,
                            bool parallel) {
  if (samplers.size() < 2) throw config_error("compare needs at least two samplers");
  const Workload workload = prepare_workload(base);
  return compare_samplers(workload, base, samplers, parallel);
}

void write_summary_csv(std::ostream &out, const std::vector<SamplerSummary> &summary) {
  out << summary_csv_header << '\n';
  for (const auto &s : summary) {
    out << fmt::format("{},{:.10g},{},{},{},{},{:.10g},{}\n", to_string(s.kind), s.final_objective,
                       s.total_wall_ns, s.total_access_ns, s.total_compute_ns, s.blocks_touched,
                       s.access_ratio_vs_rs, s.timing_valid ? 1 : 0);
  }
}

Dataset make_synthetic(const SyntheticSpec &spec) {
  if (spec.rows == 0 || spec.features == 0) throw config_error("synthetic data needs rows and features");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) throw config_error("density must lie in (0, 1]");
  Rng rng(spec.seed, 0);
  Vector truth(static_cast<Eigen::Index>(spec.features));
  for (auto &v : truth) v = rng.normal();

  std::vector<SparseExample> rows(spec.rows);
  for (auto &ex : rows) {
    for (std::size_t j = 0; j < spec.features; ++j) {
      if (spec.density < 1.0 && rng.uniform() >= spec.density) continue;
      ex.indices.push_back(static_cast<feature_id>(j));
      ex.values.push_back(spec.value_scale * rng.normal());
    }
    if (ex.indices.empty()) {
      ex.indices.push_back(static_cast<feature_id>(rng.below(spec.features)));
      ex.values.push_back(spec.value_scale * rng.normal());
    }
    double margin = sparse_dot(ex, truth);
    if (spec.label_noise > 0.0) margin += spec.label_noise * rng.normal();
    ex.label = margin >= 0.0 ? 1.0 : -1.0;
  }
  return Dataset(spec.features, std::move(rows));
}

}  // namespace sslab

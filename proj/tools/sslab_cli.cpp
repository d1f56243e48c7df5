// sslab: mini-batch sampling experiments over L2-regularized logistic regression.
//
//   sslab ingest   --data train.libsvm --out train.mbl
//   sslab run      --data train.mbl --method saga --sampler systematic --batch-size 500 --out run.csv
//   sslab compare  --data train.mbl --samplers rwo,cyclic,systematic --out summary.csv
//   sslab optimum  --data train.mbl
//   sslab synth    --rows 100000 --features 20 --out synth.libsvm
//
// Exit codes: 0 ok, 1 config error, 2 I/O or data-format error, 3 numerical failure.

#include <cstring>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sslab/error.hpp"
#include "sslab/harness.hpp"

namespace {

using namespace sslab;

enum exit_code { ok = 0, config_failure = 1, io_failure = 2, numerical_failure = 3 };

DataFormat detect_format(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(fmt::format("cannot open '{}'", path));
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, store_magic, 4) == 0 ? DataFormat::BlockStore
                                                                       : DataFormat::Libsvm;
}

struct CliOptions {
  RunConfig cfg;
  std::string format = "auto";
  std::string method = "mbsgd";
  std::string sampler = "systematic";
  std::string step = "constant";
  std::string samplers = "rwo,cyclic,systematic";
  std::string runs_prefix;
  bool parallel = false;
  std::uint64_t max_iters = 100'000;
  double tol = 1e-10;
  SyntheticSpec synth;
};

void add_data_options(CLI::App *cmd, CliOptions &o) {
  cmd->add_option("--data", o.cfg.data_path, "LIBSVM file or block store")->required();
  cmd->add_option("--format", o.format, "libsvm | blockstore | auto")
      ->check(CLI::IsMember({"auto", "libsvm", "blockstore"}));
  cmd->add_option("--label-map", o.cfg.label_map, "raw label map, e.g. '2:+1,*:-1'");
  cmd->add_option("--n-features", o.cfg.n_features, "override the feature dimension");
  cmd->add_option("--store", o.cfg.store_path, "block store written from LIBSVM input");
  cmd->add_option("--block-size", o.cfg.block_size, "block size in bytes");
  cmd->add_flag("--preshuffle", o.cfg.preshuffle, "shuffle rows once before building the store");
  cmd->add_option("--seed", o.cfg.sampler.seed, "seed for sampling and preshuffle");
  cmd->add_option("--C", o.cfg.C, "L2 regularization (default 1/l)");
}

void add_run_options(CLI::App *cmd, CliOptions &o) {
  add_data_options(cmd, o);
  cmd->add_option("--method", o.method, "mbsgd | sag | saga | svrg | saag2")
      ->check(CLI::IsMember({"mbsgd", "sag", "saga", "svrg", "saag2"}));
  cmd->add_option("--batch-size", o.cfg.sampler.batch_size, "mini-batch size");
  cmd->add_option("--stride", o.cfg.sampler.stride, "systematic sampling stride k");
  cmd->add_option("--step", o.step, "constant (1/L) | ls (mini-batch backtracking)")
      ->check(CLI::IsMember({"constant", "ls"}));
  cmd->add_option("--ls-c", o.cfg.line_search.c, "sufficient-decrease coefficient");
  cmd->add_option("--ls-rho", o.cfg.line_search.rho, "backtracking shrink factor");
  cmd->add_option("--ls-alpha0", o.cfg.line_search.alpha0, "first trial step");
  cmd->add_option("--ls-max-halvings", o.cfg.line_search.max_halvings, "backtracking trials");
  cmd->add_option("--epochs", o.cfg.epochs, "number of epochs p");
  cmd->add_option("--p-star", o.cfg.p_star, "known optimum; skips the reference run");
  cmd->add_flag("--drop-cache-hint", o.cfg.drop_cache_hint,
                "ask the OS to evict the store from the page cache before each epoch");
}

void finish_config(CliOptions &o) {
  if (o.format == "auto") {
    o.cfg.format = detect_format(o.cfg.data_path);
  } else {
    o.cfg.format = o.format == "libsvm" ? DataFormat::Libsvm : DataFormat::BlockStore;
  }
  o.cfg.method = *parse_method(o.method);
  o.cfg.step = o.step == "ls" ? StepKind::LineSearch : StepKind::Constant;
  auto kind = parse_sampler_kind(o.sampler);
  if (!kind) throw config_error(fmt::format("unknown sampler '{}'", o.sampler));
  o.cfg.sampler.kind = *kind;
}

std::vector<SamplerKind> parse_sampler_list(const std::string &list) {
  std::vector<SamplerKind> out;
  std::string_view rest = list;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto name = rest.substr(0, comma);
    auto kind = parse_sampler_kind(name);
    if (!kind) throw config_error(fmt::format("unknown sampler '{}'", name));
    out.push_back(*kind);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return out;
}

void write_or_print(const std::string &path, const auto &writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw io_error(fmt::format("cannot create '{}'", path));
  writer(out);
  if (!out.flush()) throw io_error(fmt::format("write to '{}' failed", path));
}

int cmd_ingest(CliOptions &o, const std::string &out) {
  o.cfg.store_path = out;
  o.cfg.format = DataFormat::Libsvm;
  const Workload w = prepare_workload(o.cfg);
  std::cerr << fmt::format("wrote {}: {} rows, {} features, {} blocks of {} bytes\n",
                           w.store.path(), w.store.size(), w.store.n_features(),
                           w.store.block_count(), w.store.block_size());
  return ok;
}

int cmd_run(CliOptions &o) {
  finish_config(o);
  const RunResult r = run_experiment(o.cfg);
  std::cerr << fmt::format("p* = {:.10g} ({})\n", r.optimum.p_star, r.optimum.provenance);
  if (o.cfg.out_path.empty() || o.cfg.out_path == "-") {
    write_metrics_csv(std::cout, r.rows);
  } else {
    emit_csv(r.rows, o.cfg.out_path);
  }
  return ok;
}

int cmd_compare(CliOptions &o) {
  finish_config(o);
  const auto kinds = parse_sampler_list(o.samplers);
  const Comparison c = compare_samplers(o.cfg, kinds, o.parallel);
  if (!o.runs_prefix.empty()) {
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      emit_csv(c.runs[k].rows, fmt::format("{}{}.csv", o.runs_prefix, to_string(kinds[k])));
    }
  }
  write_or_print(o.cfg.out_path, [&](std::ostream &os) { write_summary_csv(os, c.summary); });
  return ok;
}

int cmd_optimum(CliOptions &o) {
  finish_config(o);
  const Workload w = prepare_workload(o.cfg);
  const Objective objective(w.data, resolve_C(o.cfg, w.data.size()));
  const OptimumEstimate est = estimate_optimum(objective, o.max_iters, o.tol);
  std::cout << fmt::format("{:.17g}\n", est.p_star);
  std::cerr << est.provenance << '\n';
  return ok;
}

int cmd_synth(CliOptions &o, const std::string &out) {
  const Dataset d = make_synthetic(o.synth);
  write_or_print(out, [&](std::ostream &os) { write_libsvm(os, d); });
  return ok;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mini-batch sampling experiments for L2-regularized logistic regression"};
  app.require_subcommand(1);
  CliOptions o;
  std::string out;

  auto *ingest = app.add_subcommand("ingest", "convert LIBSVM text to a block store");
  add_data_options(ingest, o);
  ingest->add_option("--out", out, "block store path")->required();

  auto *run = app.add_subcommand("run", "run one experiment and write per-epoch metrics");
  add_run_options(run, o);
  run->add_option("--sampler", o.sampler, "rr | rwo | cyclic | systematic");
  run->add_option("--out", o.cfg.out_path, "metrics CSV (default stdout)");

  auto *compare = app.add_subcommand("compare", "run several samplers with one configuration");
  add_run_options(compare, o);
  compare->add_option("--samplers", o.samplers, "comma-separated sampler list");
  compare->add_option("--out", o.cfg.out_path, "summary CSV (default stdout)");
  compare->add_option("--runs-prefix", o.runs_prefix, "also write <prefix><sampler>.csv per run");
  compare->add_flag("--parallel", o.parallel, "run samplers concurrently (timings invalid)");

  auto *optimum = app.add_subcommand("optimum", "reference full-gradient run for p*");
  add_data_options(optimum, o);
  optimum->add_option("--max-iters", o.max_iters, "iteration budget");
  optimum->add_option("--tol", o.tol, "gradient-norm tolerance");

  auto *synth = app.add_subcommand("synth", "write a synthetic LIBSVM dataset");
  synth->add_option("--rows", o.synth.rows);
  synth->add_option("--features", o.synth.features);
  synth->add_option("--density", o.synth.density);
  synth->add_option("--scale", o.synth.value_scale);
  synth->add_option("--noise", o.synth.label_noise);
  synth->add_option("--seed", o.synth.seed);
  synth->add_option("--out", out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config_failure;
  }

  try {
    if (*ingest) return cmd_ingest(o, out);
    if (*run) return cmd_run(o);
    if (*compare) return cmd_compare(o);
    if (*optimum) return cmd_optimum(o);
    if (*synth) return cmd_synth(o, out);
  } catch (const config_error &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_failure;
  } catch (const io_error &e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return io_failure;
  } catch (const numerical_error &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  } catch (const std::logic_error &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_failure;
  }
  return ok;
}

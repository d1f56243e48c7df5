// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "oracles.hpp"
#include "sslab/harness.hpp"
#include "temp_dir.hpp"
#include "test_support.hpp"

using namespace sslab;
using test::OwnedBatch;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string &why) {
    if (pass) detail = why;
    pass = false;
  }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); }

std::vector<std::vector<row_id>> one_epoch(Sampler &s) {
  std::vector<std::vector<row_id>> out;
  while (!s.exhausted()) out.push_back(s.next_batch());
  return out;
}

std::vector<row_id> iota_ids(row_id from, row_id to) {
  std::vector<row_id> v(to - from);
  std::iota(v.begin(), v.end(), from);
  return v;
}

const std::vector<Method> all_methods{Method::MBSGD, Method::SAG, Method::SAGA, Method::SVRG, Method::SAAG2};

// 1. epochs of the partitioning samplers partition {0..l-1}; contiguity; batch count.
Outcome sampler_partition() {
  Outcome o;
  Rng rng(20240601, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t l = 1 + rng.below(10000);
    const std::size_t b = 1 + rng.below(l);
    const std::uint64_t seed = rng.next();
    for (auto kind : {SamplerKind::Cyclic, SamplerKind::Systematic, SamplerKind::RandomWithoutReplacement}) {
      Sampler s({kind, b, 1, seed}, l);
      const auto batches = one_epoch(s);
      if (batches.size() != (l + b - 1) / b) o.fail(fmt::format("batch count l={} b={}", l, b));
      std::vector<row_id> all;
      for (const auto &batch : batches) {
        if (kind != SamplerKind::RandomWithoutReplacement) {
          for (std::size_t t = 1; t < batch.size(); ++t) {
            if (batch[t] != batch[t - 1] + 1) o.fail(fmt::format("{} batch not contiguous", to_string(kind)));
          }
        }
        all.insert(all.end(), batch.begin(), batch.end());
      }
      std::sort(all.begin(), all.end());
      if (all != iota_ids(0, l)) o.fail(fmt::format("{} epoch is not a partition, l={} b={}", to_string(kind), l, b));
    }
  }
  if (o.pass) o.detail = "200 triples x 3 samplers";
  return o;
}

// 2. l = 20, b = 5 worked example.
Outcome worked_example() {
  Outcome o;
  Sampler cyc({SamplerKind::Cyclic, 5}, 20);
  const auto epoch = one_epoch(cyc);
  const std::vector<std::vector<row_id>> expected{iota_ids(0, 5), iota_ids(5, 10), iota_ids(10, 15), iota_ids(15, 20)};
  if (epoch != expected) o.fail("cyclic sequence differs from {0..4},{5..9},{10..14},{15..19}");

  bool found = false;
  for (std::uint64_t seed = 0; seed < 1000 && !found; ++seed) {
    Sampler sys({SamplerKind::Systematic, 5, 1, seed}, 20);
    if (sys.epoch_plan()[0] != 15) continue;
    found = true;
    if (sys.next_batch() != iota_ids(15, 20)) o.fail("systematic first batch is not {15..19}");
    o.detail = fmt::format("systematic seed {} starts at the last block", seed);
  }
  if (!found) o.fail("no seed produced a permutation starting at the last block");
  return o;
}

// 3. finite differences and Hessian spectrum bound.
Outcome gradient_correctness() {
  Outcome o;
  Rng rng(3, 0);
  int checks = 0;
  double worst = 0.0;
  while (checks < 1000) {
    const std::size_t n = 1 + rng.below(10);
    const Dataset d = oracle::random_dataset(rng, 8, n, 0.7);
    const Objective f(d, 0.01 + rng.uniform());
    const Vector w = oracle::random_vector(rng, n);
    const Vector g = f.full_gradient(w);
    for (Eigen::Index j = 0; j < w.size() && checks < 1000; ++j, ++checks) {
      const double fd = oracle::finite_difference([&](const Vector &v) { return f.value(v); }, w, j);
      worst = std::max(worst, rel_err(g[j], fd));
    }
  }
  if (worst > 1e-5) o.fail(fmt::format("finite-difference rel err {:.3e}", worst));

  double worst_ratio = 0.0;
  for (int p = 0; p < 100; ++p) {
    const std::size_t n = 1 + rng.below(20);
    const Dataset d = oracle::random_dataset(rng, 30, n, 0.7);
    const double C = 0.01 + rng.uniform();
    const double L = Objective(d, C).curvature_constants().lipschitz;
    const Vector w = oracle::random_vector(rng, n, 0.2);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::hessian(d, w, C));
    worst_ratio = std::max(worst_ratio, es.eigenvalues().maxCoeff() / L);
  }
  if (worst_ratio > 1.0 + 1e-12) o.fail(fmt::format("Hessian eigenvalue exceeds L by ratio {}", worst_ratio));
  if (o.pass) o.detail = fmt::format("max rel err {:.2e}; max lambda_max/L {:.3f}", worst, worst_ratio);
  return o;
}

// 4. exhaustive batch enumeration and the cyclic epoch-mean identity.
Outcome unbiasedness() {
  Outcome o;
  Rng rng(4, 0);
  double worst = 0.0;
  for (std::size_t l : {6u, 9u, 12u}) {
    const Dataset d = oracle::random_dataset(rng, l, 5);
    const Objective f(d, 0.1);
    const auto rule = StepRule::constant(1.0 / f.curvature_constants().lipschitz);
    for (Method m : {Method::MBSGD, Method::SAGA, Method::SVRG}) {
      Solver s(m, f, oracle::random_vector(rng, 5, 0.3));
      s.begin_epoch();
      for (row_id j = 0; j + 1 < l; j += 2) s.step(OwnedBatch(d, {j, j + 1}).view(), rule);
      const Vector full = f.full_gradient(s.w());
      for (std::size_t b = 1; b <= std::min<std::size_t>(l, 4); ++b) {
        Vector mean = Vector::Zero(5);
        double count = 0.0;
        oracle::for_each_subset(l, b, [&](const std::vector<row_id> &ids) {
          mean += s.direction(OwnedBatch(d, ids).view());
          count += 1.0;
        });
        worst = std::max(worst, (mean / count - full).cwiseAbs().maxCoeff());
      }
    }
    for (std::size_t b : std::vector<std::size_t>{1, 2, 3, l / 2, l}) {
      const Vector w = oracle::random_vector(rng, 5);
      Sampler cyc({SamplerKind::Cyclic, b}, l);
      Vector mean = Vector::Zero(5);
      for (const auto &ids : one_epoch(cyc)) mean += f.batch_gradient(w, ids);
      mean /= static_cast<double>(cyc.batches_per_epoch());
      if (l % b == 0) worst = std::max(worst, (mean - f.full_gradient(w)).cwiseAbs().maxCoeff());
    }
  }
  if (worst > 1e-10) o.fail(fmt::format("max deviation {:.3e}", worst));
  else o.detail = fmt::format("max deviation {:.2e}", worst);
  return o;
}

// 5. MBSGD with alpha = 1/L: geometric decrease, then a plateau under L alpha R0^2 / (4 mu).
Outcome convergence_floor_and_rate() {
  Outcome o;
  test::TempDir dir;
  const Dataset d = make_synthetic({1000, 10, 1.0, 1.0, 1.0, 5});
  const Workload w{write_block_store(d, dir / "conv.mbl"), d};
  std::vector<std::string> notes;
  for (auto kind : {SamplerKind::Cyclic, SamplerKind::Systematic, SamplerKind::RandomWithoutReplacement}) {
    RunConfig cfg;
    cfg.data_path = dir / "conv.mbl";
    cfg.format = DataFormat::BlockStore;
    cfg.method = Method::MBSGD;
    cfg.step = StepKind::Constant;
    cfg.C = 0.1;
    cfg.epochs = 200;
    cfg.sampler = {kind, 100, 1, 11};
    const RunResult r = run_experiment(w, cfg);

    const double L = r.curvature.lipschitz, mu = r.curvature.strong_convexity, alpha = 1.0 / L;
    const double R0 = r.rows.back().max_batch_grad_norm;
    const double floor = L * alpha * R0 * R0 / (4.0 * mu);
    if (r.rows.back().gap > floor) o.fail(fmt::format("{} final gap {:.3e} above floor {:.3e}", to_string(kind), r.rows.back().gap, floor));

    // gap curve including epoch 0; the plateau begins once the gap is within 10x of the
    // median over the last 50 epochs
    std::vector<double> gaps{r.initial_objective - r.optimum.p_star};
    for (const auto &row : r.rows) gaps.push_back(row.gap);
    std::vector<double> tail(gaps.end() - 50, gaps.end());
    std::nth_element(tail.begin(), tail.begin() + 25, tail.end());
    const double plateau = std::max(tail[25], 0.0);
    std::size_t end = 0;
    while (end < gaps.size() && gaps[end] > 10.0 * plateau && gaps[end] > 0.0) ++end;
    end = std::max<std::size_t>(end, 2);  // at least two points to fit

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(end);
    for (std::size_t e = 0; e < end; ++e) {
      const double x = static_cast<double>(e), y = std::log(std::max(gaps[e], 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    const double m = static_cast<double>(Sampler(cfg.sampler, d.size()).batches_per_epoch());
    const double bound = std::log(1.0 - 2.0 * alpha * mu) * m * 0.1;
    if (!(slope <= bound)) o.fail(fmt::format("{} slope {:.4f} above bound {:.4f}", to_string(kind), slope, bound));
    notes.push_back(fmt::format("{}: gap {:.1e} <= floor {:.1e}, slope {:.3f} <= {:.3f} over {} epochs",
                                to_string(kind), r.rows.back().gap, floor, slope, bound, end));
  }
  if (o.pass) {
    for (std::size_t i = 0; i < notes.size(); ++i) o.detail += (i ? "; " : "") + notes[i];
  }
  return o;
}

// 6. final objectives of random, cyclic and systematic sampling agree at fixed epochs.
Outcome sampler_parity() {
  Outcome o;
  test::TempDir dir;
  const Dataset d = make_synthetic({49990, 22, 0.6, 0.5, 1.0, 6});
  const Workload w{write_block_store(d, dir / "parity.mbl"), d};
  double worst = 0.0;
  std::string worst_case;
  for (Method m : all_methods) {
    for (StepKind step : {StepKind::Constant, StepKind::LineSearch}) {
      for (std::size_t b : {200u, 1000u}) {
        RunConfig cfg;
        cfg.data_path = dir / "parity.mbl";
        cfg.format = DataFormat::BlockStore;
        cfg.method = m;
        cfg.step = step;
        cfg.epochs = 30;
        cfg.p_star = 0.0;  // parity compares objectives only
        cfg.sampler = {SamplerKind::RandomWithoutReplacement, b, 1, 6};
        const Comparison c = compare_samplers(
            w, cfg, {SamplerKind::RandomWithoutReplacement, SamplerKind::Cyclic, SamplerKind::Systematic}, true);
        const double rs = c.summary[0].final_objective;
        for (std::size_t k = 1; k < 3; ++k) {
          const double diff = std::abs(rs - c.summary[k].final_objective);
          if (diff > worst) {
            worst = diff;
            worst_case = fmt::format("{} {} b={} {}", to_string(m), step == StepKind::Constant ? "constant" : "ls", b,
                                     to_string(c.summary[k].kind));
          }
        }
      }
    }
  }
  if (worst > 1e-3) o.fail(fmt::format("max |f_RS - f_other| = {:.3e} ({})", worst, worst_case));
  else o.detail = fmt::format("20 settings, max |f_RS - f_other| = {:.2e} ({})", worst, worst_case);
  return o;
}

// 7. cyclic <= systematic < random in blocks touched (exact) and median access time.
Outcome access_ordering() {
  Outcome o;
  test::TempDir dir;
  const Dataset d = make_synthetic({100000, 20, 1.0, 1.0, 1.0, 7});
  const Workload w{write_block_store(d, dir / "access.mbl"), d};

  RunConfig cfg;
  cfg.data_path = dir / "access.mbl";
  cfg.format = DataFormat::BlockStore;
  cfg.method = Method::MBSGD;
  cfg.epochs = 3;
  cfg.p_star = 0.0;
  cfg.drop_cache_hint = true;
  cfg.sampler = {SamplerKind::RandomWithoutReplacement, 500, 1, 7};
  const std::vector<SamplerKind> kinds{SamplerKind::Cyclic, SamplerKind::Systematic,
                                       SamplerKind::RandomWithoutReplacement};

  std::vector<std::vector<double>> per_epoch_ns(3);
  std::vector<std::uint64_t> blocks(3, 0);
  for (int trial = 0; trial < 5; ++trial) {
    cfg.sampler.seed = 100 + static_cast<std::uint64_t>(trial);
    const Comparison c = compare_samplers(w, cfg, kinds);
    for (std::size_t k = 0; k < 3; ++k) {
      per_epoch_ns[k].push_back(static_cast<double>(c.summary[k].total_access_ns) / static_cast<double>(cfg.epochs));
      const std::uint64_t per_epoch_blocks = c.summary[k].blocks_touched / cfg.epochs;
      if (trial == 0) blocks[k] = per_epoch_blocks;
      else if (blocks[k] != per_epoch_blocks && k < 2) o.fail("block counts vary across trials");
    }
  }
  if (!(blocks[0] <= blocks[1] && blocks[1] < blocks[2])) {
    o.fail(fmt::format("blocks per epoch cyclic {} systematic {} random {}", blocks[0], blocks[1], blocks[2]));
  }
  std::vector<double> med(3);
  for (std::size_t k = 0; k < 3; ++k) {
    auto v = per_epoch_ns[k];
    std::nth_element(v.begin(), v.begin() + 2, v.end());
    med[k] = v[2];
  }
  const std::string summary =
      fmt::format("blocks/epoch cs={} ss={} rs={}; median access ms/epoch cs={:.2f} ss={:.2f} rs={:.2f}", blocks[0],
                  blocks[1], blocks[2], med[0] / 1e6, med[1] / 1e6, med[2] / 1e6);
  if (!(med[0] <= med[1] && med[1] < med[2])) o.fail("timing order violated: " + summary);
  if (o.pass) o.detail = summary;
  return o;
}

// 8. scalar-table SAG/SAGA versus dense tables; SVRG full batch versus gradient descent.
Outcome oracle_equivalence() {
  Outcome o;
  Rng rng(8, 0);
  double worst = 0.0;
  for (int inst = 0; inst < 12; ++inst) {
    const std::size_t l = 4 + rng.below(17);
    const std::size_t n = 1 + rng.below(8);
    const Dataset d = oracle::random_dataset(rng, l, n, 0.7);
    const double C = 0.01 + 0.2 * rng.uniform();
    const Objective f(d, C);
    const double alpha = 1.0 / f.curvature_constants().lipschitz;
    const std::size_t b = 1 + rng.below(std::min<std::size_t>(l, 5));
    const SamplerKind kind = inst % 2 ? SamplerKind::RandomWithReplacement : SamplerKind::RandomWithoutReplacement;
    for (auto [m, dk] : {std::pair{Method::SAG, oracle::DenseTableSolver::Kind::SAG},
                         std::pair{Method::SAGA, oracle::DenseTableSolver::Kind::SAGA}}) {
      Solver s(m, f, Vector::Zero(static_cast<Eigen::Index>(n)));
      oracle::DenseTableSolver ref(dk, d, C);
      Sampler sampler({kind, b, 1, 80 + static_cast<std::uint64_t>(inst)}, l);
      for (int step = 0; step < 50; ++step) {
        if (sampler.exhausted()) sampler.epoch_reset();
        const auto ids = sampler.next_batch();
        s.step(OwnedBatch(d, ids).view(), StepRule::constant(alpha));
        ref.step(ids, alpha);
        worst = std::max(worst, (s.w() - ref.w()).cwiseAbs().maxCoeff());
      }
    }
  }
  if (worst > 1e-10) o.fail(fmt::format("table methods deviate by {:.3e}", worst));

  const Dataset d = oracle::random_dataset(rng, 15, 6);
  const Objective f(d, 0.1);
  const double alpha = 1.0 / f.curvature_constants().lipschitz;
  Solver svrg(Method::SVRG, f, oracle::random_vector(rng, 6));
  svrg.begin_epoch();
  const OwnedBatch all(d, oracle::all_rows(d));
  const Vector expected = svrg.w() - alpha * f.full_gradient(svrg.w());
  svrg.step(all.view(), StepRule::constant(alpha));
  if (svrg.w() != expected) o.fail("SVRG full-batch step differs from the gradient step");
  if (o.pass) o.detail = fmt::format("max table deviation {:.2e}; SVRG full batch exact", worst);
  return o;
}

std::string deterministic_csv(const std::vector<MetricsRow> &rows) {
  std::ostringstream out;
  write_metrics_csv(out, rows);
  std::istringstream in(out.str());
  std::string line, kept;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    kept += cols[0] + ',' + cols[1] + ',' + cols[2] + ',' + cols[6] + '\n';  // drop the three timing columns
  }
  return kept;
}

// 9. identical CSV apart from timing columns across repeated runs.
Outcome determinism() {
  Outcome o;
  test::TempDir dir;
  const Dataset d = make_synthetic({2000, 8, 0.5, 1.0, 0.5, 9});
  {
    std::ofstream out(dir / "det.svm");
    write_libsvm(out, d);
  }
  int configs = 0;
  for (Method m : all_methods) {
    for (auto kind : {SamplerKind::RandomWithReplacement, SamplerKind::Systematic}) {
      RunConfig cfg;
      cfg.data_path = dir / "det.svm";
      cfg.store_path = dir / "det.mbl";
      cfg.method = m;
      cfg.step = m == Method::SAGA ? StepKind::LineSearch : StepKind::Constant;
      cfg.preshuffle = true;
      cfg.epochs = 5;
      cfg.sampler = {kind, 64, 1, 1234};
      const std::string a = deterministic_csv(run_experiment(cfg).rows);
      const std::string b = deterministic_csv(run_experiment(cfg).rows);
      if (a != b) o.fail(fmt::format("{} / {} runs differ", to_string(m), to_string(kind)));
      ++configs;
    }
  }
  if (o.pass) o.detail = fmt::format("{} configurations reproduced", configs);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char *name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "sampler partition suite", 5, sampler_partition},
      {2, "worked-example fidelity", 1, worked_example},
      {3, "gradient correctness", 30, gradient_correctness},
      {4, "unbiasedness oracle", 10, unbiasedness},
      {5, "convergence floor and rate", 60, convergence_floor_and_rate},
      {6, "sampler parity at fixed epochs", 900, sampler_parity},
      {7, "access-time ordering", 600, access_ordering},
      {8, "oracle equivalence", 30, oracle_equivalence},
      {9, "determinism", 60, determinism},
  };

  int failures = 0;
  for (const auto &c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) o.fail(fmt::format("runtime {:.1f}s over budget {}s", secs, c.budget_s));
    failures += !o.pass;
    fmt::print("{} criterion {}: {} ({:.2f}s) - {}\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}

// Release gate for the toolkit: every behavior we promise, checked end to end
// with its tolerance pinned next to the check. One line is printed per
// criterion; the exit code is nonzero iff a blocking criterion fails. The
// 18-qubit stretch run is informational and only executes when
// QCBM_RUN_STRETCH=1 (it takes tens of minutes on one core).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qcbm/experiment.hpp"

using namespace qcbm;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kOracleAbsTol = 1e-8;       // adjoint vs finite differences
constexpr double kOracleRelTol = 1e-6;
constexpr double kScalingExponentCap = 1.2;  // wall time vs parameter count
constexpr double kBestTvSingleRegister = 0.02;
constexpr double kBoundaryTol = 1e-9;        // TV jump across stage handoff
constexpr double kRefinementTol = 1e-12;     // latent-qubit equivalence
constexpr double kOnsetRatio = 1.5;          // resolution-onset detector
constexpr int kOnsetLoBits = 8;
constexpr int kOnsetHiBits = 12;
constexpr double kStretchTv = 0.05;

int blocking_failures = 0;

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(3);
    out << v;
    return out.str();
}

template <typename F>
void criterion(int index, const std::string& name, F&& body, bool blocking = true) {
    bool pass = false;
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << index << ". " << name;
    if (!detail.empty()) std::cout << " -- " << detail;
    if (!blocking) std::cout << " [non-blocking]";
    std::cout << " (" << fmt(secs) << "s)\n" << std::flush;
    if (!pass && blocking) ++blocking_failures;
}

Eigen::VectorXd random_target(long dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd p(dim);
    for (long i = 0; i < dim; ++i) p[i] = 0.05 + u(rng);
    return p / p.sum();
}

Eigen::VectorXd random_angles(long n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

// One flat training arm: fixed circuit, one run per seed, endpoints recorded.
SweepSummary flat_arm(const Topology& topo, int depth, const ProbabilityVector& target,
                      int epochs, const std::vector<std::uint64_t>& seeds) {
    auto run = [&](std::uint64_t seed) {
        const Circuit c = build_circuit(topo, depth, Entangler::RZZ);
        TrainConfig tc;
        tc.epochs = epochs;
        tc.record_every = epochs;
        tc.loss = LossKind::KL;
        tc.seed = seed;
        std::mt19937_64 rng(seed);
        RunResult r;
        r.stages.push_back(train(c, initial_params(c.n_params, tc.init, rng), target, tc));
        r.circuit = c;
        return r;
    };
    return sweep(run, seeds, 0);
}

std::vector<std::uint64_t> seed_range(int n) {
    std::vector<std::uint64_t> seeds(n);
    for (int i = 0; i < n; ++i) seeds[i] = static_cast<std::uint64_t>(i + 1);
    return seeds;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Shared between the hierarchical-advantage and stage-continuity criteria.
struct MultiRegisterArms {
    SweepSummary hier;
    SweepSummary scratch;
};

MultiRegisterArms run_multi_register_arms() {
    const Topology topo = Topology::multi_register(3, 2, 2);
    const HierarchySchedule schedule{{{2, 2}, {3, 2}, {4, 2}}, 300};
    Eigen::VectorXd mu(3);
    mu << 0.5, 0.3, 0.7;
    Eigen::MatrixXd sigma(3, 3);
    sigma << 0.2, -0.1, -0.1,
            -0.1,  0.1,  0.0,
            -0.1,  0.0,  0.3;
    const TargetSpec target = TargetSpec::multivariate(mu, sigma);
    const auto seeds = seed_range(10);

    MultiRegisterArms arms;
    arms.hier = sweep(
        [&](std::uint64_t seed) {
            TrainConfig tc;
            tc.loss = LossKind::KL;
            tc.seed = seed;
            tc.record_every = 50;
            RunResult r;
            r.stages = train_hierarchical(topo, schedule, Entangler::RZZ, target, tc);
            r.circuit = build_hierarchical_circuit(topo, schedule, Entangler::RZZ);
            return r;
        },
        seeds, 0);

    // Identical final circuit, all parameters free from the start, and the
    // same total optimization budget.
    const Circuit full = build_hierarchical_circuit(topo, schedule, Entangler::RZZ);
    const ProbabilityVector p = sample_target(target, {4, 4, 4});
    const int total_epochs =
        schedule.epochs_per_stage * static_cast<int>(schedule.stages.size());
    arms.scratch = sweep(
        [&](std::uint64_t seed) {
            TrainConfig tc;
            tc.loss = LossKind::KL;
            tc.seed = seed;
            tc.epochs = total_epochs;
            tc.record_every = total_epochs;
            std::mt19937_64 rng(seed);
            RunResult r;
            r.stages.push_back(
                train(full, initial_params(full.n_params, tc.init, rng), p, tc));
            r.circuit = full;
            return r;
        },
        seeds, 0);
    return arms;
}

} // namespace

int main() {
    std::cout << "acceptance gate, toolkit version " << kToolkitVersion << "\n";

    criterion(1, "adjoint gradients match finite differences on random circuits",
              [](std::string& detail) {
                  std::mt19937_64 rng(12345);
                  std::vector<Topology> topos;
                  for (int n = 2; n <= 6; ++n) topos.push_back(Topology::line(n));
                  topos.push_back(Topology::grid(2, 2));
                  topos.push_back(Topology::grid(2, 3));
                  topos.push_back(Topology::grid(3, 2));

                  double worst = 0;
                  int components = 0;
                  for (int trial = 0; trial < 50; ++trial) {
                      const Topology& topo = topos[trial % topos.size()];
                      const int layers = 1 + trial % 3;
                      const Entangler ent =
                          trial % 5 == 0 ? Entangler::CX : Entangler::RZZ;
                      const LossKind loss = trial % 2 ? LossKind::KL : LossKind::L2;
                      const Circuit c = build_circuit(topo, layers, ent);
                      const Eigen::VectorXd params = random_angles(c.n_params, rng);
                      const Eigen::VectorXd p = random_target(1L << c.n_qubits, rng);
                      const Eigen::VectorXd adj = adjoint_gradient(c, params, p, loss);
                      // Richardson-extrapolated central differences. KL terms
                      // p log(p/q) gain a 1/q factor per derivative, so with
                      // q ~ 1e-3 the fifth derivative reaches ~1e12 and the
                      // step must stay this small for the O(h^4) residual to
                      // clear the 1e-6 bar; a plain second-order stencil
                      // cannot clear it at any step size.
                      const Eigen::VectorXd g1 =
                          finite_difference_gradient(c, params, p, loss, 2e-5);
                      const Eigen::VectorXd g2 =
                          finite_difference_gradient(c, params, p, loss, 1e-5);
                      const Eigen::VectorXd fd = (4.0 * g2 - g1) / 3.0;
                      for (long i = 0; i < adj.size(); ++i) {
                          const double bound =
                              kOracleAbsTol + kOracleRelTol * std::abs(fd[i]);
                          worst = std::max(worst, std::abs(adj[i] - fd[i]) / bound);
                          ++components;
                      }
                  }
                  detail = "50 circuits, " + std::to_string(components) +
                           " components, worst deviation at " + fmt(worst * 100) +
                           "% of tolerance";
                  return worst <= 1.0;
              });

    criterion(2, "gate-application counts match closed forms and wall time scales ~linearly",
              [](std::string& detail) {
                  const Topology topo = Topology::line(10);
                  const ProbabilityVector target =
                      sample_target(TargetSpec::gaussian(0.65, 0.04), {10});
                  std::vector<double> xs, ys;
                  for (int layers = 1; layers <= 8; ++layers) {
                      const Circuit c = build_circuit(topo, layers, Entangler::RZZ);
                      std::mt19937_64 rng(layers);
                      const Eigen::VectorXd params = random_angles(c.n_params, rng);

                      GradientStats adj_stats, fd_stats;
                      adjoint_gradient_full(c, params, target.values, LossKind::KL,
                                            kDefaultQubitCap, &adj_stats);
                      finite_difference_gradient(c, params, target.values, LossKind::KL,
                                                 1e-5, kDefaultQubitCap, &fd_stats);
                      const auto adj_formula =
                          count_gate_applications(c, GradientMethod::Adjoint);
                      const auto fd_formula =
                          count_gate_applications(c, GradientMethod::FiniteDiff);
                      if (adj_stats.gate_applications != adj_formula ||
                          fd_stats.gate_applications != fd_formula) {
                          detail = "count mismatch at " + std::to_string(layers) +
                                   " layers: adjoint " +
                                   std::to_string(adj_stats.gate_applications) + " vs " +
                                   std::to_string(adj_formula) + ", fd " +
                                   std::to_string(fd_stats.gate_applications) + " vs " +
                                   std::to_string(fd_formula);
                          return false;
                      }

                      using clock = std::chrono::steady_clock;
                      double best_ms = std::numeric_limits<double>::infinity();
                      for (int trial = 0; trial < 5; ++trial) {
                          const auto t0 = clock::now();
                          for (int r = 0; r < 20; ++r)
                              adjoint_gradient(c, params, target.values, LossKind::KL);
                          best_ms = std::min(
                              best_ms,
                              std::chrono::duration<double, std::milli>(clock::now() - t0)
                                      .count() / 20.0);
                      }
                      xs.push_back(std::log(static_cast<double>(c.n_params)));
                      ys.push_back(std::log(best_ms));
                  }
                  const double n = static_cast<double>(xs.size());
                  double sx = 0, sy = 0, sxx = 0, sxy = 0;
                  for (std::size_t i = 0; i < xs.size(); ++i) {
                      sx += xs[i];
                      sy += ys[i];
                      sxx += xs[i] * xs[i];
                      sxy += xs[i] * ys[i];
                  }
                  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
                  detail = "counts exact for layers 1-8; log-log slope " + fmt(slope);
                  return slope < kScalingExponentCap;
              });

    criterion(3, "9-qubit loading beats 0.02 TV and grid beats line at every depth",
              [](std::string& detail) {
                  const ProbabilityVector target =
                      sample_target(TargetSpec::gaussian(0.65, 0.04), {9});
                  const auto seeds = seed_range(10);
                  const int epochs = 1000;

                  double best = std::numeric_limits<double>::infinity();
                  double grid6_median = 0;
                  for (int depth = 6; depth <= 9; ++depth) {
                      const SweepSummary s =
                          flat_arm(Topology::grid(3, 3), depth, target, epochs, seeds);
                      best = std::min(best, s.min);
                      if (depth == 6) grid6_median = s.median;
                  }

                  double worst_line_median = std::numeric_limits<double>::infinity();
                  bool grid_wins = true;
                  for (int depth = 1; depth <= 9; ++depth) {
                      const SweepSummary s =
                          flat_arm(Topology::line(9), depth, target, epochs, seeds);
                      worst_line_median = std::min(worst_line_median, s.median);
                      if (grid6_median >= s.median) grid_wins = false;
                  }
                  detail = "best TV " + fmt(best) + ", grid depth-6 median " +
                           fmt(grid6_median) + ", best line median " +
                           fmt(worst_line_median);
                  return best <= kBestTvSingleRegister && grid_wins;
              });

    const MultiRegisterArms arms = run_multi_register_arms();

    criterion(4, "hierarchical training beats from-scratch on the trivariate target",
              [&](std::string& detail) {
                  detail = "hier median " + fmt(arms.hier.median) + " vs scratch " +
                           fmt(arms.scratch.median) + "; hier best " +
                           fmt(arms.hier.min) + " vs scratch " + fmt(arms.scratch.min);
                  return arms.hier.median <= arms.scratch.median &&
                         arms.hier.min <= arms.scratch.min;
              });

    criterion(5, "TV is continuous across every stage handoff",
              [&](std::string& detail) {
                  double worst = 0;
                  for (const RunResult& run : arms.hier.runs)
                      for (std::size_t s = 0; s + 1 < run.stages.size(); ++s)
                          worst = std::max(worst,
                                           std::abs(run.stages[s].epochs.back().tv -
                                                    run.stages[s + 1].epochs.front().tv));
                  detail = "worst jump " + fmt(worst) + " over " +
                           std::to_string(arms.hier.runs.size()) + " runs";
                  return worst < kBoundaryTol;
              });

    criterion(6, "resolution changes are consistent and latent qubits are exactly uniform",
              [](std::string& detail) {
                  std::mt19937_64 rng(777);
                  for (const auto& shape :
                       std::vector<std::vector<int>>{{3}, {2, 2}, {4, 1}}) {
                      int bits = 0;
                      for (int b : shape) bits += b;
                      const ProbabilityVector pv(random_target(1L << bits, rng), shape);
                      std::vector<int> add(shape.size());
                      for (std::size_t r = 0; r < add.size(); ++r)
                          add[r] = 1 + static_cast<int>(r % 2);
                      const ProbabilityVector back =
                          coarse_grain(expand_uniform(pv, add), add);
                      if (!(back.values.array() == pv.values.array()).all()) {
                          detail = "expand/coarse-grain round trip is not exact";
                          return false;
                      }
                  }

                  // Activating a qubit with H alone must reproduce the uniform
                  // expansion of the smaller circuit's distribution.
                  double worst = 0;
                  {
                      const Circuit base =
                          build_circuit(Topology::line(3), 2, Entangler::RZZ, {0, 1});
                      const Eigen::VectorXd params = random_angles(base.n_params, rng);
                      const Eigen::VectorXd p_small =
                          probabilities(forward(compact_circuit(base), params));
                      Circuit widened = base;
                      widened.gates.insert(widened.gates.begin(), Gate::h(2));
                      widened.active_qubits = {0, 1, 2};
                      const Eigen::VectorXd p_wide =
                          probabilities(forward(compact_circuit(widened), params));
                      const ProbabilityVector expanded =
                          expand_uniform(ProbabilityVector(p_small, {2}), {1});
                      worst = (p_wide - expanded.values).cwiseAbs().maxCoeff();
                  }
                  {
                      const Topology topo = Topology::multi_register(2, 1, 2);
                      const Circuit base = build_circuit(topo, 1, Entangler::RZZ, {0, 2});
                      const Eigen::VectorXd params = random_angles(base.n_params, rng);
                      const Eigen::VectorXd p_small =
                          probabilities(forward(compact_circuit(base), params));
                      Circuit widened = base;
                      widened.gates.insert(widened.gates.begin(), Gate::h(3));
                      widened.gates.insert(widened.gates.begin(), Gate::h(1));
                      widened.active_qubits = {0, 1, 2, 3};
                      const Eigen::VectorXd p_wide =
                          probabilities(forward(compact_circuit(widened), params));
                      const ProbabilityVector expanded =
                          expand_uniform(ProbabilityVector(p_small, {1, 1}), {1, 1});
                      worst = std::max(
                          worst, (p_wide - expanded.values).cwiseAbs().maxCoeff());
                  }
                  detail = "round trips exact; max latent-qubit deviation " + fmt(worst);
                  return worst < kRefinementTol;
              });

    criterion(7, "resolution sweep: coarse-grained TV departs from full TV at 8-12 bits",
              [](std::string& detail) {
                  // A sharply peaked target puts real mass into the fine bits:
                  // discarding bits 9-12 of this target costs 0.022 TV on its
                  // own. Training hierarchically (8 coarse bits first, then a
                  // short full-resolution stage) nails the coarse marginal and
                  // recovers only part of that fine structure, so comparing
                  // model and target at m bits while walking m down from 12,
                  // TV_m tracks the full-resolution TV until the unlearned
                  // fine-bit error is peeled away and TV_m drops by more than
                  // the onset ratio. That drop must begin between 8 and 12
                  // bits for the median seed.
                  const TargetSpec spec = TargetSpec::gaussian(0.65, 3e-4);
                  const ProbabilityVector target = sample_target(spec, {12});
                  const Topology topo = Topology::grid(3, 4);
                  const HierarchySchedule sched{{{8, 4}, {12, 2}}, 1200};
                  const Circuit shape =
                      build_hierarchical_circuit(topo, sched, Entangler::RZZ);

                  std::vector<int> onsets;
                  std::string curve;  // seed-1 TV_m for m = 7..12
                  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
                      TrainConfig tc;
                      tc.loss = LossKind::KL;
                      tc.seed = seed;
                      tc.record_every = sched.epochs_per_stage;
                      const auto recs =
                          train_hierarchical(topo, sched, Entangler::RZZ, spec, tc);
                      const Eigen::VectorXd q = probabilities(forward(
                          compact_circuit(shape), recs.back().final_params));
                      const ProbabilityVector qpv(q, {12});
                      const double full = tv_distance(target, qpv);
                      int onset = 0;
                      for (int m = 1; m <= 12; ++m) {
                          const double tv_m = tv_at_resolution(target, qpv, m);
                          if (tv_m <= full / kOnsetRatio) onset = m;
                          if (seed == 1 && m >= 7)
                              curve += (m > 7 ? " " : "") + fmt(tv_m);
                      }
                      onsets.push_back(onset);
                  }
                  std::sort(onsets.begin(), onsets.end());
                  const int median = onsets[onsets.size() / 2];
                  std::string all;
                  for (std::size_t i = 0; i < onsets.size(); ++i)
                      all += (i ? " " : "") + std::to_string(onsets[i]);
                  detail = "onset per seed: " + all + " (median " +
                           std::to_string(median) + "); seed-1 TV_m from 7 bits: " +
                           curve;
                  return median >= kOnsetLoBits && median <= kOnsetHiBits;
              });

    const bool run_stretch = [] {
        const char* v = std::getenv("QCBM_RUN_STRETCH");
        return v != nullptr && std::string(v) == "1";
    }();
    if (run_stretch) {
        criterion(8, "18-qubit hierarchical loading reaches 0.05 TV",
                  [](std::string& detail) {
                      const TargetSpec spec = TargetSpec::gaussian(0.65, 0.04);
                      const Topology topo = Topology::grid(3, 6);
                      const HierarchySchedule sched{{{6, 2}, {12, 2}, {18, 2}}, 800};
                      double best = std::numeric_limits<double>::infinity();
                      std::string tvs;
                      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
                          TrainConfig tc;
                          tc.loss = LossKind::KL;
                          tc.seed = seed;
                          tc.record_every = sched.epochs_per_stage;
                          const auto recs = train_hierarchical(topo, sched,
                                                               Entangler::RZZ, spec, tc);
                          const double tv = recs.back().final_tv();
                          best = std::min(best, tv);
                          tvs += (seed > 1 ? " " : "") + fmt(tv);
                      }
                      detail = "final TV per seed: " + tvs + " (stages 6/12/18 bits)";
                      return best <= kStretchTv;
                  },
                  /*blocking=*/false);
    } else {
        std::cout << "[SKIP] 8. 18-qubit hierarchical loading reaches 0.05 TV -- set "
                     "QCBM_RUN_STRETCH=1 to run [non-blocking]\n";
    }

    criterion(9, "reruns of the same config and seeds are byte-identical",
              [](std::string& detail) {
                  const fs::path base =
                      fs::temp_directory_path() / "qcbm_acceptance_rerun";
                  fs::remove_all(base);
                  const nlohmann::json raw = {
                      {"target", {{"kind", "gaussian"}, {"mean", 0.65}, {"variance", 0.04}}},
                      {"topology", {{"kind", "line"}, {"n_qubits", 4}}},
                      {"schedule",
                       {{"epochs_per_stage", 60},
                        {"stages",
                         nlohmann::json::array(
                             {{{"active_per_register", 2}, {"layers", 1}},
                              {{"active_per_register", 4}, {"layers", 1}}})}}},
                      {"train", {{"loss", "kl"}, {"record_every", 10}}},
                      {"seeds", {3, 4}},
                      {"output_dir", base.string()}};
                  const ExperimentConfig cfg = experiment_config_from_json(raw);
                  const ExperimentArtifacts a = run_experiment(cfg, raw);
                  const ExperimentArtifacts b = run_experiment(cfg, raw);
                  bool same = true;
                  for (const char* rel :
                       {"schedule/seed-3.jsonl", "schedule/seed-4.jsonl", "sweep.csv",
                        "schedule/best_model.json", "schedule/best_histogram.json"})
                      same = same && slurp(a.run_dir / rel) == slurp(b.run_dir / rel);
                  fs::remove_all(base);
                  detail = "trajectories, sweep CSV, and best model compared";
                  return same;
              });

    if (blocking_failures == 0) {
        std::cout << "acceptance gate: all blocking criteria passed\n";
        return 0;
    }
    std::cout << "acceptance gate: " << blocking_failures
              << " blocking criterion(s) failed\n";
    return 1;
}

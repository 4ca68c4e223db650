#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qcbm/ansatz.hpp"
#include "qcbm/distributions.hpp"
#include "qcbm/gradients.hpp"

namespace qcbm {

struct AdamHyper {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second-moment accumulators. On hierarchical expansion the state is
/// resized: existing slots keep their moments exactly, new slots start at 0.
struct AdamState {
    int step = 0;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    AdamHyper hyper;

    static AdamState fresh(int n_params, AdamHyper hyper = {}) {
        AdamState s;
        s.m = Eigen::VectorXd::Zero(n_params);
        s.v = Eigen::VectorXd::Zero(n_params);
        s.hyper = hyper;
        return s;
    }

    void resize_for_expansion(int n_params) {
        if (n_params < m.size())
            throw std::invalid_argument("expansion cannot shrink the parameter count");
        Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n_params);
        Eigen::VectorXd v2 = Eigen::VectorXd::Zero(n_params);
        m2.head(m.size()) = m;
        v2.head(v.size()) = v;
        m = std::move(m2);
        v = std::move(v2);
    }
};

/// Standard bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, Eigen::VectorXd& params,
                      const Eigen::VectorXd& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step length mismatch");
    const auto& h = state.hyper;
    ++state.step;
    state.m = h.beta1 * state.m + (1 - h.beta1) * grads;
    state.v = h.beta2 * state.v + (1 - h.beta2) * grads.cwiseAbs2();
    const double mc = 1 - std::pow(h.beta1, state.step);
    const double vc = 1 - std::pow(h.beta2, state.step);
    params -= (h.lr / mc) * state.m.cwiseQuotient(
                  ((state.v / vc).cwiseSqrt().array() + h.eps).matrix());
}

enum class ParamInit { UniformAngles, Zeros };

inline Eigen::VectorXd initial_params(int n_params, ParamInit init,
                                      std::mt19937_64& rng) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_params);
    if (init == ParamInit::UniformAngles) {
        std::uniform_real_distribution<double> angle(-M_PI, M_PI);
        for (int i = 0; i < n_params; ++i) p[i] = angle(rng);
    }
    return p;
}

struct TrainConfig {
    int epochs = 1000;
    LossKind loss = LossKind::KL;
    std::uint64_t seed = 0;
    ParamInit init = ParamInit::UniformAngles;
    int record_every = 1;
    /// Bits per register at which the recorded TV is evaluated; 0 means the
    /// TV reference's own (uniform) bits per register.
    int tv_bits_per_register = 0;
    AdamHyper adam;
    int qubit_cap = kDefaultQubitCap;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0;
    double tv = 0;
    double wall_ms = 0;
};

struct TrainRecord {
    std::vector<EpochRecord> epochs;
    Eigen::VectorXd final_params;
    int stage_index = 0;

    double final_tv() const { return epochs.back().tv; }
    double final_loss() const { return epochs.back().loss; }
};

/// Full-batch gradient descent against `loss_target`. Metrics are recorded
/// at epoch 0 (before any update), every `record_every` epochs, and after
/// the final update. The recorded TV compares `tv_reference` (defaulting to
/// the loss target) with the circuit distribution at `tv_bits_per_register`,
/// so partially active circuits are scored at full resolution.
///
/// When `adam` is supplied the optimizer state carries across calls (used by
/// hierarchical stages); it must already be sized for the circuit.
inline TrainRecord train(const Circuit& circuit, const Eigen::VectorXd& params0,
                         const ProbabilityVector& loss_target, const TrainConfig& config,
                         const ProbabilityVector* tv_reference = nullptr,
                         AdamState* adam = nullptr) {
    if (config.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (config.record_every < 1)
        throw std::invalid_argument("record_every must be at least 1");
    if (params0.size() != circuit.n_params)
        throw std::invalid_argument("parameter vector length does not match circuit");

    const Circuit sim = compact_circuit(circuit);
    if (loss_target.resolution() != sim.n_qubits)
        throw std::invalid_argument("target resolution " +
                                    std::to_string(loss_target.resolution()) +
                                    " does not match " + std::to_string(sim.n_qubits) +
                                    " active qubits");

    const ProbabilityVector& tv_ref = tv_reference ? *tv_reference : loss_target;
    int tv_bits = config.tv_bits_per_register;
    if (tv_bits == 0) {
        tv_bits = tv_ref.register_shape[0];
        for (int bits : tv_ref.register_shape)
            if (bits != tv_bits)
                throw std::invalid_argument(
                    "tv_bits_per_register required for non-uniform registers");
    }

    AdamState local = AdamState::fresh(circuit.n_params, config.adam);
    AdamState& opt = adam ? *adam : local;
    if (opt.m.size() != circuit.n_params)
        throw std::invalid_argument("optimizer state does not match circuit parameters");

    const auto start = std::chrono::steady_clock::now();
    TrainRecord rec;
    Eigen::VectorXd params = params0;

    auto record = [&](int epoch, double loss, const Eigen::VectorXd& q) {
        EpochRecord r;
        r.epoch = epoch;
        r.loss = loss;
        r.tv = tv_at_resolution(tv_ref,
                                ProbabilityVector(q, loss_target.register_shape),
                                tv_bits, config.qubit_cap);
        r.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start).count();
        rec.epochs.push_back(r);
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const LossGradient lg = adjoint_gradient_full(sim, params, loss_target.values,
                                                      config.loss, config.qubit_cap);
        if (epoch % config.record_every == 0) record(epoch, lg.loss, lg.probabilities);
        adam_step(opt, params, lg.grad);
    }

    const StateVector psi = forward(sim, params, config.qubit_cap);
    const Eigen::VectorXd q = probabilities(psi);
    record(config.epochs, loss_value(q, loss_target.values, config.loss), q);

    rec.final_params = std::move(params);
    return rec;
}

namespace detail {

inline std::vector<int> newly_activated(const Topology& topo, int from_per_register,
                                        int to_per_register) {
    const int size = topo.register_size();
    std::vector<int> fresh;
    for (int r = 0; r < topo.register_count(); ++r)
        for (int j = from_per_register; j < to_per_register; ++j)
            fresh.push_back(r * size + j);
    return fresh;
}

} // namespace detail

/// The final circuit a hierarchical schedule produces, without any training:
/// stage 1's block, then per stage an H on each newly activated qubit
/// followed by the stage's layers over the enlarged active set. Used to give
/// the from-scratch baseline an identical ansatz.
inline Circuit build_hierarchical_circuit(const Topology& topo,
                                          const HierarchySchedule& schedule,
                                          Entangler entangler) {
    schedule.validate(topo.register_size());
    Circuit circuit = build_circuit(topo, schedule.stages[0].layers, entangler,
                                    active_qubits_for(topo, schedule.stages[0].active_per_register));
    Eigen::VectorXd params = Eigen::VectorXd::Zero(circuit.n_params);
    for (std::size_t i = 1; i < schedule.stages.size(); ++i) {
        auto [next, next_params] = expand_hierarchy(
            topo, circuit, params,
            detail::newly_activated(topo, schedule.stages[i - 1].active_per_register,
                                    schedule.stages[i].active_per_register),
            schedule.stages[i].layers);
        circuit = std::move(next);
        params = std::move(next_params);
    }
    return circuit;
}

/// Coarse-to-fine training: stage 1 starts from the configured random
/// initialization on the most significant qubits of every register; each
/// later stage expands the circuit (new qubits in |+>, new parameters at 0)
/// and retrains all parameters against the finer-grained target. Every
/// record reports TV against the full-resolution target regardless of how
/// many qubits are active.
inline std::vector<TrainRecord> train_hierarchical(const Topology& topo,
                                                   const HierarchySchedule& schedule,
                                                   Entangler entangler,
                                                   const TargetSpec& target,
                                                   const TrainConfig& config) {
    const int registers = topo.register_count();
    const int size = topo.register_size();
    schedule.validate(size);
    if (target.dimensions() != registers)
        throw std::invalid_argument("target dimension does not match register count");

    const std::vector<int> full_bits(registers, size);
    const ProbabilityVector full_target = sample_target(target, full_bits, config.qubit_cap);

    TrainConfig stage_config = config;
    stage_config.epochs = schedule.epochs_per_stage;
    if (stage_config.tv_bits_per_register == 0) stage_config.tv_bits_per_register = size;

    std::mt19937_64 rng(config.seed);
    Circuit circuit = build_circuit(topo, schedule.stages[0].layers, entangler,
                                    active_qubits_for(topo, schedule.stages[0].active_per_register));
    Eigen::VectorXd params = initial_params(circuit.n_params, config.init, rng);
    AdamState adam = AdamState::fresh(circuit.n_params, config.adam);

    std::vector<TrainRecord> records;
    for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
        const int active = schedule.stages[i].active_per_register;
        const ProbabilityVector stage_target =
            sample_target(target, std::vector<int>(registers, active), config.qubit_cap);
        TrainRecord rec = train(circuit, params, stage_target, stage_config,
                                &full_target, &adam);
        rec.stage_index = static_cast<int>(i);
        params = rec.final_params;
        records.push_back(std::move(rec));

        if (i + 1 < schedule.stages.size()) {
            auto [next, next_params] = expand_hierarchy(
                topo, circuit, params,
                detail::newly_activated(topo, active,
                                        schedule.stages[i + 1].active_per_register),
                schedule.stages[i + 1].layers);
            circuit = std::move(next);
            params = std::move(next_params);
            adam.resize_for_expansion(circuit.n_params);
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Multi-seed sweeps
// ---------------------------------------------------------------------------

struct RunResult {
    std::vector<TrainRecord> stages;
    Circuit circuit;

    double final_tv() const { return stages.back().final_tv(); }
    const Eigen::VectorXd& final_params() const { return stages.back().final_params; }
};

struct SweepSummary {
    int n_seeds = 0;
    double min = 0, p25 = 0, median = 0, p75 = 0, max = 0;
    std::size_t best_index = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> final_tvs;
    std::vector<RunResult> runs;

    const RunResult& best_run() const { return runs[best_index]; }
    std::uint64_t best_seed() const { return seeds[best_index]; }
};

inline double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw std::invalid_argument("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1 - frac) + values[lo + 1] * frac;
}

/// Runs one independent training per seed (up to `jobs` in flight) and
/// aggregates percentile statistics of the final TV. Each run owns its
/// circuit, optimizer state, and work vectors; aggregation happens after all
/// workers join, so results do not depend on scheduling.
inline SweepSummary sweep(const std::function<RunResult(std::uint64_t)>& run,
                          const std::vector<std::uint64_t>& seeds, int jobs = 0) {
    if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
    if (jobs <= 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<int>(jobs, static_cast<int>(seeds.size()));

    SweepSummary summary;
    summary.n_seeds = static_cast<int>(seeds.size());
    summary.seeds = seeds;
    summary.runs.resize(seeds.size());

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(seeds.size());
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
            try {
                summary.runs[i] = run(seeds[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    summary.final_tvs.reserve(seeds.size());
    for (const auto& r : summary.runs) summary.final_tvs.push_back(r.final_tv());
    summary.best_index = static_cast<std::size_t>(
        std::min_element(summary.final_tvs.begin(), summary.final_tvs.end()) -
        summary.final_tvs.begin());
    summary.min = percentile(summary.final_tvs, 0);
    summary.p25 = percentile(summary.final_tvs, 25);
    summary.median = percentile(summary.final_tvs, 50);
    summary.p75 = percentile(summary.final_tvs, 75);
    summary.max = percentile(summary.final_tvs, 100);
    return summary;
}

} // namespace qcbm

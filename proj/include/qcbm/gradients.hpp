#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcbm/ansatz.hpp"
#include "qcbm/distributions.hpp"
#include "qcbm/statevec.hpp"

namespace qcbm {

enum class LossKind { L2, KL };

inline const char* to_string(LossKind k) { return k == LossKind::L2 ? "L2" : "KL"; }

namespace detail {

inline void check_loss_inputs(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
    if (q.size() != p.size())
        throw std::invalid_argument("loss requires equal-length distributions");
    if (std::abs(q.sum() - 1.0) > 1e-8 || std::abs(p.sum() - 1.0) > 1e-8)
        throw std::invalid_argument("loss inputs must be normalized");
}

} // namespace detail

/// Loss between the generated distribution q and the target p.
///   L2: sum_x (q_x - p_x)^2
///   KL: sum_{x: p_x > 0} p_x log(p_x / max(q_x, eps))
inline double loss_value(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                         LossKind kind) {
    detail::check_loss_inputs(q, p);
    if (kind == LossKind::L2) return (q - p).squaredNorm();
    return kl_divergence(p, q);
}

/// dLoss/dq, one entry per bitstring. For KL the chain-rule form
/// -p_x / max(q_x, eps) is used; entries with p_x = 0 are exactly 0.
inline Eigen::VectorXd loss_grad_q(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                   LossKind kind) {
    detail::check_loss_inputs(q, p);
    if (kind == LossKind::L2) return 2.0 * (q - p);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q.size());
    for (std::int64_t i = 0; i < q.size(); ++i)
        if (p[i] > 0) g[i] = -p[i] / std::max(q[i], kKlClampEps);
    return g;
}

/// Execution counters for the gradient routines. `gate_applications` counts
/// individual gate, inverse-gate, and generator applications to full
/// state-sized vectors; `state_allocations` counts state-sized buffers
/// brought to life by the routine.
struct GradientStats {
    std::int64_t gate_applications = 0;
    int state_allocations = 0;
};

/// Runs the circuit on |0...0>: U_n ... U_1 |psi_0>.
inline StateVector forward(const Circuit& circuit, const Eigen::VectorXd& params,
                           int qubit_cap = kDefaultQubitCap,
                           std::int64_t* app_counter = nullptr) {
    if (params.size() != circuit.n_params)
        throw std::invalid_argument("parameter vector length " +
                                    std::to_string(params.size()) +
                                    " does not match circuit n_params " +
                                    std::to_string(circuit.n_params));
    StateVector psi = zero_state(circuit.n_qubits, qubit_cap);
    for (const Gate& g : circuit.gates) {
        apply_gate(psi, g,
                   g.param_slot >= 0 ? std::optional<double>(params[g.param_slot])
                                     : std::nullopt);
        if (app_counter) ++*app_counter;
    }
    return psi;
}

struct LossGradient {
    Eigen::VectorXd grad;
    double loss = 0;
    Eigen::VectorXd probabilities;
};

/// Adjoint-mode gradient of an amplitude-functional loss.
///
/// The boundary ket |b_n> = diag(dLoss/dq) |psi_n> seeds a backward sweep in
/// which both |psi> and |b> retreat through the inverse gates; each gradient
/// element is read off as 2 Re <b_{i+1}| iG |psi_i> using one scratch vector.
/// Three state-sized vectors are live at any point, and the work is linear
/// in the number of parameters.
inline LossGradient adjoint_gradient_full(const Circuit& circuit,
                                          const Eigen::VectorXd& params,
                                          const Eigen::VectorXd& target, LossKind kind,
                                          int qubit_cap = kDefaultQubitCap,
                                          GradientStats* stats = nullptr) {
    if (target.size() != (std::int64_t{1} << circuit.n_qubits))
        throw std::invalid_argument("target length does not match 2^n_qubits");

    GradientStats local;
    StateVector psi = forward(circuit, params, qubit_cap, &local.gate_applications);
    local.state_allocations = 1;

    LossGradient out;
    out.probabilities = probabilities(psi);
    out.loss = loss_value(out.probabilities, target, kind);
    out.grad = Eigen::VectorXd::Zero(circuit.n_params);

    if (circuit.n_params > 0) {
        const Eigen::VectorXd dq = loss_grad_q(out.probabilities, target, kind);
        StateVector lambda;
        lambda.n_qubits = psi.n_qubits;
        lambda.amps = dq.cast<std::complex<double>>().cwiseProduct(psi.amps);
        StateVector scratch;
        scratch.n_qubits = psi.n_qubits;
        scratch.amps.resize(psi.amps.size());
        local.state_allocations += 2;

        for (auto it = circuit.gates.rbegin(); it != circuit.gates.rend(); ++it) {
            const Gate& g = *it;
            const std::optional<double> theta =
                g.param_slot >= 0 ? std::optional<double>(params[g.param_slot])
                                  : std::nullopt;
            if (g.parameterized()) {
                scratch.amps = psi.amps;
                apply_generator(scratch, g);
                ++local.gate_applications;
                out.grad[g.param_slot] = 2.0 * inner_product(lambda, scratch).real();
            }
            apply_gate_dagger(psi, g, theta);
            apply_gate_dagger(lambda, g, theta);
            local.gate_applications += 2;
        }
    }

    if (stats) *stats = local;
    return out;
}

inline Eigen::VectorXd adjoint_gradient(const Circuit& circuit,
                                        const Eigen::VectorXd& params,
                                        const Eigen::VectorXd& target, LossKind kind,
                                        int qubit_cap = kDefaultQubitCap) {
    return adjoint_gradient_full(circuit, params, target, kind, qubit_cap).grad;
}

/// Central-difference gradient (L(t+h) - L(t-h)) / 2h per parameter. Serves
/// as the independent oracle for the adjoint path.
inline Eigen::VectorXd finite_difference_gradient(const Circuit& circuit,
                                                  const Eigen::VectorXd& params,
                                                  const Eigen::VectorXd& target,
                                                  LossKind kind, double h = 1e-5,
                                                  int qubit_cap = kDefaultQubitCap,
                                                  GradientStats* stats = nullptr) {
    if (h <= 0) throw std::invalid_argument("finite-difference step must be positive");
    if (target.size() != (std::int64_t{1} << circuit.n_qubits))
        throw std::invalid_argument("target length does not match 2^n_qubits");
    GradientStats local;
    auto loss_at = [&](const Eigen::VectorXd& p) {
        const StateVector psi = forward(circuit, p, qubit_cap, &local.gate_applications);
        return loss_value(probabilities(psi), target, kind);
    };
    Eigen::VectorXd grad(circuit.n_params);
    Eigen::VectorXd shifted = params;
    for (int i = 0; i < circuit.n_params; ++i) {
        shifted[i] = params[i] + h;
        const double up = loss_at(shifted);
        shifted[i] = params[i] - h;
        const double down = loss_at(shifted);
        shifted[i] = params[i];
        grad[i] = (up - down) / (2 * h);
    }
    if (stats) *stats = local;
    return grad;
}

enum class GradientMethod { Adjoint, FiniteDiff };

inline const char* to_string(GradientMethod m) {
    return m == GradientMethod::Adjoint ? "adjoint" : "finite_diff";
}

/// Closed-form gate-application counts for one full gradient evaluation.
/// Adjoint: 2|gates| + 2 * (parameterized gates); finite differences:
/// 2 * n_params * |gates|. A circuit with no parameters costs one forward
/// evaluation either way.
inline std::int64_t count_gate_applications(const Circuit& circuit,
                                            GradientMethod method) {
    const auto gates = static_cast<std::int64_t>(circuit.gates.size());
    std::int64_t parameterized = 0;
    for (const Gate& g : circuit.gates)
        if (g.parameterized()) ++parameterized;
    if (parameterized == 0) return gates;
    if (method == GradientMethod::Adjoint) return 2 * gates + 2 * parameterized;
    return 2 * static_cast<std::int64_t>(circuit.n_params) * gates;
}

struct BenchRow {
    GradientMethod method = GradientMethod::Adjoint;
    int n_qubits = 0;
    int n_params = 0;
    std::int64_t gate_applications = 0;
    double wall_ms = 0;
};

/// Times one gradient evaluation per method on the given circuit (averaged
/// over `repeats` runs).
inline std::vector<BenchRow> benchmark_gradients(const Circuit& circuit,
                                                 const Eigen::VectorXd& params,
                                                 const Eigen::VectorXd& target,
                                                 LossKind kind, int repeats = 1,
                                                 int qubit_cap = kDefaultQubitCap) {
    if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    for (GradientMethod method : {GradientMethod::Adjoint, GradientMethod::FiniteDiff}) {
        BenchRow row;
        row.method = method;
        row.n_qubits = circuit.n_qubits;
        row.n_params = circuit.n_params;
        row.gate_applications = count_gate_applications(circuit, method);
        const auto start = clock::now();
        for (int r = 0; r < repeats; ++r) {
            if (method == GradientMethod::Adjoint)
                adjoint_gradient(circuit, params, target, kind, qubit_cap);
            else
                finite_difference_gradient(circuit, params, target, kind, 1e-5,
                                           qubit_cap);
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start)
                          .count() / repeats;
        rows.push_back(row);
    }
    return rows;
}

inline void write_benchmark_csv(const std::vector<BenchRow>& rows, std::ostream& os) {
    os << "method,n_qubits,n_params,gate_applications,wall_ms\n";
    for (const auto& r : rows)
        os << to_string(r.method) << ',' << r.n_qubits << ',' << r.n_params << ','
           << r.gate_applications << ',' << r.wall_ms << '\n';
}

} // namespace qcbm

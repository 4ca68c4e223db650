#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace qcbm {

/// Hard ceiling on simulated qubits unless overridden per run. Two work
/// vectors of 2^24 complex doubles sit at roughly 512 MiB.
inline constexpr int kDefaultQubitCap = 24;

enum class GateKind { RY, RZZ, CX, H };

inline const char* to_string(GateKind k) {
    switch (k) {
    case GateKind::RY: return "RY";
    case GateKind::RZZ: return "RZZ";
    case GateKind::CX: return "CX";
    case GateKind::H: return "H";
    }
    return "?";
}

inline bool is_parameterized(GateKind k) {
    return k == GateKind::RY || k == GateKind::RZZ;
}

inline int gate_arity(GateKind k) {
    return (k == GateKind::RZZ || k == GateKind::CX) ? 2 : 1;
}

/// One circuit element. Two-qubit kinds use both targets (for CX, targets[0]
/// is the control); single-qubit kinds leave targets[1] at -1. Parameterized
/// kinds (RY, RZZ) carry a slot index into the parameter vector.
struct Gate {
    GateKind kind = GateKind::RY;
    std::array<int, 2> targets{0, -1};
    int param_slot = -1;

    bool parameterized() const { return is_parameterized(kind); }
    int arity() const { return gate_arity(kind); }

    static Gate ry(int q, int slot) { return make(GateKind::RY, q, -1, slot); }
    static Gate rzz(int a, int b, int slot) { return make(GateKind::RZZ, a, b, slot); }
    static Gate cx(int control, int target) { return make(GateKind::CX, control, target, -1); }
    static Gate h(int q) { return make(GateKind::H, q, -1, -1); }

    static Gate make(GateKind kind, int q0, int q1, int slot) {
        Gate g;
        g.kind = kind;
        g.targets = {q0, q1};
        g.param_slot = slot;
        if (gate_arity(kind) == 2 && q0 == q1)
            throw std::invalid_argument(std::string(to_string(kind)) +
                                        " gate requires two distinct targets");
        if (gate_arity(kind) == 1 && q1 != -1)
            throw std::invalid_argument(std::string(to_string(kind)) +
                                        " gate takes a single target");
        if (is_parameterized(kind) != (slot >= 0))
            throw std::invalid_argument(std::string(to_string(kind)) +
                                        (slot >= 0 ? " gate carries no parameter slot"
                                                   : " gate requires a parameter slot"));
        return g;
    }
};

/// Dense 2^n-amplitude pure state. Qubit 0 is the MOST significant bit of
/// the basis-state index: index(b) = sum_k b_k * 2^(n-1-k). Interpreting the
/// bitstring as a binary fraction, qubit 0 carries the coarsest digit.
template <typename Scalar = double>
struct StateVectorT {
    using Complex = std::complex<Scalar>;
    using Amplitudes = Eigen::Vector<Complex, Eigen::Dynamic>;

    int n_qubits = 0;
    Amplitudes amps;

    std::size_t dim() const { return std::size_t{1} << n_qubits; }
    Scalar squared_norm() const { return amps.squaredNorm(); }
};

using StateVector = StateVectorT<double>;

/// Bit mask selecting qubit q under the most-significant-first convention.
inline std::uint64_t qubit_mask(int n_qubits, int q) {
    return std::uint64_t{1} << (n_qubits - 1 - q);
}

template <typename Scalar = double>
StateVectorT<Scalar> zero_state(int n_qubits, int qubit_cap = kDefaultQubitCap) {
    if (n_qubits < 1)
        throw std::invalid_argument("qubit count must be at least 1");
    if (n_qubits > qubit_cap)
        throw std::invalid_argument("qubit count " + std::to_string(n_qubits) +
                                    " exceeds qubit cap " + std::to_string(qubit_cap));
    StateVectorT<Scalar> s;
    s.n_qubits = n_qubits;
    s.amps = StateVectorT<Scalar>::Amplitudes::Zero(std::int64_t{1} << n_qubits);
    s.amps[0] = typename StateVectorT<Scalar>::Complex{1, 0};
    return s;
}

namespace detail {

template <typename Scalar>
void check_target(const StateVectorT<Scalar>& s, int q) {
    if (q < 0 || q >= s.n_qubits)
        throw std::invalid_argument("gate target " + std::to_string(q) +
                                    " out of range for " + std::to_string(s.n_qubits) +
                                    " qubits");
}

// In-place 2x2 update over all index pairs split by qubit q:
//   [a'; b'] = [[u00 u01]; [u10 u11]] [a; b]
template <typename Scalar>
void apply_single_qubit(StateVectorT<Scalar>& s, int q,
                        std::complex<Scalar> u00, std::complex<Scalar> u01,
                        std::complex<Scalar> u10, std::complex<Scalar> u11) {
    const std::uint64_t mask = qubit_mask(s.n_qubits, q);
    const std::uint64_t dim = s.dim();
    auto* a = s.amps.data();
    for (std::uint64_t base = 0; base < dim; base += 2 * mask) {
        for (std::uint64_t lo = base; lo < base + mask; ++lo) {
            const std::uint64_t hi = lo | mask;
            const auto x0 = a[lo];
            const auto x1 = a[hi];
            a[lo] = u00 * x0 + u01 * x1;
            a[hi] = u10 * x0 + u11 * x1;
        }
    }
}

} // namespace detail

/// Applies one gate in place. `theta` (radians) must be supplied exactly for
/// parameterized kinds. Conventions: RY(t) = exp(-i t Y / 2),
/// RZZ(t) = exp(-i t ZZ / 2), CX and H the standard matrices. Every kind is
/// unitary, so the norm is preserved.
template <typename Scalar>
void apply_gate(StateVectorT<Scalar>& s, const Gate& g,
                std::optional<std::type_identity_t<Scalar>> theta = std::nullopt) {
    using C = std::complex<Scalar>;
    if (g.parameterized() != theta.has_value())
        throw std::invalid_argument(std::string(to_string(g.kind)) +
                                    (theta ? " gate takes no angle" : " gate requires an angle"));
    detail::check_target(s, g.targets[0]);
    if (g.arity() == 2) {
        detail::check_target(s, g.targets[1]);
        if (g.targets[0] == g.targets[1])
            throw std::invalid_argument("duplicate gate targets");
    }

    switch (g.kind) {
    case GateKind::RY: {
        const Scalar c = std::cos(*theta / 2), sn = std::sin(*theta / 2);
        detail::apply_single_qubit(s, g.targets[0], C{c, 0}, C{-sn, 0}, C{sn, 0}, C{c, 0});
        break;
    }
    case GateKind::H: {
        const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
        detail::apply_single_qubit(s, g.targets[0], C{r, 0}, C{r, 0}, C{r, 0}, C{-r, 0});
        break;
    }
    case GateKind::RZZ: {
        // Diagonal: e^{-i t/2} on equal bits (ZZ = +1), e^{+i t/2} otherwise.
        const C even = std::polar(Scalar(1), -*theta / 2);
        const C odd = std::polar(Scalar(1), *theta / 2);
        const std::uint64_t m0 = qubit_mask(s.n_qubits, g.targets[0]);
        const std::uint64_t m1 = qubit_mask(s.n_qubits, g.targets[1]);
        const std::uint64_t dim = s.dim();
        auto* a = s.amps.data();
        for (std::uint64_t i = 0; i < dim; ++i)
            a[i] *= (((i & m0) != 0) == ((i & m1) != 0)) ? even : odd;
        break;
    }
    case GateKind::CX: {
        const std::uint64_t mc = qubit_mask(s.n_qubits, g.targets[0]);
        const std::uint64_t mt = qubit_mask(s.n_qubits, g.targets[1]);
        const std::uint64_t dim = s.dim();
        auto* a = s.amps.data();
        for (std::uint64_t i = 0; i < dim; ++i)
            if ((i & mc) && !(i & mt)) std::swap(a[i], a[i | mt]);
        break;
    }
    }
}

/// Applies the inverse gate. Rotations invert by negating the angle; CX and
/// H are involutions.
template <typename Scalar>
void apply_gate_dagger(StateVectorT<Scalar>& s, const Gate& g,
                       std::optional<std::type_identity_t<Scalar>> theta = std::nullopt) {
    apply_gate(s, g, theta ? std::optional<Scalar>(-*theta) : std::nullopt);
}

/// Multiplies the state by iG, where G is the Hermitian generator matching
/// the apply_gate convention: G_RY = -Y/2 on the target, G_RZZ = -(ZZ)/2.
/// With U(t) = exp(i G t), this makes dU/dt = iG U. Not unitary; the norm is
/// not preserved.
template <typename Scalar>
void apply_generator(StateVectorT<Scalar>& s, const Gate& g) {
    using C = std::complex<Scalar>;
    if (!g.parameterized())
        throw std::invalid_argument(std::string(to_string(g.kind)) +
                                    " gate has no generator");
    detail::check_target(s, g.targets[0]);
    switch (g.kind) {
    case GateKind::RY:
        // iG = -iY/2 = [[0, -1/2], [1/2, 0]]
        detail::apply_single_qubit(s, g.targets[0], C{0, 0}, C{Scalar(-0.5), 0},
                                   C{Scalar(0.5), 0}, C{0, 0});
        break;
    case GateKind::RZZ: {
        // iG = -i ZZ / 2: diagonal -i/2 on equal bits, +i/2 otherwise.
        detail::check_target(s, g.targets[1]);
        const C even{0, Scalar(-0.5)};
        const C odd{0, Scalar(0.5)};
        const std::uint64_t m0 = qubit_mask(s.n_qubits, g.targets[0]);
        const std::uint64_t m1 = qubit_mask(s.n_qubits, g.targets[1]);
        const std::uint64_t dim = s.dim();
        auto* a = s.amps.data();
        for (std::uint64_t i = 0; i < dim; ++i)
            a[i] *= (((i & m0) != 0) == ((i & m1) != 0)) ? even : odd;
        break;
    }
    default:
        break;
    }
}

/// Measurement probabilities |c_x|^2 in index order.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> probabilities(const StateVectorT<Scalar>& s) {
    return s.amps.array().abs2().matrix();
}

/// <a|b> with the bra conjugated (Eigen's dot convention).
template <typename Scalar>
std::complex<Scalar> inner_product(const StateVectorT<Scalar>& a,
                                   const StateVectorT<Scalar>& b) {
    if (a.n_qubits != b.n_qubits)
        throw std::invalid_argument("inner product requires equal qubit counts");
    return a.amps.dot(b.amps);
}

} // namespace qcbm

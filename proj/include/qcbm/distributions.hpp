#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcbm/statevec.hpp"

namespace qcbm {

/// Clamp applied to q inside KL terms so hard-zero amplitudes cannot produce
/// NaN. Terms with p_x = 0 contribute nothing to either the loss or its
/// gradient.
inline constexpr double kKlClampEps = 1e-12;

/// Discretized distribution over 2^resolution bitstrings. `register_shape`
/// lists bits per register; registers concatenate most-significant-first
/// into the global index (|b_A b_B b_C>), and bits inside a register are
/// most-significant-first as well.
struct ProbabilityVector {
    Eigen::VectorXd values;
    std::vector<int> register_shape;

    ProbabilityVector() = default;
    ProbabilityVector(Eigen::VectorXd v, std::vector<int> shape)
        : values(std::move(v)), register_shape(std::move(shape)) {
        validate();
    }

    int resolution() const {
        return std::accumulate(register_shape.begin(), register_shape.end(), 0);
    }
    int registers() const { return static_cast<int>(register_shape.size()); }

    void validate() const {
        if (register_shape.empty())
            throw std::invalid_argument("register_shape must not be empty");
        for (int bits : register_shape)
            if (bits < 0)
                throw std::invalid_argument("register bit counts must be non-negative");
        if (values.size() != (std::int64_t{1} << resolution()))
            throw std::invalid_argument("probability vector length " +
                                        std::to_string(values.size()) +
                                        " does not match resolution " +
                                        std::to_string(resolution()));
        if ((values.array() < 0).any())
            throw std::invalid_argument("probabilities must be non-negative");
        if (std::abs(values.sum() - 1.0) > 1e-10)
            throw std::invalid_argument("probabilities must sum to 1");
    }
};

namespace detail {

// Per-register digits of a global index, most significant register first.
inline void digits_of(std::uint64_t index, const std::vector<int>& shape,
                      std::vector<std::uint64_t>& out) {
    const int r = static_cast<int>(shape.size());
    out.resize(r);
    for (int i = r - 1; i >= 0; --i) {
        out[i] = index & ((std::uint64_t{1} << shape[i]) - 1);
        index >>= shape[i];
    }
}

inline std::uint64_t index_of(const std::vector<std::uint64_t>& digits,
                              const std::vector<int>& shape) {
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < shape.size(); ++i)
        index = (index << shape[i]) | digits[i];
    return index;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Target specifications
// ---------------------------------------------------------------------------

struct GaussianComponent {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
};

/// Analytic target distribution. Univariate kinds live on [domain_lo,
/// domain_hi]; the multivariate Gaussian is restricted to the unit cube.
struct TargetSpec {
    enum class Kind { UnivariateGaussian, GaussianMixture, MultivariateGaussian };

    Kind kind = Kind::UnivariateGaussian;
    double mean = 0.0;
    double variance = 1.0;
    std::vector<GaussianComponent> components;
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;

    static TargetSpec gaussian(double mean, double variance, double lo = 0.0,
                               double hi = 1.0) {
        TargetSpec t;
        t.kind = Kind::UnivariateGaussian;
        t.mean = mean;
        t.variance = variance;
        t.domain_lo = lo;
        t.domain_hi = hi;
        t.validate();
        return t;
    }

    static TargetSpec mixture(std::vector<GaussianComponent> comps, double lo = 0.0,
                              double hi = 1.0) {
        TargetSpec t;
        t.kind = Kind::GaussianMixture;
        t.components = std::move(comps);
        t.domain_lo = lo;
        t.domain_hi = hi;
        t.validate();
        return t;
    }

    static TargetSpec multivariate(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
        TargetSpec t;
        t.kind = Kind::MultivariateGaussian;
        t.mu = std::move(mu);
        t.sigma = std::move(sigma);
        t.validate();
        return t;
    }

    int dimensions() const {
        return kind == Kind::MultivariateGaussian ? static_cast<int>(mu.size()) : 1;
    }

    void validate() const {
        switch (kind) {
        case Kind::UnivariateGaussian:
            if (variance <= 0)
                throw std::invalid_argument("variance must be positive");
            break;
        case Kind::GaussianMixture: {
            if (components.empty())
                throw std::invalid_argument("mixture needs at least one component");
            double wsum = 0;
            for (const auto& c : components) {
                if (c.variance <= 0)
                    throw std::invalid_argument("component variance must be positive");
                if (c.weight < 0)
                    throw std::invalid_argument("component weights must be non-negative");
                wsum += c.weight;
            }
            if (std::abs(wsum - 1.0) > 1e-8)
                throw std::invalid_argument("mixture weights must sum to 1");
            break;
        }
        case Kind::MultivariateGaussian: {
            if (mu.size() < 1)
                throw std::invalid_argument("mean vector must not be empty");
            if (sigma.rows() != mu.size() || sigma.cols() != mu.size())
                throw std::invalid_argument("covariance shape does not match mean");
            if (!sigma.isApprox(sigma.transpose(), 1e-12))
                throw std::invalid_argument("covariance must be symmetric");
            Eigen::LLT<Eigen::MatrixXd> llt(sigma);
            if (llt.info() != Eigen::Success)
                throw std::invalid_argument("covariance must be positive-definite");
            break;
        }
        }
        if (kind != Kind::MultivariateGaussian && domain_hi <= domain_lo)
            throw std::invalid_argument("domain must have positive length");
    }
};

/// Discretizes the target by evaluating its (unnormalized) pdf at the
/// midpoint grid x_b = lo + (hi - lo)(b + 1/2)/2^m per dimension, then
/// normalizing the resulting vector. `register_bits` gives bits per
/// register, one entry per target dimension.
inline ProbabilityVector sample_target(const TargetSpec& spec,
                                       const std::vector<int>& register_bits,
                                       int qubit_cap = kDefaultQubitCap) {
    spec.validate();
    if (static_cast<int>(register_bits.size()) != spec.dimensions())
        throw std::invalid_argument("register count " +
                                    std::to_string(register_bits.size()) +
                                    " does not match target dimension " +
                                    std::to_string(spec.dimensions()));
    int total_bits = 0;
    for (int bits : register_bits) {
        if (bits < 1)
            throw std::invalid_argument("register bit counts must be at least 1");
        total_bits += bits;
    }
    if (total_bits > qubit_cap)
        throw std::invalid_argument("resolution " + std::to_string(total_bits) +
                                    " exceeds qubit cap " + std::to_string(qubit_cap));

    const std::int64_t n = std::int64_t{1} << total_bits;
    Eigen::VectorXd values(n);

    if (spec.kind == TargetSpec::Kind::MultivariateGaussian) {
        const Eigen::MatrixXd prec = spec.sigma.llt().solve(
            Eigen::MatrixXd::Identity(spec.mu.size(), spec.mu.size()));
        std::vector<std::uint64_t> digits;
        Eigen::VectorXd x(spec.mu.size());
        for (std::int64_t i = 0; i < n; ++i) {
            detail::digits_of(static_cast<std::uint64_t>(i), register_bits, digits);
            for (int r = 0; r < spec.dimensions(); ++r)
                x[r] = (static_cast<double>(digits[r]) + 0.5) /
                       static_cast<double>(std::uint64_t{1} << register_bits[r]);
            const Eigen::VectorXd d = x - spec.mu;
            values[i] = std::exp(-0.5 * d.dot(prec * d));
        }
    } else {
        const double width = spec.domain_hi - spec.domain_lo;
        for (std::int64_t i = 0; i < n; ++i) {
            const double x = spec.domain_lo +
                             width * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
            double pdf = 0;
            if (spec.kind == TargetSpec::Kind::UnivariateGaussian) {
                pdf = std::exp(-0.5 * (x - spec.mean) * (x - spec.mean) / spec.variance);
            } else {
                for (const auto& c : spec.components)
                    pdf += c.weight / std::sqrt(c.variance) *
                           std::exp(-0.5 * (x - c.mean) * (x - c.mean) / c.variance);
            }
            values[i] = pdf;
        }
    }

    values /= values.sum();
    return ProbabilityVector(std::move(values), register_bits);
}

// ---------------------------------------------------------------------------
// Resolution changes
// ---------------------------------------------------------------------------

/// Marginalizes over the `drop_bits[r]` least significant bits of each
/// register, adding the probability mass of neighboring bins. Bits come off
/// one at a time, so every output bin is built from pairwise sums; merging
/// the two halves of a uniformly split bin is then exact, which makes
/// coarse_grain(expand_uniform(q, k), k) reproduce q bit for bit.
inline ProbabilityVector coarse_grain(const ProbabilityVector& q,
                                      const std::vector<int>& drop_bits) {
    if (drop_bits.size() != q.register_shape.size())
        throw std::invalid_argument("drop_bits must list one entry per register");
    for (std::size_t r = 0; r < drop_bits.size(); ++r) {
        if (drop_bits[r] < 0)
            throw std::invalid_argument("drop_bits must be non-negative");
        if (drop_bits[r] > q.register_shape[r])
            throw std::invalid_argument("cannot drop " + std::to_string(drop_bits[r]) +
                                        " of " + std::to_string(q.register_shape[r]) +
                                        " bits in register " + std::to_string(r));
    }

    Eigen::VectorXd values = q.values;
    std::vector<int> shape = q.register_shape;
    for (std::size_t r = 0; r < drop_bits.size(); ++r) {
        for (int pass = 0; pass < drop_bits[r]; ++pass) {
            int low = 0;  // position of register r's least significant bit
            for (std::size_t s = r + 1; s < shape.size(); ++s) low += shape[s];
            const std::uint64_t low_mask = (std::uint64_t{1} << low) - 1;
            Eigen::VectorXd out(values.size() / 2);
            for (std::int64_t i = 0; i < out.size(); ++i) {
                const auto u = static_cast<std::uint64_t>(i);
                const std::uint64_t child = ((u >> low) << (low + 1)) | (u & low_mask);
                out[i] = values[static_cast<std::int64_t>(child)] +
                         values[static_cast<std::int64_t>(child | (std::uint64_t{1} << low))];
            }
            values = std::move(out);
            --shape[r];
        }
    }
    return ProbabilityVector(std::move(values), std::move(shape));
}

/// Splits each bin uniformly over 2^(sum add_bits) descendants; the result
/// equals the distribution of the same circuit with that many extra |+>
/// qubits appended as least significant digits of each register.
inline ProbabilityVector expand_uniform(const ProbabilityVector& q,
                                        const std::vector<int>& add_bits,
                                        int qubit_cap = kDefaultQubitCap) {
    if (add_bits.size() != q.register_shape.size())
        throw std::invalid_argument("add_bits must list one entry per register");
    std::vector<int> new_shape(q.register_shape.size());
    int added = 0;
    for (std::size_t r = 0; r < add_bits.size(); ++r) {
        if (add_bits[r] < 0)
            throw std::invalid_argument("add_bits must be non-negative");
        new_shape[r] = q.register_shape[r] + add_bits[r];
        added += add_bits[r];
    }
    const int new_total = q.resolution() + added;
    if (new_total > qubit_cap)
        throw std::invalid_argument("resolution " + std::to_string(new_total) +
                                    " exceeds qubit cap " + std::to_string(qubit_cap));

    const double scale = 1.0 / static_cast<double>(std::uint64_t{1} << added);
    Eigen::VectorXd out(std::int64_t{1} << new_total);
    std::vector<std::uint64_t> digits;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        detail::digits_of(static_cast<std::uint64_t>(i), new_shape, digits);
        for (std::size_t r = 0; r < digits.size(); ++r)
            digits[r] >>= add_bits[r];
        out[i] = q.values[static_cast<std::int64_t>(
                     detail::index_of(digits, q.register_shape))] * scale;
    }
    return ProbabilityVector(std::move(out), std::move(new_shape));
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// KL(p|q) = sum_{x: p_x > 0} p_x log(p_x / max(q_x, eps)).
inline double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("KL divergence requires equal lengths");
    double kl = 0;
    for (std::int64_t i = 0; i < p.size(); ++i)
        if (p[i] > 0)
            kl += p[i] * std::log(p[i] / std::max(q[i], kKlClampEps));
    return kl;
}

/// TV(p,q) = (1/2) sum |p_x - q_x|, in [0, 1].
inline double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("TV distance requires equal lengths");
    return 0.5 * (p - q).lpNorm<1>();
}

inline void check_same_shape(const ProbabilityVector& p, const ProbabilityVector& q) {
    if (p.register_shape != q.register_shape)
        throw std::invalid_argument("distributions have mismatched resolutions");
}

inline double kl_divergence(const ProbabilityVector& p, const ProbabilityVector& q) {
    check_same_shape(p, q);
    return kl_divergence(p.values, q.values);
}

inline double tv_distance(const ProbabilityVector& p, const ProbabilityVector& q) {
    check_same_shape(p, q);
    return tv_distance(p.values, q.values);
}

/// TV_m: brings both distributions to m bits per register (expanding the
/// smaller with |+> padding, marginalizing the larger), then takes the TV
/// distance.
inline double tv_at_resolution(const ProbabilityVector& p, const ProbabilityVector& q,
                               int bits_per_register, int qubit_cap = kDefaultQubitCap) {
    if (p.registers() != q.registers())
        throw std::invalid_argument("distributions have different register counts");
    if (bits_per_register < 1)
        throw std::invalid_argument("bits per register must be at least 1");
    if (bits_per_register * p.registers() > qubit_cap)
        throw std::invalid_argument("resolution " +
                                    std::to_string(bits_per_register * p.registers()) +
                                    " exceeds qubit cap " + std::to_string(qubit_cap));

    auto rescale = [&](const ProbabilityVector& v) {
        std::vector<int> drop(v.register_shape.size(), 0), add(v.register_shape.size(), 0);
        bool drops = false, adds = false;
        for (std::size_t r = 0; r < v.register_shape.size(); ++r) {
            const int delta = bits_per_register - v.register_shape[r];
            if (delta > 0) { add[r] = delta; adds = true; }
            if (delta < 0) { drop[r] = -delta; drops = true; }
        }
        ProbabilityVector out = v;
        if (drops) out = coarse_grain(out, drop);
        if (adds) out = expand_uniform(out, add, qubit_cap);
        return out;
    };

    return tv_distance(rescale(p), rescale(q));
}

} // namespace qcbm

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qcbm/statevec.hpp"

namespace qcbm {

enum class Entangler { RZZ, CX };
enum class InterRegister { Chain, FullTriangle };

inline const char* to_string(Entangler e) {
    return e == Entangler::RZZ ? "RZZ" : "CX";
}

/// Connectivity descriptor. Grid2D lays rows*cols qubits out row-major.
/// MultiRegister stacks `registers` copies of a per-register grid; register
/// r occupies global qubits [r*size, (r+1)*size) and corresponding positions
/// of neighboring registers are linked (Chain: A-B, B-C; FullTriangle links
/// every register pair).
struct Topology {
    enum class Kind { Line, Ring, Grid2D, AllToAll, MultiRegister };

    Kind kind = Kind::Line;
    int n_qubits = 0;
    int rows = 0, cols = 0;
    int registers = 1;
    int reg_rows = 0, reg_cols = 0;
    InterRegister inter = InterRegister::Chain;

    static Topology line(int n) { return basic(Kind::Line, n); }
    static Topology ring(int n) { return basic(Kind::Ring, n); }
    static Topology all_to_all(int n) { return basic(Kind::AllToAll, n); }

    static Topology grid(int rows, int cols) {
        Topology t;
        t.kind = Kind::Grid2D;
        t.rows = rows;
        t.cols = cols;
        t.n_qubits = rows * cols;
        return t;
    }

    static Topology multi_register(int registers, int reg_rows, int reg_cols,
                                   InterRegister inter = InterRegister::Chain) {
        Topology t;
        t.kind = Kind::MultiRegister;
        t.registers = registers;
        t.reg_rows = reg_rows;
        t.reg_cols = reg_cols;
        t.inter = inter;
        t.n_qubits = registers * reg_rows * reg_cols;
        return t;
    }

    int register_size() const {
        return kind == Kind::MultiRegister ? reg_rows * reg_cols : n_qubits;
    }
    int register_count() const { return kind == Kind::MultiRegister ? registers : 1; }

private:
    static Topology basic(Kind kind, int n) {
        Topology t;
        t.kind = kind;
        t.n_qubits = n;
        return t;
    }
};

using Edge = std::pair<int, int>;

namespace detail {

inline void add_edge(std::set<Edge>& edges, int a, int b) {
    if (a == b) throw std::logic_error("self-loop edge");
    edges.insert({std::min(a, b), std::max(a, b)});
}

inline void add_grid_edges(std::set<Edge>& edges, int rows, int cols, int offset) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const int q = offset + r * cols + c;
            if (c + 1 < cols) add_edge(edges, q, q + 1);
            if (r + 1 < rows) add_edge(edges, q, q + cols);
        }
}

} // namespace detail

/// Canonical sorted edge list for a topology (each unordered pair once,
/// smaller index first).
inline std::vector<Edge> build_topology(const Topology& t) {
    if (t.n_qubits < 1)
        throw std::invalid_argument("topology needs at least 1 qubit");
    std::set<Edge> edges;
    switch (t.kind) {
    case Topology::Kind::Line:
        for (int q = 0; q + 1 < t.n_qubits; ++q) detail::add_edge(edges, q, q + 1);
        break;
    case Topology::Kind::Ring:
        for (int q = 0; q + 1 < t.n_qubits; ++q) detail::add_edge(edges, q, q + 1);
        if (t.n_qubits > 2) detail::add_edge(edges, t.n_qubits - 1, 0);
        break;
    case Topology::Kind::Grid2D:
        if (t.rows < 1 || t.cols < 1)
            throw std::invalid_argument("grid dimensions must be positive");
        if (t.rows * t.cols != t.n_qubits)
            throw std::invalid_argument("grid " + std::to_string(t.rows) + "x" +
                                        std::to_string(t.cols) + " does not cover " +
                                        std::to_string(t.n_qubits) + " qubits");
        detail::add_grid_edges(edges, t.rows, t.cols, 0);
        break;
    case Topology::Kind::AllToAll:
        for (int a = 0; a < t.n_qubits; ++a)
            for (int b = a + 1; b < t.n_qubits; ++b) detail::add_edge(edges, a, b);
        break;
    case Topology::Kind::MultiRegister: {
        if (t.registers < 2)
            throw std::invalid_argument("multi-register topology needs at least 2 registers");
        if (t.reg_rows < 1 || t.reg_cols < 1)
            throw std::invalid_argument("register grid dimensions must be positive");
        const int size = t.reg_rows * t.reg_cols;
        if (t.registers * size != t.n_qubits)
            throw std::invalid_argument("qubit count " + std::to_string(t.n_qubits) +
                                        " is not divisible into " +
                                        std::to_string(t.registers) + " registers of " +
                                        std::to_string(size));
        for (int r = 0; r < t.registers; ++r)
            detail::add_grid_edges(edges, t.reg_rows, t.reg_cols, r * size);
        for (int a = 0; a < t.registers; ++a)
            for (int b = a + 1; b < t.registers; ++b) {
                if (t.inter == InterRegister::Chain && b != a + 1) continue;
                for (int i = 0; i < size; ++i)
                    detail::add_edge(edges, a * size + i, b * size + i);
            }
        break;
    }
    }
    return {edges.begin(), edges.end()};
}

/// Ordered gate program over a fixed qubit count. Parameter slots are a
/// gap-free 0..n_params-1 in gate order. `active_qubits` records which
/// qubits the gates may touch; latent qubits stay untouched until a
/// hierarchical expansion activates them.
struct Circuit {
    int n_qubits = 0;
    Entangler entangler = Entangler::RZZ;
    std::vector<Gate> gates;
    int n_params = 0;
    int layers = 0;
    std::vector<int> active_qubits;
};

/// One hardware-efficient block per layer: RY on every active qubit in index
/// order, then one entangler per edge with both endpoints active, in
/// canonical edge order.
inline Circuit build_circuit(const Topology& topo, int layers, Entangler entangler,
                             const std::vector<int>& active_qubits) {
    if (layers < 1) throw std::invalid_argument("layer count must be at least 1");
    if (active_qubits.empty()) throw std::invalid_argument("active qubit set is empty");

    std::vector<int> active = active_qubits;
    std::sort(active.begin(), active.end());
    if (std::adjacent_find(active.begin(), active.end()) != active.end())
        throw std::invalid_argument("duplicate active qubit");
    if (active.front() < 0 || active.back() >= topo.n_qubits)
        throw std::invalid_argument("active qubit out of range");

    const auto edges = build_topology(topo);
    std::vector<Edge> live;
    for (const auto& [a, b] : edges)
        if (std::binary_search(active.begin(), active.end(), a) &&
            std::binary_search(active.begin(), active.end(), b))
            live.push_back({a, b});

    Circuit c;
    c.n_qubits = topo.n_qubits;
    c.entangler = entangler;
    c.layers = layers;
    c.active_qubits = active;
    int slot = 0;
    for (int layer = 0; layer < layers; ++layer) {
        for (int q : active) c.gates.push_back(Gate::ry(q, slot++));
        for (const auto& [a, b] : live)
            c.gates.push_back(entangler == Entangler::RZZ ? Gate::rzz(a, b, slot++)
                                                          : Gate::cx(a, b));
    }
    c.n_params = slot;
    return c;
}

inline Circuit build_circuit(const Topology& topo, int layers, Entangler entangler) {
    std::vector<int> all(topo.n_qubits);
    for (int q = 0; q < topo.n_qubits; ++q) all[q] = q;
    return build_circuit(topo, layers, entangler, all);
}

/// Grows a trained circuit by one hierarchy stage: each newly activated
/// qubit gets an H (so it starts in |+>), the old gates are kept verbatim,
/// and `layers_added` fresh layers act on the enlarged active set. Carried
/// parameters keep their slots; every new slot starts at 0.
inline std::pair<Circuit, Eigen::VectorXd>
expand_hierarchy(const Topology& topo, const Circuit& prev,
                 const Eigen::VectorXd& prev_params, const std::vector<int>& new_qubits,
                 int layers_added) {
    if (prev_params.size() != prev.n_params)
        throw std::invalid_argument("parameter vector length does not match circuit");
    if (new_qubits.empty())
        throw std::invalid_argument("expansion must activate at least one qubit");
    if (layers_added < 1)
        throw std::invalid_argument("expansion must add at least one layer");

    std::vector<int> enlarged = prev.active_qubits;
    for (int q : new_qubits) {
        if (q < 0 || q >= topo.n_qubits)
            throw std::invalid_argument("activated qubit " + std::to_string(q) +
                                        " exceeds circuit size");
        if (std::find(prev.active_qubits.begin(), prev.active_qubits.end(), q) !=
            prev.active_qubits.end())
            throw std::invalid_argument("qubit " + std::to_string(q) +
                                        " is already active");
        enlarged.push_back(q);
    }
    std::sort(enlarged.begin(), enlarged.end());
    if (std::adjacent_find(enlarged.begin(), enlarged.end()) != enlarged.end())
        throw std::invalid_argument("duplicate activated qubit");

    Circuit next;
    next.n_qubits = topo.n_qubits;
    next.entangler = prev.entangler;
    next.active_qubits = enlarged;
    next.layers = prev.layers + layers_added;

    std::vector<int> sorted_new = new_qubits;
    std::sort(sorted_new.begin(), sorted_new.end());
    for (int q : sorted_new) next.gates.push_back(Gate::h(q));
    next.gates.insert(next.gates.end(), prev.gates.begin(), prev.gates.end());

    Circuit tail = build_circuit(topo, layers_added, prev.entangler, enlarged);
    for (Gate g : tail.gates) {
        if (g.param_slot >= 0) g.param_slot += prev.n_params;
        next.gates.push_back(g);
    }
    next.n_params = prev.n_params + tail.n_params;

    Eigen::VectorXd params = Eigen::VectorXd::Zero(next.n_params);
    params.head(prev.n_params) = prev_params;
    return {std::move(next), std::move(params)};
}

/// Staged activation plan: stage i trains `active_per_register` qubits in
/// every register after appending `layers` fresh layers. Counts must
/// strictly increase and end at the full register size.
struct HierarchyStage {
    int active_per_register = 0;
    int layers = 0;
};

struct HierarchySchedule {
    std::vector<HierarchyStage> stages;
    int epochs_per_stage = 1000;

    void validate(int register_size) const {
        if (stages.empty())
            throw std::invalid_argument("schedule needs at least one stage");
        int prev = 0;
        for (const auto& s : stages) {
            if (s.active_per_register <= prev)
                throw std::invalid_argument("stage active counts must strictly increase");
            if (s.layers < 1)
                throw std::invalid_argument("every stage must add at least one layer");
            prev = s.active_per_register;
        }
        if (prev != register_size)
            throw std::invalid_argument("final stage activates " + std::to_string(prev) +
                                        " qubits per register but the circuit has " +
                                        std::to_string(register_size));
        if (epochs_per_stage < 1)
            throw std::invalid_argument("epochs per stage must be at least 1");
    }
};

/// Qubits active when `per_register` positions of every register are on:
/// the most significant positions of each register, which sit at the low
/// local indices.
inline std::vector<int> active_qubits_for(const Topology& topo, int per_register) {
    const int size = topo.register_size();
    if (per_register < 1 || per_register > size)
        throw std::invalid_argument("active count per register out of range");
    std::vector<int> active;
    for (int r = 0; r < topo.register_count(); ++r)
        for (int j = 0; j < per_register; ++j) active.push_back(r * size + j);
    return active;
}

/// Remaps a partially active circuit onto a dense simulator of
/// active_qubits.size() qubits. Sorted global order is preserved, so the
/// compact state keeps the register-concatenated bit layout. Parameter
/// slots are untouched.
inline Circuit compact_circuit(const Circuit& c) {
    Circuit out;
    out.n_qubits = static_cast<int>(c.active_qubits.size());
    out.entangler = c.entangler;
    out.n_params = c.n_params;
    out.layers = c.layers;
    out.active_qubits.resize(c.active_qubits.size());
    for (int i = 0; i < out.n_qubits; ++i) out.active_qubits[i] = i;

    std::vector<int> map(c.n_qubits, -1);
    for (std::size_t i = 0; i < c.active_qubits.size(); ++i)
        map[c.active_qubits[i]] = static_cast<int>(i);

    out.gates.reserve(c.gates.size());
    for (const Gate& g : c.gates) {
        Gate m = g;
        for (int t = 0; t < g.arity(); ++t) {
            if (map[g.targets[t]] < 0)
                throw std::logic_error("gate touches latent qubit " +
                                       std::to_string(g.targets[t]));
            m.targets[t] = map[g.targets[t]];
        }
        out.gates.push_back(m);
    }
    return out;
}

} // namespace qcbm

#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qcbm/ansatz.hpp"
#include "qcbm/distributions.hpp"
#include "qcbm/trainer.hpp"

namespace qcbm {

/// Lowercase wire-format names; the uppercase to_string overloads stay
/// reserved for error messages.
inline std::string gate_kind_name(GateKind kind) {
    switch (kind) {
        case GateKind::RY: return "ry";
        case GateKind::RZZ: return "rzz";
        case GateKind::CX: return "cx";
        case GateKind::H: return "h";
    }
    throw std::logic_error("unreachable gate kind");
}

inline GateKind gate_kind_from_string(const std::string& s) {
    if (s == "ry") return GateKind::RY;
    if (s == "rzz") return GateKind::RZZ;
    if (s == "cx") return GateKind::CX;
    if (s == "h") return GateKind::H;
    throw std::invalid_argument("unknown gate kind \"" + s + "\"");
}

inline std::string entangler_name(Entangler e) {
    return e == Entangler::RZZ ? "rzz" : "cx";
}

inline Entangler entangler_from_string(const std::string& s) {
    if (s == "rzz") return Entangler::RZZ;
    if (s == "cx") return Entangler::CX;
    throw std::invalid_argument("unknown entangler \"" + s + "\" (expected rzz or cx)");
}

inline nlohmann::json circuit_to_json(const Circuit& circuit) {
    nlohmann::json gates = nlohmann::json::array();
    for (const Gate& g : circuit.gates) {
        std::vector<int> targets{g.targets[0]};
        if (g.arity() == 2) targets.push_back(g.targets[1]);
        nlohmann::json jg{{"kind", gate_kind_name(g.kind)}, {"targets", std::move(targets)}};
        if (g.param_slot >= 0) jg["param_slot"] = g.param_slot;
        gates.push_back(std::move(jg));
    }
    return nlohmann::json{{"n_qubits", circuit.n_qubits},
                          {"entangler", entangler_name(circuit.entangler)},
                          {"gates", std::move(gates)},
                          {"n_params", circuit.n_params}};
}

inline Circuit circuit_from_json(const nlohmann::json& j) {
    Circuit circuit;
    circuit.n_qubits = j.at("n_qubits").get<int>();
    circuit.entangler = entangler_from_string(j.at("entangler").get<std::string>());
    circuit.n_params = j.at("n_params").get<int>();
    if (circuit.n_qubits < 1) throw std::invalid_argument("n_qubits must be positive");
    if (circuit.n_params < 0) throw std::invalid_argument("n_params must be non-negative");

    std::set<int> touched;
    int max_slot = -1;
    for (const auto& jg : j.at("gates")) {
        const GateKind kind = gate_kind_from_string(jg.at("kind").get<std::string>());
        const auto targets = jg.at("targets").get<std::vector<int>>();
        if (static_cast<int>(targets.size()) != gate_arity(kind))
            throw std::invalid_argument(gate_kind_name(kind) + " gate expects " +
                                        std::to_string(gate_arity(kind)) + " targets, got " +
                                        std::to_string(targets.size()));
        const int slot = jg.contains("param_slot") ? jg.at("param_slot").get<int>() : -1;
        const Gate g = Gate::make(kind, targets[0], targets.size() == 2 ? targets[1] : -1, slot);
        for (int t = 0; t < g.arity(); ++t) {
            if (g.targets[t] < 0 || g.targets[t] >= circuit.n_qubits)
                throw std::invalid_argument("gate target " + std::to_string(g.targets[t]) +
                                            " out of range for " +
                                            std::to_string(circuit.n_qubits) + " qubits");
            touched.insert(g.targets[t]);
        }
        max_slot = std::max(max_slot, g.param_slot);
        circuit.gates.push_back(g);
    }
    if (max_slot >= circuit.n_params)
        throw std::invalid_argument("param_slot " + std::to_string(max_slot) +
                                    " exceeds n_params " + std::to_string(circuit.n_params));

    // Active qubits are exactly those the gate list touches: every activation
    // applies at least one gate per qubit. An empty circuit is fully active.
    if (touched.empty())
        for (int q = 0; q < circuit.n_qubits; ++q) touched.insert(q);
    circuit.active_qubits.assign(touched.begin(), touched.end());
    return circuit;
}

inline nlohmann::json model_to_json(const Circuit& circuit, const Eigen::VectorXd& params) {
    if (params.size() != circuit.n_params)
        throw std::invalid_argument("parameter vector length does not match circuit");
    return nlohmann::json{
        {"circuit", circuit_to_json(circuit)},
        {"params", std::vector<double>(params.begin(), params.end())}};
}

inline std::pair<Circuit, Eigen::VectorXd> model_from_json(const nlohmann::json& j) {
    Circuit circuit = circuit_from_json(j.at("circuit"));
    const auto values = j.at("params").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != circuit.n_params)
        throw std::invalid_argument("params length " + std::to_string(values.size()) +
                                    " does not match n_params " +
                                    std::to_string(circuit.n_params));
    Eigen::VectorXd params =
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<long>(values.size()));
    return {std::move(circuit), std::move(params)};
}

inline nlohmann::json histogram_to_json(const ProbabilityVector& pv) {
    return nlohmann::json{
        {"resolution", pv.resolution()},
        {"register_shape", pv.register_shape},
        {"values", std::vector<double>(pv.values.begin(), pv.values.end())}};
}

inline ProbabilityVector histogram_from_json(const nlohmann::json& j) {
    const auto shape = j.at("register_shape").get<std::vector<int>>();
    const auto values = j.at("values").get<std::vector<double>>();
    Eigen::VectorXd v =
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<long>(values.size()));
    ProbabilityVector pv(v, shape);
    if (j.contains("resolution") && j.at("resolution").get<int>() != pv.resolution())
        throw std::invalid_argument("resolution field disagrees with register_shape");
    return pv;
}

inline std::string histogram_csv(const ProbabilityVector& pv) {
    std::ostringstream out;
    out << "index,value\n";
    out.precision(17);
    for (long i = 0; i < pv.values.size(); ++i) out << i << ',' << pv.values[i] << '\n';
    return out.str();
}

/// One JSON object per recorded epoch, concatenated across stages. Timing is
/// deliberately omitted so reruns of the same configuration and seed are
/// byte-identical.
inline std::string records_jsonl(const std::vector<TrainRecord>& stages) {
    std::string out;
    for (const TrainRecord& stage : stages) {
        for (const EpochRecord& r : stage.epochs) {
            nlohmann::json row{{"epoch", r.epoch},
                               {"loss", r.loss},
                               {"tv", r.tv},
                               {"stage", stage.stage_index}};
            out += row.dump();
            out += '\n';
        }
    }
    return out;
}

inline std::string sweep_csv_header() {
    return "config_id,n_seeds,min,p25,median,p75,max\n";
}

inline std::string sweep_csv_row(const std::string& config_id, const SweepSummary& s) {
    std::ostringstream out;
    out.precision(17);
    out << config_id << ',' << s.n_seeds << ',' << s.min << ',' << s.p25 << ','
        << s.median << ',' << s.p75 << ',' << s.max << '\n';
    return out.str();
}

} // namespace qcbm

#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qcbm/ansatz.hpp"
#include "qcbm/distributions.hpp"
#include "qcbm/gradients.hpp"
#include "qcbm/serialize.hpp"
#include "qcbm/trainer.hpp"

namespace qcbm {

inline constexpr const char* kToolkitVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* field,
                                           const std::string& ctx) {
    if (!j.is_object())
        throw std::invalid_argument(ctx + " must be an object");
    if (!j.contains(field))
        throw std::invalid_argument(ctx + " is missing field \"" + field + "\"");
    return j.at(field);
}

template <typename T>
T field_as(const nlohmann::json& j, const char* field, const std::string& ctx) {
    try {
        return require_field(j, field, ctx).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument(ctx + "." + field + " has the wrong type");
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* field, T fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(field)) return fallback;
    return field_as<T>(j, field, ctx);
}

} // namespace detail

inline TargetSpec target_from_json(const nlohmann::json& j) {
    using detail::field_as;
    const auto kind = field_as<std::string>(j, "kind", "target");
    TargetSpec spec;
    if (kind == "gaussian") {
        spec = TargetSpec::gaussian(field_as<double>(j, "mean", "target"),
                                    field_as<double>(j, "variance", "target"));
    } else if (kind == "mixture") {
        std::vector<GaussianComponent> comps;
        const auto& arr = detail::require_field(j, "components", "target");
        if (!arr.is_array() || arr.empty())
            throw std::invalid_argument("target.components must be a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ctx = "target.components[" + std::to_string(i) + "]";
            comps.push_back({field_as<double>(arr[i], "weight", ctx),
                             field_as<double>(arr[i], "mean", ctx),
                             field_as<double>(arr[i], "variance", ctx)});
        }
        spec = TargetSpec::mixture(std::move(comps));
    } else if (kind == "multivariate") {
        const auto mu = field_as<std::vector<double>>(j, "mean", "target");
        const auto cov = field_as<std::vector<std::vector<double>>>(j, "covariance", "target");
        const auto d = static_cast<long>(mu.size());
        Eigen::MatrixXd sigma(d, d);
        if (static_cast<long>(cov.size()) != d)
            throw std::invalid_argument("target.covariance must be square and match mean");
        for (long r = 0; r < d; ++r) {
            if (static_cast<long>(cov[r].size()) != d)
                throw std::invalid_argument("target.covariance must be square and match mean");
            for (long c = 0; c < d; ++c) sigma(r, c) = cov[r][c];
        }
        spec = TargetSpec::multivariate(
            Eigen::Map<const Eigen::VectorXd>(mu.data(), d), std::move(sigma));
    } else {
        throw std::invalid_argument(
            "target.kind must be one of gaussian, mixture, multivariate");
    }
    spec.validate();
    return spec;
}

inline Topology topology_from_json(const nlohmann::json& j) {
    using detail::field_as;
    const auto kind = field_as<std::string>(j, "kind", "topology");
    if (kind == "line") return Topology::line(field_as<int>(j, "n_qubits", "topology"));
    if (kind == "ring") return Topology::ring(field_as<int>(j, "n_qubits", "topology"));
    if (kind == "all_to_all")
        return Topology::all_to_all(field_as<int>(j, "n_qubits", "topology"));
    if (kind == "grid")
        return Topology::grid(field_as<int>(j, "rows", "topology"),
                              field_as<int>(j, "cols", "topology"));
    if (kind == "multi_register") {
        const auto inter =
            detail::field_or<std::string>(j, "inter_register", "chain", "topology");
        InterRegister ir;
        if (inter == "chain") ir = InterRegister::Chain;
        else if (inter == "full_triangle") ir = InterRegister::FullTriangle;
        else
            throw std::invalid_argument(
                "topology.inter_register must be chain or full_triangle");
        return Topology::multi_register(field_as<int>(j, "registers", "topology"),
                                        field_as<int>(j, "register_rows", "topology"),
                                        field_as<int>(j, "register_cols", "topology"), ir);
    }
    throw std::invalid_argument(
        "topology.kind must be one of line, ring, grid, all_to_all, multi_register");
}

inline HierarchySchedule schedule_from_json(const nlohmann::json& j) {
    using detail::field_as;
    HierarchySchedule schedule;
    schedule.epochs_per_stage = field_as<int>(j, "epochs_per_stage", "schedule");
    const auto& arr = detail::require_field(j, "stages", "schedule");
    if (!arr.is_array() || arr.empty())
        throw std::invalid_argument("schedule.stages must be a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string ctx = "schedule.stages[" + std::to_string(i) + "]";
        schedule.stages.push_back({field_as<int>(arr[i], "active_per_register", ctx),
                                   field_as<int>(arr[i], "layers", ctx)});
    }
    return schedule;
}

inline TrainConfig train_from_json(const nlohmann::json& j) {
    using detail::field_as;
    using detail::field_or;
    TrainConfig t;
    t.epochs = field_or<int>(j, "epochs", 0, "train");
    const auto loss = field_or<std::string>(j, "loss", "kl", "train");
    if (loss == "kl") t.loss = LossKind::KL;
    else if (loss == "l2") t.loss = LossKind::L2;
    else throw std::invalid_argument("train.loss must be kl or l2");
    t.record_every = field_or<int>(j, "record_every", 1, "train");
    t.tv_bits_per_register = field_or<int>(j, "tv_bits_per_register", 0, "train");
    const auto init = field_or<std::string>(j, "init", "uniform", "train");
    if (init == "uniform") t.init = ParamInit::UniformAngles;
    else if (init == "zeros") t.init = ParamInit::Zeros;
    else throw std::invalid_argument("train.init must be uniform or zeros");
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        t.adam.lr = field_or<double>(a, "lr", t.adam.lr, "train.adam");
        t.adam.beta1 = field_or<double>(a, "beta1", t.adam.beta1, "train.adam");
        t.adam.beta2 = field_or<double>(a, "beta2", t.adam.beta2, "train.adam");
        t.adam.eps = field_or<double>(a, "eps", t.adam.eps, "train.adam");
    }
    return t;
}

inline std::vector<std::uint64_t> seeds_from_json(const nlohmann::json& j) {
    std::vector<std::uint64_t> seeds;
    if (j.is_array()) {
        for (const auto& s : j) {
            if (!s.is_number_integer())
                throw std::invalid_argument("seeds must contain integers");
            seeds.push_back(s.get<std::uint64_t>());
        }
    } else if (j.is_object()) {
        const int count = detail::field_as<int>(j, "count", "seeds");
        const auto base = detail::field_or<std::uint64_t>(j, "base", 1, "seeds");
        if (count < 1) throw std::invalid_argument("seeds.count must be at least 1");
        for (int i = 0; i < count; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
    } else {
        throw std::invalid_argument("seeds must be a list or {count, base}");
    }
    if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
    return seeds;
}

struct ExperimentConfig {
    TargetSpec target;
    Topology topology;
    Entangler entangler = Entangler::RZZ;
    std::vector<int> depths;                    // "layers" form; empty if schedule
    std::optional<HierarchySchedule> schedule;  // hierarchical form
    TrainConfig train;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "runs";
    int qubit_cap = kDefaultQubitCap;
    int jobs = 0;
};

/// Cross-field validation with field-naming diagnostics. Re-run after any
/// command-line override.
inline void validate_experiment(const ExperimentConfig& cfg) {
    if (cfg.target.dimensions() != cfg.topology.register_count())
        throw std::invalid_argument(
            "target dimensionality " + std::to_string(cfg.target.dimensions()) +
            " does not match topology register count " +
            std::to_string(cfg.topology.register_count()));
    if (cfg.topology.n_qubits > cfg.qubit_cap)
        throw std::invalid_argument("topology.n_qubits " +
                                    std::to_string(cfg.topology.n_qubits) +
                                    " exceeds qubit_cap " + std::to_string(cfg.qubit_cap));
    build_topology(cfg.topology);  // surfaces shape errors (grid coverage etc.)
    if (cfg.schedule) {
        cfg.schedule->validate(cfg.topology.register_size());
        if (cfg.schedule->epochs_per_stage < 1)
            throw std::invalid_argument("schedule.epochs_per_stage must be at least 1");
    } else {
        if (cfg.depths.empty())
            throw std::invalid_argument("config must set exactly one of layers, schedule");
        for (int d : cfg.depths)
            if (d < 1) throw std::invalid_argument("layers entries must be at least 1");
        if (cfg.train.epochs < 1)
            throw std::invalid_argument("train.epochs must be at least 1");
    }
    const int tv_bits = cfg.train.tv_bits_per_register;
    if (tv_bits < 0) throw std::invalid_argument("train.tv_bits_per_register must be >= 0");
    if (tv_bits * cfg.topology.register_count() > cfg.qubit_cap)
        throw std::invalid_argument("train.tv_bits_per_register exceeds qubit_cap");
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    using detail::field_or;
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    ExperimentConfig cfg;
    cfg.target = target_from_json(detail::require_field(j, "target", "config"));
    cfg.topology = topology_from_json(detail::require_field(j, "topology", "config"));
    cfg.entangler =
        entangler_from_string(field_or<std::string>(j, "entangler", "rzz", "config"));

    const bool has_layers = j.contains("layers");
    const bool has_schedule = j.contains("schedule");
    if (has_layers == has_schedule)
        throw std::invalid_argument("config must set exactly one of layers, schedule");
    if (has_layers) {
        const auto& jl = j.at("layers");
        if (jl.is_number_integer()) {
            cfg.depths.push_back(jl.get<int>());
        } else if (jl.is_array() && !jl.empty()) {
            for (const auto& d : jl) {
                if (!d.is_number_integer())
                    throw std::invalid_argument("layers must contain integers");
                cfg.depths.push_back(d.get<int>());
            }
        } else {
            throw std::invalid_argument("layers must be an integer or a non-empty list");
        }
    } else {
        cfg.schedule = schedule_from_json(j.at("schedule"));
    }

    cfg.train = train_from_json(detail::require_field(j, "train", "config"));
    cfg.seeds = seeds_from_json(detail::require_field(j, "seeds", "config"));
    cfg.output_dir = field_or<std::string>(j, "output_dir", "runs", "config");
    cfg.qubit_cap = field_or<int>(j, "qubit_cap", kDefaultQubitCap, "config");
    validate_experiment(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Hashing, timestamps, files
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

/// Hash of the canonical (whitespace-free, key-sorted) JSON dump, so
/// formatting changes never alter it but any semantic field change does.
inline std::string config_hash_hex(const nlohmann::json& config) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.dump());
    return out.str();
}

inline std::string utc_timestamp(const char* format) {
    const std::time_t now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

inline std::string utc_timestamp_iso() { return utc_timestamp("%Y-%m-%dT%H:%M:%SZ"); }

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Fresh timestamped directory under `base`; a numeric suffix keeps reruns
/// within the same second from colliding. Outputs are append-never.
inline std::filesystem::path fresh_run_dir(const std::string& base) {
    namespace fs = std::filesystem;
    fs::create_directories(base);
    const std::string stem = "run-" + utc_timestamp("%Y%m%d-%H%M%S");
    fs::path dir = fs::path(base) / stem;
    for (int k = 2; fs::exists(dir); ++k) dir = fs::path(base) / (stem + "-" + std::to_string(k));
    fs::create_directories(dir);
    return dir;
}

struct RunManifest {
    std::string config_hash;
    std::string version = kToolkitVersion;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> files;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    return nlohmann::json{{"config_hash", m.config_hash},
                          {"version", m.version},
                          {"started_at", m.started_at},
                          {"finished_at", m.finished_at},
                          {"files", m.files}};
}

// ---------------------------------------------------------------------------
// Experiment orchestration
// ---------------------------------------------------------------------------

struct SweepRow {
    std::string config_id;
    SweepSummary summary;
};

struct ExperimentArtifacts {
    std::filesystem::path run_dir;
    RunManifest manifest;
    std::vector<SweepRow> rows;
};

namespace detail {

inline RunResult run_flat(const ExperimentConfig& cfg, int depth, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.qubit_cap = cfg.qubit_cap;
    const std::vector<int> bits(cfg.topology.register_count(), cfg.topology.register_size());
    const ProbabilityVector target = sample_target(cfg.target, bits, cfg.qubit_cap);
    Circuit circuit = build_circuit(cfg.topology, depth, cfg.entangler);
    std::mt19937_64 rng(seed);
    const Eigen::VectorXd params0 = initial_params(circuit.n_params, tc.init, rng);
    RunResult result;
    result.stages.push_back(train(circuit, params0, target, tc));
    result.circuit = std::move(circuit);
    return result;
}

inline RunResult run_hierarchical(const ExperimentConfig& cfg, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.qubit_cap = cfg.qubit_cap;
    RunResult result;
    result.stages =
        train_hierarchical(cfg.topology, *cfg.schedule, cfg.entangler, cfg.target, tc);
    result.circuit = build_hierarchical_circuit(cfg.topology, *cfg.schedule, cfg.entangler);
    return result;
}

} // namespace detail

/// Runs every sweep the config describes and writes all artifacts under a
/// fresh run directory: the canonical config copy, per-seed JSONL
/// trajectories, the percentile CSV, and per-sweep best model + histogram.
/// The manifest is written last, once every listed file exists.
inline ExperimentArtifacts run_experiment(const ExperimentConfig& cfg,
                                          const nlohmann::json& raw_config,
                                          std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    ExperimentArtifacts art;
    art.run_dir = fresh_run_dir(cfg.output_dir);
    art.manifest.config_hash = config_hash_hex(raw_config);
    art.manifest.started_at = utc_timestamp_iso();

    auto relative_files = std::vector<std::string>{};
    auto emit = [&](const fs::path& rel, const std::string& text) {
        fs::create_directories((art.run_dir / rel).parent_path());
        write_text_file(art.run_dir / rel, text);
        relative_files.push_back(rel.generic_string());
    };

    emit("config.json", raw_config.dump(2) + "\n");

    struct Job {
        std::string config_id;
        std::function<RunResult(std::uint64_t)> run;
    };
    std::vector<Job> jobs;
    if (cfg.schedule) {
        jobs.push_back({"schedule", [&cfg](std::uint64_t seed) {
                            return detail::run_hierarchical(cfg, seed);
                        }});
    } else {
        for (int depth : cfg.depths)
            jobs.push_back({"depth-" + std::to_string(depth),
                            [&cfg, depth](std::uint64_t seed) {
                                return detail::run_flat(cfg, depth, seed);
                            }});
    }

    std::string csv = sweep_csv_header();
    for (const Job& job : jobs) {
        if (log) *log << "sweep " << job.config_id << ": " << cfg.seeds.size()
                      << " seed(s)\n";
        SweepRow row{job.config_id, sweep(job.run, cfg.seeds, cfg.jobs)};
        const fs::path dir = job.config_id;
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            emit(dir / ("seed-" + std::to_string(cfg.seeds[i]) + ".jsonl"),
                 records_jsonl(row.summary.runs[i].stages));

        const RunResult& best = row.summary.best_run();
        emit(dir / "best_model.json",
             model_to_json(best.circuit, best.final_params()).dump(2) + "\n");

        const Circuit sim = compact_circuit(best.circuit);
        const Eigen::VectorXd q =
            probabilities(forward(sim, best.final_params(), cfg.qubit_cap));
        const std::vector<int> shape(cfg.topology.register_count(),
                                     sim.n_qubits / cfg.topology.register_count());
        emit(dir / "best_histogram.json",
             histogram_to_json(ProbabilityVector(q, shape)).dump(2) + "\n");

        csv += sweep_csv_row(job.config_id, row.summary);
        if (log) *log << "  median tv " << row.summary.median << ", best tv "
                      << row.summary.min << " (seed " << row.summary.best_seed() << ")\n";
        art.rows.push_back(std::move(row));
    }
    emit("sweep.csv", csv);

    art.manifest.finished_at = utc_timestamp_iso();
    art.manifest.files = relative_files;
    art.manifest.files.push_back("manifest.json");
    write_text_file(art.run_dir / "manifest.json",
                    manifest_to_json(art.manifest).dump(2) + "\n");
    return art;
}

// ---------------------------------------------------------------------------
// Command entry points (thin wrappers the CLI binary calls)
// ---------------------------------------------------------------------------

struct CliOverrides {
    int jobs = 0;
    std::string output_dir;
    int qubit_cap = 0;
};

inline int cmd_train(const std::string& config_path, const CliOverrides& over = {},
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const nlohmann::json raw = read_json_file(config_path);
        ExperimentConfig cfg = experiment_config_from_json(raw);
        if (over.jobs > 0) cfg.jobs = over.jobs;
        if (!over.output_dir.empty()) cfg.output_dir = over.output_dir;
        if (over.qubit_cap > 0) cfg.qubit_cap = over.qubit_cap;
        validate_experiment(cfg);
        const ExperimentArtifacts art = run_experiment(cfg, raw, &out);
        out << "wrote " << art.run_dir.generic_string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int cmd_eval(const std::string& model_path, const std::string& target_path,
                    int resolution_bits, const std::string& output_path = "",
                    int qubit_cap = kDefaultQubitCap, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    try {
        auto [circuit, params] = model_from_json(read_json_file(model_path));
        const nlohmann::json tj = read_json_file(target_path);
        const TargetSpec spec = target_from_json(tj.contains("target") ? tj.at("target") : tj);
        const int dims = spec.dimensions();
        if (resolution_bits < 1)
            throw std::invalid_argument("resolution must be at least 1 bit per register");
        if (resolution_bits * dims > qubit_cap)
            throw std::invalid_argument("resolution " + std::to_string(resolution_bits) +
                                        " bits over " + std::to_string(dims) +
                                        " register(s) exceeds qubit cap " +
                                        std::to_string(qubit_cap));

        const Circuit sim = compact_circuit(circuit);
        if (sim.n_qubits % dims != 0)
            throw std::invalid_argument("circuit qubit count " +
                                        std::to_string(sim.n_qubits) +
                                        " is not divisible by target dimensionality " +
                                        std::to_string(dims));
        const int circuit_bits = sim.n_qubits / dims;

        const Eigen::VectorXd q = probabilities(forward(sim, params, qubit_cap));
        const ProbabilityVector q_pv(q, std::vector<int>(dims, circuit_bits));
        const ProbabilityVector p_native =
            sample_target(spec, std::vector<int>(dims, circuit_bits), qubit_cap);
        const ProbabilityVector p_eval =
            sample_target(spec, std::vector<int>(dims, resolution_bits), qubit_cap);

        const double kl = kl_divergence(p_native.values, q_pv.values);
        const double tv = tv_at_resolution(p_eval, q_pv, resolution_bits, qubit_cap);
        out << "kl " << kl << "\n"
            << "tv[" << resolution_bits << " bits/register] " << tv << "\n";

        if (!output_path.empty()) {
            const nlohmann::json report{{"resolution_bits", resolution_bits},
                                        {"kl", kl},
                                        {"tv", tv},
                                        {"model_histogram", histogram_to_json(q_pv)},
                                        {"target_histogram", histogram_to_json(p_eval)}};
            write_text_file(output_path, report.dump(2) + "\n");
            out << "wrote " << output_path << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int cmd_bench(int n_qubits, const std::vector<int>& layer_counts, int repeats,
                     const std::string& output_path = "", int qubit_cap = kDefaultQubitCap,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        if (layer_counts.empty())
            throw std::invalid_argument("bench needs at least one layer count");
        if (n_qubits > qubit_cap)
            throw std::invalid_argument("qubit count exceeds qubit cap");

        const Topology topo = Topology::line(n_qubits);
        const ProbabilityVector target =
            sample_target(TargetSpec::gaussian(0.5, 0.04), {n_qubits}, qubit_cap);
        std::vector<BenchRow> rows;
        for (int layers : layer_counts) {
            const Circuit circuit = build_circuit(topo, layers, Entangler::RZZ);
            std::mt19937_64 rng(0);
            const Eigen::VectorXd params =
                initial_params(circuit.n_params, ParamInit::UniformAngles, rng);
            const auto timed = benchmark_gradients(circuit, params, target.values,
                                                   LossKind::KL, repeats, qubit_cap);
            rows.insert(rows.end(), timed.begin(), timed.end());
        }
        std::ostringstream csv;
        write_benchmark_csv(rows, csv);
        if (output_path.empty()) {
            out << csv.str();
        } else {
            write_text_file(output_path, csv.str());
            out << "wrote " << output_path << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace qcbm

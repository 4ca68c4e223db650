// Command-line front end: `train` runs the experiments a JSON config
// describes, `eval` scores a saved model against a target at a chosen
// resolution, `bench` compares gradient methods. See README for the config
// schema and output layout.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcbm/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quantum circuit Born machine training toolkit"};
    app.set_version_flag("--version", qcbm::kToolkitVersion);
    app.require_subcommand(1);

    std::string config_path;
    qcbm::CliOverrides overrides;
    auto* train = app.add_subcommand("train", "run the sweeps a config file describes");
    train->add_option("--config", config_path, "experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--jobs", overrides.jobs, "max concurrent seeds (default: cores)");
    train->add_option("--output", overrides.output_dir, "override config output_dir");
    train->add_option("--qubit-cap", overrides.qubit_cap, "override config qubit_cap");

    std::string model_path, target_path, eval_output;
    int resolution = 0;
    int eval_cap = qcbm::kDefaultQubitCap;
    auto* eval = app.add_subcommand("eval", "score a saved model against a target");
    eval->add_option("--model", model_path, "trained circuit+params JSON")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--target", target_path, "target spec JSON (or config with a target field)")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--resolution", resolution, "evaluation bits per register")->required();
    eval->add_option("--output", eval_output, "write a JSON report here");
    eval->add_option("--qubit-cap", eval_cap, "state size limit");

    int bench_qubits = 0, bench_repeats = 3;
    int bench_cap = qcbm::kDefaultQubitCap;
    std::vector<int> bench_layers;
    std::string bench_output;
    auto* bench = app.add_subcommand("bench", "time adjoint vs finite-difference gradients");
    bench->add_option("--qubits", bench_qubits, "circuit width")->required();
    bench->add_option("--layers", bench_layers, "layer counts to bench")->required();
    bench->add_option("--repeats", bench_repeats, "timing repetitions per row");
    bench->add_option("--output", bench_output, "write CSV here instead of stdout");
    bench->add_option("--qubit-cap", bench_cap, "state size limit");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return qcbm::cmd_train(config_path, overrides);
    if (eval->parsed())
        return qcbm::cmd_eval(model_path, target_path, resolution, eval_output, eval_cap);
    return qcbm::cmd_bench(bench_qubits, bench_layers, bench_repeats, bench_output, bench_cap);
}

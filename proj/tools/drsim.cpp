#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "drsim/pipeline.hpp"

namespace {

void print_error(const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    using namespace drsim::pipeline;
    CLI::App app{"Smart-meter demand-response pipeline: synthetic data, clustering, generators, scores."};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, generator;
    std::uint64_t seed = 0;
    bool force = false;
    app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_flag("--force", force, "rebuild outputs that already exist");
    app.add_option("--generator", generator, "restrict to one generator")->check(CLI::IsMember({"cvae", "gam"}));

    const std::vector<std::pair<std::string, std::string>> commands{
        {"synth", "write a synthetic population (records, weather, ground truth)"},
        {"ingest", "validate the inputs and write the household and tariff-schedule summaries"},
        {"cluster", "fit tariff-response profiles and compare NMF, classical and random clusterings"},
        {"train", "train one generator per cluster"},
        {"generate", "sample the test days from the trained generators"},
        {"evaluate", "score the generators on the test days"},
        {"scenario", "sample the Normal, Low and High tariff scenarios"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);
    CLI11_PARSE(app, argc, argv);

    try {
        PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
        if (*seed_opt) config.seed = seed;
        if (!out_dir.empty()) config.out = out_dir;
        config.validate();
        StageOptions opts;
        opts.force = force;
        if (!generator.empty()) opts.generator = parse_generator(generator);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "synth") cmd_synth(config, opts);
        else if (cmd == "ingest") cmd_ingest(config, opts);
        else if (cmd == "cluster") cmd_cluster(config, opts);
        else if (cmd == "train") cmd_train(config, opts);
        else if (cmd == "generate") cmd_generate(config, opts);
        else if (cmd == "evaluate") cmd_evaluate(config, opts);
        else if (cmd == "scenario") cmd_scenario(config, opts);
    } catch (const drsim::Error& e) {
        print_error(e.kind(), e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("internal_error", e.what());
        return 3;
    }
    return 0;
}

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mgt/errors.hpp"
#include "mgt/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    bool print_config = false;
};

mgt::ExperimentConfig resolve(const std::string& pipeline, const Flags& f) {
    mgt::ExperimentConfig c;
    if (f.config.empty()) {
        c = mgt::default_config(pipeline);
    } else {
        c = mgt::load_config(f.config);
        if (c.raw.contains("pipeline") && c.pipeline != pipeline)
            throw mgt::ConfigError("config is for pipeline " + c.pipeline + ", not " + pipeline);
        c.pipeline = pipeline;
    }
    if (!f.out.empty()) c.output_dir = f.out;
    if (f.seed) c.inversion.seed = *f.seed;
    return mgt::parse_config(mgt::to_json(c));
}

int run(const std::vector<std::string>& pipelines, const Flags& f, bool nested) {
    if (f.print_config) {
        std::cout << mgt::to_json(resolve(pipelines.front(), f)).dump(2) << "\n";
        return 0;
    }
    mgt::LogSink log;
    if (!f.quiet) log = [](const std::string& s) { std::cout << s << "\n"; };
    std::vector<mgt::RunManifest> runs;
    for (const auto& p : pipelines) {
        Flags g = f;
        if (nested) g.out = (f.out.empty() ? std::string("out") : f.out) + "/" + p;
        runs.push_back(mgt::run_experiment(resolve(p, g), log));
    }
    const std::string dir = nested ? (f.out.empty() ? std::string("out") : f.out) : runs.front().output_dir.string();
    mgt::emit_report(runs, dir);
    if (!f.quiet) std::cout << "report written to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional MGT experiment runner"};
    app.set_version_flag("--version", std::string(MGT_VERSION));
    app.require_subcommand(1);

    Flags flags;
    auto add_flags = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "output directory (overrides the config)");
        sub->add_option("--seed", flags.seed, "RNG seed for synthetic noise (overrides the config)");
        sub->add_flag("--quiet", flags.quiet, "suppress progress output");
        sub->add_flag("--print-config", flags.print_config, "print the effective configuration and exit");
    };

    std::vector<std::pair<std::string, CLI::App*>> subs;
    for (const auto& name : mgt::pipeline_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        add_flags(sub);
        subs.emplace_back(name, sub);
    }
    CLI::App* all = app.add_subcommand("all", "run every pipeline with its default configuration");
    all->add_option("--out", flags.out, "root output directory");
    all->add_option("--seed", flags.seed, "RNG seed override");
    all->add_flag("--quiet", flags.quiet, "suppress progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (all->parsed()) return run(mgt::pipeline_names(), flags, true);
        for (const auto& [name, sub] : subs)
            if (sub->parsed()) return run({name}, flags, false);
    } catch (const mgt::Error& e) {
        std::cerr << e.what() << "\n";
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "ConfigError: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

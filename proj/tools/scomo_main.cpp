// scomo command-line front end: batch pipeline stages, the session service
// over HTTP, and the synthetic demo cohort.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"
#include "scomo/demo_cohort.hpp"
#include "scomo/error.hpp"
#include "scomo/http_api.hpp"
#include "scomo/pipeline.hpp"
#include "scomo/serialization.hpp"
#include "scomo/session.hpp"

namespace {

int run_stages(const std::string& config_path, std::optional<std::uint64_t> seed, std::span<const scomo::Stage> stages) {
    scomo::PipelineConfig cfg;
    try {
        cfg = scomo::load_config(config_path);
    } catch (const scomo::Error& e) {
        std::cerr << "scomo: " << e.what() << '\n';
        return 1;
    }
    if (seed) cfg.seed = *seed;
    const auto r = scomo::run_pipeline(cfg, stages, &std::cerr);
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SCoMo gait pipeline and session service"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    for (scomo::Stage stage : scomo::kAllStages) {
        auto* sub = app.add_subcommand(std::string(scomo::to_string(stage)),
                                       "run the " + std::string(scomo::to_string(stage)) + " stage");
        sub->add_option("--config", config, "pipeline config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config seed");
        sub->callback([&, stage] {
            const scomo::Stage one[] = {stage};
            throw CLI::RuntimeError(run_stages(config, seed, one));
        });
    }

    auto* run = app.add_subcommand("run", "run every stage in order");
    run->add_option("--config", config, "pipeline config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "override the config seed");
    run->callback([&] { throw CLI::RuntimeError(run_stages(config, seed, scomo::kAllStages)); });

    std::string host = "127.0.0.1", store, normative;
    int port = 8080;
    std::uint64_t serve_seed = 0;
    auto* serve = app.add_subcommand("serve", "serve the session API over HTTP");
    serve->add_option("--host", host, "bind address")->capture_default_str();
    serve->add_option("--port", port, "port")->capture_default_str()->check(CLI::Range(1, 65535));
    serve->add_option("--store", store, "event store directory")->required();
    serve->add_option("--normative", normative, "normative_model.json from the fit stage")->check(CLI::ExistingFile);
    serve->add_option("--seed", serve_seed, "base seed for slider ranges")->capture_default_str();
    serve->callback([&] {
        scomo::SessionService::Options opts;
        opts.store_dir = store;
        opts.seed = serve_seed;
        try {
            if (!normative.empty())
                opts.normative_model = scomo::normative_model_from_json(scomo::read_json_file(normative));
        } catch (const scomo::Error& e) {
            std::cerr << "scomo: " << e.what() << '\n';
            throw CLI::RuntimeError(1);
        }
        scomo::SessionService service(std::move(opts));
        httplib::Server server;
        scomo::register_routes(server, service);
        std::cerr << "listening on " << host << ':' << port << '\n';
        if (!server.listen(host, port)) {
            std::cerr << "scomo: cannot listen on " << host << ':' << port << '\n';
            throw CLI::RuntimeError(1);
        }
    });

    scomo::DemoOptions demo_opts;
    std::string demo_dir = "scomo-demo";
    bool demo_run = true;
    auto* demo = app.add_subcommand("demo", "write the synthetic demo cohort and run the pipeline on it");
    demo->add_option("--dir", demo_dir, "target directory")->capture_default_str();
    demo->add_option("--seed", demo_opts.seed, "generator and pipeline seed")->capture_default_str();
    demo->add_flag("!--no-run", demo_run, "only write the input files");
    demo->callback([&] {
        const auto t0 = std::chrono::steady_clock::now();
        demo_opts.dir = demo_dir;
        scomo::DemoCohort cohort;
        try {
            cohort = scomo::write_demo_cohort(demo_opts);
        } catch (const scomo::Error& e) {
            std::cerr << "scomo: " << e.what() << '\n';
            throw CLI::RuntimeError(1);
        }
        std::cerr << "wrote " << cohort.sessions << " sessions, config " << cohort.config.string() << '\n';
        if (!demo_run) return;
        const int code = run_stages(cohort.config.string(), std::nullopt, scomo::kAllStages);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "done in %.1f s, outputs in %s\n", s, cohort.output_dir.string().c_str());
        if (code) throw CLI::RuntimeError(code);
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

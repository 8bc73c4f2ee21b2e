#include <iostream>

#include "CLI11.hpp"

#include "fdist/common.hpp"
#include "fdist/runner.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Finite-distortion energy minimisation and convergence diagnostics"};
    app.set_version_flag("--version", std::string(fdist::version()));

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    bool print_schema = false;
    auto* config_opt = app.add_option("--config", config_path, "JSON run configuration");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory");
    auto* seed_opt = app.add_option("--seed", seed, "Overrides the config seed");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--schema", print_schema, "Print the result.json schema and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fdist::kExitValidation;
    }

    if (print_schema) {
        std::cout << fdist::result_schema() << '\n';
        return fdist::kExitOk;
    }
    if (!*config_opt || !*out_opt) {
        std::cerr << "--config and --out are required\n";
        return fdist::kExitValidation;
    }

    try {
        fdist::RunRequest request;
        try {
            request.config = fdist::load_config(config_path);
        } catch (const fdist::ConfigError& e) {
            request.load_error = e.what();
        }
        request.out_dir = out_dir;
        if (*seed_opt) request.seed = seed;
        request.threads = threads;
        request.config_path = config_path;
        const int code = fdist::run(request);
        if (code != fdist::kExitOk) std::cerr << "run failed (exit " << code << "); see " << out_dir << "/manifest.json\n";
        return code;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}

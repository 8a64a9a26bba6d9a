#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "xplat/io.hpp"
#include "xplat/pipeline.hpp"

using xplat::pipeline::Command;

int main(int argc, char** argv) {
    CLI::App app{"Cross-platform language analysis of keystroke and Facebook corpora"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path = "config.toml";
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<std::size_t> min_words;
    app.add_option("-c,--config", config_path, "run configuration")->capture_default_str();
    app.add_option("-o,--output", output_dir, "output directory (overrides output_dir)");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--alpha", alpha, "FDR level");
    app.add_option("--min-words", min_words, "minimum words per user over both platforms");

    const std::pair<const char*, Command> commands[] = {
        {"redact", Command::redact},       {"summary", Command::summary},
        {"features", Command::features},   {"diff", Command::diff},
        {"train", Command::train},         {"evaluate", Command::evaluate},
        {"importance", Command::importance}, {"pipeline", Command::pipeline},
    };
    const char* help[] = {"sanitize the keystroke log into an SMS corpus",
                          "corpus statistics per platform",
                          "n-gram and dictionary features per user and platform",
                          "differential language analysis between platforms",
                          "fit ridge models on each platform",
                          "cross-domain evaluation matrix",
                          "feature importance and quadrants",
                          "run every stage and write a manifest"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i) subs.push_back(app.add_subcommand(commands[i].first, help[i]));

    CLI11_PARSE(app, argc, argv);

    try {
        auto config = xplat::io::load_config(config_path);
        if (seed) config.seed = *seed;
        if (alpha) config.fdr_alpha = *alpha;
        if (min_words) config.min_words = *min_words;
        if (!output_dir.empty()) config.output_dir = output_dir;
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const auto files = xplat::pipeline::run(commands[i].second, config);
            xplat::pipeline::write_outputs(files, config.output_dir);
            for (const auto& f : files) std::cout << (config.output_dir / f.first).string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "xplat: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include <iostream>

#include <CLI11.hpp>

#include "xplat/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write the deterministic synthetic fixture"};
    std::string dir;
    xplat::synth::FixtureOptions opt;
    app.add_option("dir", dir, "target directory")->required();
    app.add_option("--users", opt.users)->capture_default_str();
    app.add_option("--seed", opt.seed)->capture_default_str();
    app.add_option("--facebook-posts", opt.facebook_posts)->capture_default_str();
    app.add_option("--sms-entries", opt.sms_entries)->capture_default_str();
    app.add_option("--embedding-dim", opt.embedding_dim)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try {
        xplat::synth::write_fixture(xplat::synth::make_fixture(opt), dir);
    } catch (const std::exception& e) {
        std::cerr << "xplat-fixture: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

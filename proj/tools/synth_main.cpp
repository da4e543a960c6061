#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "asap/error.hpp"
#include "synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Writes a synthetic code/summary pool as JSONL"};
    std::string language = "java", out;
    std::size_t n = 200;
    std::uint64_t seed = 1;
    std::size_t projects = 8;
    app.add_option("-l,--language", language, "java or python");
    app.add_option("-n,--n", n, "number of samples");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--projects", projects, "number of distinct repositories");
    app.add_option("-o,--out", out, "output JSONL")->required();
    CLI11_PARSE(app, argc, argv);
    try {
        auto pool = asap::synth::make_pool(asap::parse_language(language), n, seed, {projects, true});
        asap::save_pool(pool, out);
        std::cout << "wrote " << pool.size() << " samples to " << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// qavar <mode> --config <path> [--out <path>] [--seed <u64>] [--threads <n>]
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qavar/runner.hpp"

namespace {

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw qavar::ConfigError({{"--config", "cannot read '" + path + "'"}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum Allan variance bounds and clock simulation"};
    std::string mode, config_path, out_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    app.add_option("mode", mode, "bound | optimize | simulate | lo-avar | bound-check")->required();
    app.add_option("--config", config_path, "JSON configuration")->required();
    app.add_option("--out", out_path, "CSV output path (default: config output, else stdout)");
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--threads", threads, "worker threads for per-tau work (0: all cores)");
    CLI11_PARSE(app, argc, argv);

    try {
        if (!qavar::parse_run_mode(mode)) {
            throw qavar::ConfigError({{"mode", "unknown mode '" + mode + "'"}});
        }
        std::string text = read_file(config_path);
        auto doc = nlohmann::json::parse(text, nullptr, false);
        // The positional mode fills in a missing "mode"; a different one is an error.
        if (!doc.is_discarded() && doc.is_object()) {
            if (!doc.contains("mode")) {
                doc["mode"] = mode;
                text = doc.dump();
            } else if (doc["mode"] != mode) {
                throw qavar::ConfigError({{"mode", "config says " + doc["mode"].dump() + " but command line says '" +
                                                       mode + "'"}});
            }
        }
        qavar::RunConfig config = qavar::parse_run_config(text);
        if (seed) config.seed = *seed;
        if (!out_path.empty()) config.output = out_path;

        const qavar::RunOutcome outcome = qavar::run(config, threads);
        std::ostream &log = config.output.empty() ? std::cerr : std::cout;
        if (config.output.empty()) {
            std::cout << outcome.csv;
        } else {
            std::ofstream out(config.output, std::ios::binary);
            if (!out) {
                std::cerr << "error: cannot write '" << config.output << "'\n";
                return qavar::exit_validation;
            }
            out << outcome.csv;
        }
        for (const auto &line : outcome.summary) log << line << '\n';
        return outcome.exit_code;
    } catch (const qavar::ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return qavar::exit_validation;
    } catch (const qavar::DomainError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return qavar::exit_validation;
    } catch (const qavar::NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return qavar::exit_numerical;
    } catch (const qavar::ResourceError &e) {
        std::cerr << "resource cap: " << e.what() << '\n';
        return qavar::exit_skipped;
    }
}

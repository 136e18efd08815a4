#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "stfl/harness.hpp"

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitIncapable = 3;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> replicates;
    std::string out;
    std::size_t workers = 1;
    bool require_capable = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON experiment config");
    cmd->add_option("--seed", f.seed, "Override the config seed");
    cmd->add_option("--epochs", f.epochs, "Override the epoch count");
    cmd->add_option("--replicates", f.replicates, "Override the replicate count");
    cmd->add_option("--out", f.out, "Output path (stdout when empty)");
    cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--require-capable", f.require_capable, "Exit with status 3 if the configuration is not capable");
}

stfl::ExperimentConfig apply_overrides(stfl::ExperimentConfig cfg, const CommonFlags& f) {
    if (f.seed) cfg.seed = *f.seed;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.replicates) cfg.replicates = *f.replicates;
    if (!f.out.empty()) cfg.output_path = f.out;
    cfg.validate();
    return cfg;
}

stfl::ExperimentConfig resolve(const CommonFlags& f, stfl::ExperimentConfig fallback = {}) {
    return apply_overrides(f.config_path.empty() ? std::move(fallback) : stfl::load_config(f.config_path), f);
}

/// Writes through a temporary buffer so a failed run leaves no partial file.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
    std::ostringstream buf;
    write(buf);
    if (path.empty()) {
        std::cout << buf.str();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output file '" + path + "'");
    }
    out << buf.str();
}

bool capable(const stfl::ExperimentConfig& cfg) {
    return stfl::theory_report(cfg).verdict == stfl::Verdict::capable;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal federated learning simulator"};
    app.require_subcommand(1);

    CommonFlags run_f, cap_f, tc_f, f2_f, f3_f, dg_f;
    auto* run = app.add_subcommand("run", "Simulate one configuration and write its error trace CSV");
    add_common(run, run_f);

    bool as_json = false;
    auto* cap = app.add_subcommand("capability", "Print the convergence theory report");
    add_common(cap, cap_f);
    cap->add_flag("--json", as_json, "Print one JSON object instead of text");

    std::string grid_text;
    auto* tc = app.add_subcommand("timeconst", "Sweep q*delta and compare fitted and predicted time constants");
    add_common(tc, tc_f);
    tc->add_option("--grid", grid_text, "Comma-separated q*delta values");

    auto* f2 = app.add_subcommand("fig2", "Run the four outage/step-size presets; --out names a directory");
    add_common(f2, f2_f);
    auto* f3 = app.add_subcommand("fig3", "Run the time-constant sweep preset");
    add_common(f3, f3_f);

    std::size_t device = 0;
    auto* dg = app.add_subcommand("datagen", "Dump one device's dataset as CSV");
    add_common(dg, dg_f);
    dg->add_option("--device", device, "Device id");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInvalidConfig;
    }

    try {
        if (*run) {
            const auto cfg = resolve(run_f);
            if (run_f.require_capable && !capable(cfg)) {
                std::cerr << "configuration is not capable\n";
                return kExitIncapable;
            }
            if (cfg.replicates == 1) {
                std::cerr << "warning: one replicate, errors are single-run squared errors\n";
            }
            const auto result = stfl::run_experiment(cfg, {run_f.workers, false});
            emit(cfg.output_path, [&](std::ostream& o) { stfl::write_trace_csv(o, result.trace); });
        } else if (*cap) {
            const auto cfg = resolve(cap_f);
            const auto report = stfl::theory_report(cfg);
            emit(cap_f.out, [&](std::ostream& o) {
                o << (as_json ? stfl::theory_report_json(report) + "\n" : stfl::theory_report_text(report));
            });
            if (cap_f.require_capable && report.verdict != stfl::Verdict::capable) {
                return kExitIncapable;
            }
        } else if (*tc || *f3) {
            const auto preset = stfl::preset_fig3();
            const CommonFlags& f = *tc ? tc_f : f3_f;
            const auto base = resolve(f, preset.base);
            std::vector<double> grid = preset.grid;
            if (*tc && !grid_text.empty()) {
                grid.clear();
                std::stringstream ss(grid_text);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    try {
                        grid.push_back(std::stod(item));
                    } catch (const std::exception&) {
                        throw stfl::ConfigError("malformed --grid value '" + item + "'");
                    }
                }
            }
            const auto rows = stfl::sweep_time_constant(base, grid, {f.workers, false});
            emit(base.output_path, [&](std::ostream& o) { stfl::write_sweep_csv(o, rows); });
            if (f.require_capable) {
                for (const auto& r : rows) {
                    if (!r.capable) return kExitIncapable;
                }
            }
        } else if (*f2) {
            const std::string dir = f2_f.out.empty() ? "." : f2_f.out;
            bool all_capable = true;
            for (auto& preset : stfl::preset_fig2()) {
                CommonFlags f = f2_f;
                f.out.clear();
                const auto cfg = resolve(f, preset.config);
                const auto result = stfl::run_experiment(cfg, {f2_f.workers, false});
                emit(dir + "/fig2_" + preset.label + ".csv",
                     [&](std::ostream& o) { stfl::write_trace_csv(o, result.trace); });
                const bool ok = capable(cfg);
                all_capable = all_capable && ok;
                const auto& rows = result.trace.rows;
                std::printf("%s capable=%s eps_first=%s eps_last=%s\n", preset.label.c_str(), ok ? "yes" : "no",
                            stfl::format_double(rows.front().avg_error).c_str(),
                            stfl::format_double(rows.back().avg_error).c_str());
            }
            if (f2_f.require_capable && !all_capable) {
                return kExitIncapable;
            }
        } else if (*dg) {
            const auto cfg = resolve(dg_f);
            const auto ds = stfl::generate_dataset(cfg.population, device, cfg.seed);
            emit(dg_f.out, [&](std::ostream& o) { stfl::write_dataset_csv(o, ds); });
        }
    } catch (const stfl::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

// aris_sim: Monte Carlo driver for the active-RIS channel estimator.
//
//   aris_sim run      [--config F] [--seed S] [--trials N] [--out DIR] [--format csv|json]
//                     [--regime near|far|both] [--mode active|passive|both] [--workers W]
//   aris_sim codebook [--config F] [--regime near|far|both] [--out DIR]
//   aris_sim single   [--config F] [--seed S] [--trial K] [--regime near|far] [--mode active|passive]
//                     [--model near|far]

#include <cmath>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aris/harness.hpp"

using nlohmann::json;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> workers;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::string regime = "both";
    std::string mode = "both";
    std::string model = "both";
    int trial = 0;
};

void fail_config(const std::string& field, const std::string& message) {
    json err = {{"error", "config"}, {"field", field}, {"message", message}};
    std::cerr << err.dump() << '\n';
}

aris::ExperimentConfig build_config(const Overrides& o) {
    aris::ExperimentConfig c = o.config_path.empty() ? aris::ExperimentConfig{} : aris::load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.trials) c.trials = *o.trials;
    if (o.workers) c.workers = *o.workers;
    if (o.out) c.output_dir = *o.out;
    if (o.format) c.format = *o.format == "json" ? aris::OutputFormat::json : aris::OutputFormat::csv;
    if (o.regime == "near") c.regimes = {aris::Regime::near};
    if (o.regime == "far") c.regimes = {aris::Regime::far};
    if (o.mode == "active") c.modes = {aris::RisMode::active};
    if (o.mode == "passive") c.modes = {aris::RisMode::passive};
    if (o.model == "near") c.models = {aris::SteeringModel::near_field};
    if (o.model == "far") c.models = {aris::SteeringModel::far_field};
    c.validate();
    return c;
}

extern "C" void on_sigint(int) { aris::stop_flag().store(true); }

int cmd_run(const Overrides& o) {
    const auto config = build_config(o);
    std::signal(SIGINT, on_sigint);
    const auto table = aris::run_experiment(config);
    if (table.rows.empty()) {
        std::cerr << json{{"error", "interrupted"}, {"message", "no trial finished"}}.dump() << '\n';
        return 130;
    }
    const auto files = aris::emit_results(table, config, config.output_dir, config.format);

    std::cout << std::left << std::setw(6) << "regime" << std::setw(9) << "mode" << std::setw(11) << "model"
              << std::setw(4) << "L" << std::setw(14) << "nmse_db" << std::setw(12) << "rate" << "capacity\n";
    std::cout << std::fixed;
    for (const auto& a : table.aggregates) {
        std::cout << std::setw(6) << aris::to_string(a.regime) << std::setw(9) << aris::to_string(a.mode)
                  << std::setw(11) << aris::to_string(a.model) << std::setw(4) << a.pilots << std::setw(14)
                  << std::setprecision(2) << 10.0 * std::log10(a.mean_nmse) << std::setw(12) << std::setprecision(4)
                  << a.mean_rate << a.mean_capacity << '\n';
    }
    if (table.estimation_failures > 0) {
        std::cout << "estimation failures: " << table.estimation_failures << '\n';
    }
    for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
    if (table.partial) {
        std::cerr << json{{"error", "interrupted"}, {"message", "partial results written"}}.dump() << '\n';
        return 130;
    }
    return 0;
}

int cmd_codebook(const Overrides& o) {
    const auto config = build_config(o);
    const auto geometry = config.geometry();
    for (auto regime : config.regimes) {
        const auto cb = aris::build_codebook(geometry, regime, config.codebook);
        if (!o.out) {
            std::cout << "# " << aris::to_string(regime) << " codebook, " << cb.size() << " entries\n";
            aris::export_codebook(cb, std::cout);
            continue;
        }
        std::filesystem::create_directories(*o.out);
        const auto path = std::filesystem::path(*o.out) / ("codebook_" + std::string(aris::to_string(regime)) + ".txt");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        aris::export_codebook(cb, out);
        std::cout << "wrote " << path.string() << " (" << cb.size() << " entries)\n";
    }
    return 0;
}

int cmd_single(const Overrides& o) {
    if (o.regime == "both" || o.mode == "both" || o.model == "both") {
        fail_config("--regime/--mode/--model", "single needs one regime, one mode and one model");
        return 2;
    }
    const auto config = build_config(o);
    const auto t = aris::run_single_trial(config, config.regimes[0], config.modes[0], config.models[0], o.trial);

    json j;
    j["regime"] = aris::to_string(config.regimes[0]);
    j["mode"] = aris::to_string(config.modes[0]);
    j["model"] = aris::to_string(config.models[0]);
    j["trial"] = o.trial;
    j["seed"] = aris::trial_seed(config.seed, o.trial, config.regimes[0], config.modes[0], config.models[0]);
    const auto& u = t.user;
    j["user"] = {{"beta", u.beta},
                 {"omega", u.omega},
                 {"azimuth", u.dir.azimuth},
                 {"elevation", u.dir.elevation},
                 {"distance", u.dir.distance ? json(*u.dir.distance) : json(nullptr)}};
    j["capacity_bps_hz"] = t.capacity;
    j["failures"] = t.result.failures;
    j["codebook_exhausted"] = t.result.codebook_exhausted;
    j["rounds"] = json::array();
    for (const auto& r : t.result.history) {
        const auto& e = r.estimate;
        j["rounds"].push_back({{"pilots", r.pilots},
                               {"failed", r.failed},
                               {"degenerate", e.degenerate},
                               {"beta_hat", e.beta_hat},
                               {"omega_hat", e.omega_hat},
                               {"azimuth_hat", e.psi_hat.azimuth},
                               {"elevation_hat", e.psi_hat.elevation},
                               {"distance_hat", e.psi_hat.distance ? json(*e.psi_hat.distance) : json(nullptr)},
                               {"next_codeword", r.next_codeword ? json(*r.next_codeword) : json(nullptr)},
                               {"nmse", r.nmse},
                               {"rate_bps_hz", r.rate}});
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active-RIS parametric channel estimation simulator"};
    app.require_subcommand(1);
    Overrides o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "base seed");
        sub->add_option("--regime", o.regime, "near|far|both")->check(CLI::IsMember({"near", "far", "both"}));
    };

    auto* run = app.add_subcommand("run", "full Monte Carlo experiment");
    common(run);
    run->add_option("--trials", o.trials, "trials per cell")->check(CLI::PositiveNumber);
    run->add_option("--out", o.out, "output directory");
    run->add_option("--format", o.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--mode", o.mode, "active|passive|both")->check(CLI::IsMember({"active", "passive", "both"}));
    run->add_option("--model", o.model, "near|far|both steering model")->check(CLI::IsMember({"near", "far", "both"}));
    run->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);

    auto* codebook = app.add_subcommand("codebook", "export codebooks");
    common(codebook);
    codebook->add_option("--out", o.out, "output directory (stdout if omitted)");

    auto* single = app.add_subcommand("single", "one verbose trial trace");
    common(single);
    single->add_option("--trial", o.trial, "trial index")->check(CLI::NonNegativeNumber);
    single->add_option("--mode", o.mode, "active|passive")->check(CLI::IsMember({"active", "passive", "both"}));
    single->add_option("--model", o.model, "near|far steering model")->check(CLI::IsMember({"near", "far", "both"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail_config("<cli>", e.what());
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(o);
        if (codebook->parsed()) return cmd_codebook(o);
        return cmd_single(o);
    } catch (const aris::ConfigError& e) {
        fail_config(e.field(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}

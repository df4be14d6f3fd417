#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aris/beamcontrol.hpp"
#include "aris/estimator.hpp"
#include "aris/geometry.hpp"
#include "aris/protocol.hpp"
#include "aris/types.hpp"

namespace aris {

enum class NmseTarget { ue_ris, cascaded };
enum class OutputFormat { csv, json };

struct GridOptions {
    int depth = 4;
    double shrink = 0.25;
    int points_per_axis = 5;
};

struct ExperimentConfig {
    double carrier_hz = 28e9;
    double bandwidth_hz = 1e6;
    int n_h = 32;
    int n_v = 32;
    double spacing_h_wavelengths = 0.5;
    double spacing_v_wavelengths = 0.5;
    double bs_distance_m = 15.0;
    double total_power_w = 0.2;
    double ris_power_fraction = 0.25;
    double pilot_over_data_db = 10.0;
    double noise_figure_db = 10.0;
    double amplifier_noise_offset_db = 0.0;  // sigma_v^2 relative to sigma^2
    std::vector<Regime> regimes{Regime::near, Regime::far};
    std::vector<RisMode> modes{RisMode::active, RisMode::passive};
    std::vector<SteeringModel> models{SteeringModel::near_field, SteeringModel::far_field};
    std::vector<int> pilot_budgets{2, 3, 4, 5, 6, 7, 8, 9, 10};
    int trials = 1000;
    std::uint64_t seed = 1;
    int workers = 1;
    CodebookOptions codebook;
    GridOptions grid;
    NmseTarget nmse_target = NmseTarget::ue_ris;
    int coherence_block = 0;  // > 0 applies the (1 - L/T) pilot-overhead factor to rates
    PilotScaling pilot_scaling = PilotScaling::nominal;
    std::string output_dir = "results";
    OutputFormat format = OutputFormat::csv;

    ArrayGeometry geometry() const;
    NoiseModel noise() const;
    int max_pilots() const;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialRecord {
    Regime regime = Regime::near;
    RisMode mode = RisMode::active;
    SteeringModel model = SteeringModel::near_field;
    int trial = 0;
    std::uint64_t seed = 0;
    int pilots = 0;
    double nmse = 0.0;
    double rate = 0.0;
    double capacity = 0.0;

    bool operator==(const TrialRecord&) const = default;
};

struct AggregateRow {
    Regime regime = Regime::near;
    RisMode mode = RisMode::active;
    SteeringModel model = SteeringModel::near_field;
    int pilots = 0;
    int trials = 0;
    double mean_nmse = 0.0;
    double stderr_nmse = 0.0;
    double mean_rate = 0.0;
    double stderr_rate = 0.0;
    double mean_capacity = 0.0;

    bool operator==(const AggregateRow&) const = default;
};

struct MismatchRow {
    Regime regime = Regime::near;
    RisMode mode = RisMode::active;
    int pilots = 0;
    double gap = 0.0;  // mean rate near-field model minus far-field model

    bool operator==(const MismatchRow&) const = default;
};

struct ResultTable {
    std::vector<TrialRecord> rows;
    std::vector<AggregateRow> aggregates;
    bool partial = false;  // interrupted before every trial ran
    int estimation_failures = 0;
};

// Cleared at the start of run_experiment; set it (e.g. from a signal handler)
// to stop scheduling trials. Finished trials are kept.
std::atomic<bool>& stop_flag();

// Near-field model: near codebook; far-field model: far codebook.
Codebook make_codebook_for(const ArrayGeometry& geometry, SteeringModel model, const CodebookOptions& options);

// Coarse candidates are the codebook's generating parameters.
SearchGrid make_search_grid(const ArrayGeometry& geometry, SteeringModel model, const Codebook& codebook,
                            const GridOptions& options);

// Seed of one (trial, regime, mode, model) cell.
std::uint64_t trial_seed(std::uint64_t base, int trial, Regime regime, RisMode mode, SteeringModel model);
// Seed of the user draw, shared by every mode/model of a (trial, regime).
std::uint64_t user_seed(std::uint64_t base, int trial, Regime regime);

// Everything the CLI `single` command prints for one trial.
struct SingleTrial {
    LosChannelParams user;
    Scenario scenario;
    ProtocolResult result;
    double capacity = 0.0;
};

SingleTrial run_single_trial(const ExperimentConfig& config, Regime regime, RisMode mode, SteeringModel model,
                             int trial);

ResultTable run_experiment(const ExperimentConfig& config);

// Arithmetic means per (regime, mode, model, pilots), in first-seen order.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& rows);

// Needs both models for a (regime, mode, pilots) cell; throws otherwise.
std::vector<MismatchRow> model_mismatch_report(const ResultTable& table);

// CSV: trials.csv, aggregate.csv, mismatch.csv (when both models ran).
// JSON: results.json with a config echo. Returns the files written.
std::vector<std::filesystem::path> emit_results(const ResultTable& table, const ExperimentConfig& config,
                                                const std::filesystem::path& dir, OutputFormat format);

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path);
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path);
ResultTable read_results_json(const std::filesystem::path& path);

}  // namespace aris

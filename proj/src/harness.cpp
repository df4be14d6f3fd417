#include "aris/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "aris/channel.hpp"
#include "aris/metrics.hpp"

namespace aris {

using nlohmann::json;

ArrayGeometry ExperimentConfig::geometry() const {
    const double lambda = kSpeedOfLight / carrier_hz;
    ArrayGeometry g{n_h, n_v, spacing_h_wavelengths * lambda, spacing_v_wavelengths * lambda, lambda};
    g.validate();
    return g;
}

NoiseModel ExperimentConfig::noise() const {
    NoiseModel n;
    n.sigma2 = thermal_noise_power(bandwidth_hz, noise_figure_db);
    n.sigma_v2 = n.sigma2 * std::pow(10.0, amplifier_noise_offset_db / 10.0);
    n.rng_seed = seed;
    return n;
}

int ExperimentConfig::max_pilots() const {
    return pilot_budgets.empty() ? 0 : *std::max_element(pilot_budgets.begin(), pilot_budgets.end());
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* message) {
        if (!ok) throw ConfigError(field, message);
    };
    require(carrier_hz > 0.0, "carrier_hz", "must be positive");
    require(bandwidth_hz > 0.0, "bandwidth_hz", "must be positive");
    require(n_h >= 1, "geometry.n_h", "must be >= 1");
    require(n_v >= 1, "geometry.n_v", "must be >= 1");
    require(spacing_h_wavelengths > 0.0, "geometry.spacing_h_wavelengths", "must be positive");
    require(spacing_v_wavelengths > 0.0, "geometry.spacing_v_wavelengths", "must be positive");
    require(n_h * n_v >= 2, "geometry", "array needs at least two elements");
    require(bs_distance_m > 0.0, "bs_distance_m", "must be positive");
    require(total_power_w > 0.0, "total_power_w", "must be positive");
    require(ris_power_fraction > 0.0 && ris_power_fraction < 1.0, "ris_power_fraction", "must lie in (0, 1)");
    require(std::isfinite(pilot_over_data_db), "pilot_over_data_db", "must be finite");
    require(std::isfinite(noise_figure_db), "noise_figure_db", "must be finite");
    require(std::isfinite(amplifier_noise_offset_db), "amplifier_noise_offset_db", "must be finite");
    require(!regimes.empty(), "regimes", "must not be empty");
    require(!modes.empty(), "modes", "must not be empty");
    require(!models.empty(), "models", "must not be empty");
    require(!pilot_budgets.empty(), "pilot_budgets", "must not be empty");
    for (int l : pilot_budgets) require(l >= 2, "pilot_budgets", "every budget must be >= 2");
    require(trials >= 1, "trials", "must be >= 1");
    require(workers >= 1, "workers", "must be >= 1");
    require(codebook.near_distance_rings >= 1, "codebook.near_distance_rings", "must be >= 1");
    require(codebook.max_sin > 0.0 && codebook.max_sin <= 1.0, "codebook.max_sin", "must lie in (0, 1]");
    require(grid.depth >= 0, "grid.depth", "must be >= 0");
    require(grid.shrink > 0.0 && grid.shrink < 1.0, "grid.shrink", "must lie in (0, 1)");
    require(grid.points_per_axis >= 1 && grid.points_per_axis % 2 == 1, "grid.points_per_axis",
            "must be odd and >= 1");
    require(coherence_block >= 0, "coherence_block", "must be >= 0");
    require(coherence_block == 0 || coherence_block > max_pilots(), "coherence_block",
            "must exceed the largest pilot budget");
}

namespace {

template <typename T>
T get_field(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path, "wrong type");
    }
}

void check_keys(const json& j, const std::string& prefix, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown key");
    }
}

template <typename E, typename Parse>
std::vector<E> parse_enum_list(const json& j, const std::string& path, Parse parse) {
    std::vector<E> out;
    for (const auto& s : get_field<std::vector<std::string>>(j, path)) {
        try {
            out.push_back(parse(s));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path, e.what());
        }
    }
    return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "",
               {"carrier_hz", "bandwidth_hz", "geometry", "bs_distance_m", "total_power_w", "ris_power_fraction",
                "pilot_over_data_db", "noise_figure_db", "amplifier_noise_offset_db", "regimes", "modes", "models",
                "pilot_budgets", "trials", "seed", "workers", "codebook", "grid", "nmse_target", "coherence_block",
                "pilot_scaling", "output"});
    ExperimentConfig c;
    auto read = [&](const char* key, auto& field) {
        if (j.contains(key)) field = get_field<std::decay_t<decltype(field)>>(j.at(key), key);
    };
    read("carrier_hz", c.carrier_hz);
    read("bandwidth_hz", c.bandwidth_hz);
    read("bs_distance_m", c.bs_distance_m);
    read("total_power_w", c.total_power_w);
    read("ris_power_fraction", c.ris_power_fraction);
    read("pilot_over_data_db", c.pilot_over_data_db);
    read("noise_figure_db", c.noise_figure_db);
    read("amplifier_noise_offset_db", c.amplifier_noise_offset_db);
    read("pilot_budgets", c.pilot_budgets);
    read("trials", c.trials);
    read("seed", c.seed);
    read("workers", c.workers);
    read("coherence_block", c.coherence_block);

    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        check_keys(g, "geometry", {"n_h", "n_v", "spacing_h_wavelengths", "spacing_v_wavelengths"});
        if (g.contains("n_h")) c.n_h = get_field<int>(g.at("n_h"), "geometry.n_h");
        if (g.contains("n_v")) c.n_v = get_field<int>(g.at("n_v"), "geometry.n_v");
        if (g.contains("spacing_h_wavelengths")) {
            c.spacing_h_wavelengths = get_field<double>(g.at("spacing_h_wavelengths"), "geometry.spacing_h_wavelengths");
        }
        if (g.contains("spacing_v_wavelengths")) {
            c.spacing_v_wavelengths = get_field<double>(g.at("spacing_v_wavelengths"), "geometry.spacing_v_wavelengths");
        }
    }
    if (j.contains("regimes")) c.regimes = parse_enum_list<Regime>(j.at("regimes"), "regimes", parse_regime);
    if (j.contains("modes")) c.modes = parse_enum_list<RisMode>(j.at("modes"), "modes", parse_mode);
    if (j.contains("models")) c.models = parse_enum_list<SteeringModel>(j.at("models"), "models", parse_model);
    if (j.contains("codebook")) {
        const auto& cb = j.at("codebook");
        check_keys(cb, "codebook", {"near_distance_rings", "max_sin"});
        if (cb.contains("near_distance_rings")) {
            c.codebook.near_distance_rings = get_field<int>(cb.at("near_distance_rings"), "codebook.near_distance_rings");
        }
        if (cb.contains("max_sin")) c.codebook.max_sin = get_field<double>(cb.at("max_sin"), "codebook.max_sin");
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, "grid", {"depth", "shrink", "points_per_axis"});
        if (g.contains("depth")) c.grid.depth = get_field<int>(g.at("depth"), "grid.depth");
        if (g.contains("shrink")) c.grid.shrink = get_field<double>(g.at("shrink"), "grid.shrink");
        if (g.contains("points_per_axis")) {
            c.grid.points_per_axis = get_field<int>(g.at("points_per_axis"), "grid.points_per_axis");
        }
    }
    if (j.contains("nmse_target")) {
        const auto s = get_field<std::string>(j.at("nmse_target"), "nmse_target");
        if (s == "ue_ris") {
            c.nmse_target = NmseTarget::ue_ris;
        } else if (s == "cascaded") {
            c.nmse_target = NmseTarget::cascaded;
        } else {
            throw ConfigError("nmse_target", "expected 'ue_ris' or 'cascaded'");
        }
    }
    if (j.contains("pilot_scaling")) {
        const auto s = get_field<std::string>(j.at("pilot_scaling"), "pilot_scaling");
        if (s == "nominal") {
            c.pilot_scaling = PilotScaling::nominal;
        } else if (s == "amplifier") {
            c.pilot_scaling = PilotScaling::amplifier;
        } else {
            throw ConfigError("pilot_scaling", "expected 'nominal' or 'amplifier'");
        }
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, "output", {"dir", "format"});
        if (o.contains("dir")) c.output_dir = get_field<std::string>(o.at("dir"), "output.dir");
        if (o.contains("format")) {
            const auto s = get_field<std::string>(o.at("format"), "output.format");
            if (s == "csv") {
                c.format = OutputFormat::csv;
            } else if (s == "json") {
                c.format = OutputFormat::json;
            } else {
                throw ConfigError("output.format", "expected 'csv' or 'json'");
            }
        }
    }
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["carrier_hz"] = c.carrier_hz;
    j["bandwidth_hz"] = c.bandwidth_hz;
    j["geometry"] = {{"n_h", c.n_h},
                     {"n_v", c.n_v},
                     {"spacing_h_wavelengths", c.spacing_h_wavelengths},
                     {"spacing_v_wavelengths", c.spacing_v_wavelengths}};
    j["bs_distance_m"] = c.bs_distance_m;
    j["total_power_w"] = c.total_power_w;
    j["ris_power_fraction"] = c.ris_power_fraction;
    j["pilot_over_data_db"] = c.pilot_over_data_db;
    j["noise_figure_db"] = c.noise_figure_db;
    j["amplifier_noise_offset_db"] = c.amplifier_noise_offset_db;
    json regimes = json::array(), modes = json::array(), models = json::array();
    for (auto r : c.regimes) regimes.push_back(std::string(to_string(r)));
    for (auto m : c.modes) modes.push_back(std::string(to_string(m)));
    for (auto m : c.models) models.push_back(std::string(to_string(m)));
    j["regimes"] = regimes;
    j["modes"] = modes;
    j["models"] = models;
    j["pilot_budgets"] = c.pilot_budgets;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["codebook"] = {{"near_distance_rings", c.codebook.near_distance_rings}, {"max_sin", c.codebook.max_sin}};
    j["grid"] = {{"depth", c.grid.depth}, {"shrink", c.grid.shrink}, {"points_per_axis", c.grid.points_per_axis}};
    j["nmse_target"] = c.nmse_target == NmseTarget::ue_ris ? "ue_ris" : "cascaded";
    j["coherence_block"] = c.coherence_block;
    j["pilot_scaling"] = c.pilot_scaling == PilotScaling::nominal ? "nominal" : "amplifier";
    j["output"] = {{"dir", c.output_dir}, {"format", c.format == OutputFormat::csv ? "csv" : "json"}};
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::atomic<bool>& stop_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

Codebook make_codebook_for(const ArrayGeometry& geometry, SteeringModel model, const CodebookOptions& options) {
    return build_codebook(geometry, model == SteeringModel::near_field ? Regime::near : Regime::far, options);
}

SearchGrid make_search_grid(const ArrayGeometry& geometry, SteeringModel model, const Codebook& codebook,
                            const GridOptions& options) {
    const auto bounds = field_boundaries(geometry);
    const double max_inv = model == SteeringModel::near_field && bounds.bjornson > 0.0 ? 1.0 / bounds.bjornson : 0.0;
    return SearchGrid::build(geometry, model, codebook.all_params(), codebook.u_step, codebook.v_step,
                             model == SteeringModel::near_field ? codebook.inv_distance_step : 0.0, max_inv,
                             options.depth, options.shrink, options.points_per_axis);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

}  // namespace

std::uint64_t user_seed(std::uint64_t base, int trial, Regime regime) {
    const std::uint64_t tag = mix(mix(0x75736572ULL, static_cast<std::uint64_t>(trial)),
                                  static_cast<std::uint64_t>(regime));
    return base ^ tag;
}

std::uint64_t trial_seed(std::uint64_t base, int trial, Regime regime, RisMode mode, SteeringModel model) {
    std::uint64_t tag = mix(0x747269616cULL, static_cast<std::uint64_t>(trial));
    tag = mix(tag, static_cast<std::uint64_t>(regime));
    tag = mix(tag, static_cast<std::uint64_t>(mode));
    tag = mix(tag, static_cast<std::uint64_t>(model));
    return base ^ tag;
}

namespace {

struct Setup {
    ArrayGeometry geometry;
    CVector h;
    NoiseModel noise;
    std::map<SteeringModel, Codebook> codebooks;
    std::map<SteeringModel, SearchGrid> grids;
};

Setup make_setup(const ExperimentConfig& config, const std::vector<SteeringModel>& models) {
    Setup s;
    s.geometry = config.geometry();
    DirectionParams boresight;
    s.h = make_bs_ris_channel(s.geometry, config.bs_distance_m, boresight).h;
    s.noise = config.noise();
    for (auto model : models) {
        if (s.codebooks.count(model)) continue;
        auto cb = make_codebook_for(s.geometry, model, config.codebook);
        s.grids.emplace(model, make_search_grid(s.geometry, model, cb, config.grid));
        s.codebooks.emplace(model, std::move(cb));
    }
    return s;
}

Scenario make_scenario(const ExperimentConfig& config, const Setup& setup, const CVector& g, RisMode mode) {
    Scenario sc;
    sc.geometry = setup.geometry;
    sc.h = setup.h;
    sc.g = g;
    sc.noise = setup.noise;
    if (mode == RisMode::passive) sc.noise.sigma_v2 = 0.0;
    sc.powers = power_budget(mode, config.total_power_w, config.ris_power_fraction, config.pilot_over_data_db);
    sc.mode = mode;
    sc.pilot_scaling = config.pilot_scaling;
    return sc;
}

struct Cell {
    Regime regime;
    RisMode mode;
    SteeringModel model;
};

struct JobOutput {
    std::vector<TrialRecord> rows;
    int failures = 0;
    bool done = false;
};

JobOutput run_job(const ExperimentConfig& config, const Setup& setup, const Cell& cell, int trial) {
    Rng user_rng(user_seed(config.seed, trial, cell.regime));
    const auto user = sample_user(setup.geometry, cell.regime, user_rng);
    const CVector g = make_channel(setup.geometry, user).g;
    const auto scenario = make_scenario(config, setup, g, cell.mode);

    const std::uint64_t seed = trial_seed(config.seed, trial, cell.regime, cell.mode, cell.model);
    Rng rng(seed);
    const auto result = run_protocol(scenario, setup.grids.at(cell.model), setup.codebooks.at(cell.model),
                                     config.max_pilots(), rng);
    const double capacity = capacity_bound(cell.mode, scenario.h, g, scenario.powers, scenario.noise);

    JobOutput out;
    out.failures = result.failures;
    for (int budget : config.pilot_budgets) {
        // rounds double as smaller budgets; after early stop the last round stands in
        const RoundRecord* round = &result.history.front();
        for (const auto& r : result.history) {
            if (r.pilots <= budget) round = &r;
        }
        TrialRecord rec;
        rec.regime = cell.regime;
        rec.mode = cell.mode;
        rec.model = cell.model;
        rec.trial = trial;
        rec.seed = seed;
        rec.pilots = budget;
        rec.nmse = config.nmse_target == NmseTarget::cascaded ? nmse_cascaded(round->estimate.g_hat, g, scenario.h)
                                                              : round->nmse;
        rec.rate = round->rate;
        if (config.coherence_block > 0) {
            rec.rate *= 1.0 - static_cast<double>(budget) / config.coherence_block;
        }
        rec.capacity = capacity;
        out.rows.push_back(rec);
    }
    out.done = true;
    return out;
}

}  // namespace

SingleTrial run_single_trial(const ExperimentConfig& config, Regime regime, RisMode mode, SteeringModel model,
                             int trial) {
    config.validate();
    const auto setup = make_setup(config, {model});
    SingleTrial out;
    Rng user_rng(user_seed(config.seed, trial, regime));
    out.user = sample_user(setup.geometry, regime, user_rng);
    const CVector g = make_channel(setup.geometry, out.user).g;
    out.scenario = make_scenario(config, setup, g, mode);
    Rng rng(trial_seed(config.seed, trial, regime, mode, model));
    out.result = run_protocol(out.scenario, setup.grids.at(model), setup.codebooks.at(model), config.max_pilots(), rng);
    out.capacity = capacity_bound(mode, out.scenario.h, g, out.scenario.powers, out.scenario.noise);
    return out;
}

ResultTable run_experiment(const ExperimentConfig& config) {
    config.validate();
    stop_flag().store(false);
    const auto setup = make_setup(config, config.models);

    std::vector<Cell> cells;
    for (auto regime : config.regimes) {
        for (auto mode : config.modes) {
            for (auto model : config.models) cells.push_back({regime, mode, model});
        }
    }
    const std::size_t trials = static_cast<std::size_t>(config.trials);
    const std::size_t jobs = cells.size() * trials;
    std::vector<JobOutput> outputs(jobs);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            if (stop_flag().load()) return;
            const std::size_t job = next.fetch_add(1);
            if (job >= jobs) return;
            try {
                outputs[job] = run_job(config, setup, cells[job / trials], static_cast<int>(job % trials));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                stop_flag().store(true);
                return;
            }
        }
    };
    const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(jobs)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    ResultTable table;
    for (auto& out : outputs) {
        if (!out.done) {
            table.partial = true;
            continue;
        }
        table.estimation_failures += out.failures;
        table.rows.insert(table.rows.end(), out.rows.begin(), out.rows.end());
    }
    table.aggregates = aggregate(table.rows);
    return table;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& rows) {
    using Key = std::tuple<Regime, RisMode, SteeringModel, int>;
    std::vector<Key> order;
    std::map<Key, std::vector<const TrialRecord*>> groups;
    for (const auto& r : rows) {
        const Key key{r.regime, r.mode, r.model, r.pilots};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(&r);
    }
    std::vector<AggregateRow> out;
    for (const auto& key : order) {
        const auto& members = groups.at(key);
        const double n = static_cast<double>(members.size());
        AggregateRow a;
        std::tie(a.regime, a.mode, a.model, a.pilots) = key;
        a.trials = static_cast<int>(members.size());
        for (const auto* r : members) {
            a.mean_nmse += r->nmse;
            a.mean_rate += r->rate;
            a.mean_capacity += r->capacity;
        }
        a.mean_nmse /= n;
        a.mean_rate /= n;
        a.mean_capacity /= n;
        if (members.size() > 1) {
            double var_nmse = 0.0, var_rate = 0.0;
            for (const auto* r : members) {
                var_nmse += (r->nmse - a.mean_nmse) * (r->nmse - a.mean_nmse);
                var_rate += (r->rate - a.mean_rate) * (r->rate - a.mean_rate);
            }
            a.stderr_nmse = std::sqrt(var_nmse / (n - 1.0) / n);
            a.stderr_rate = std::sqrt(var_rate / (n - 1.0) / n);
        }
        out.push_back(a);
    }
    return out;
}

std::vector<MismatchRow> model_mismatch_report(const ResultTable& table) {
    using Key = std::tuple<Regime, RisMode, int>;
    std::map<Key, std::map<SteeringModel, double>> rates;
    std::vector<Key> order;
    for (const auto& a : table.aggregates) {
        const Key key{a.regime, a.mode, a.pilots};
        auto [it, inserted] = rates.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second[a.model] = a.mean_rate;
    }
    std::vector<MismatchRow> out;
    for (const auto& key : order) {
        const auto& m = rates.at(key);
        if (!m.count(SteeringModel::near_field) || !m.count(SteeringModel::far_field)) {
            throw std::invalid_argument("model mismatch report needs both steering models in every cell");
        }
        MismatchRow row;
        std::tie(row.regime, row.mode, row.pilots) = key;
        row.gap = m.at(SteeringModel::near_field) - m.at(SteeringModel::far_field);
        out.push_back(row);
    }
    return out;
}

}  // namespace aris

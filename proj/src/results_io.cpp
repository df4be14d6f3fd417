#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "aris/harness.hpp"

namespace aris {

using nlohmann::json;

namespace {

// shortest representation that parses back to the same double
std::string fmt(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad number: " + s);
    return x;
}

template <typename T>
T parse_int(const std::string& s) {
    T x{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad integer: " + s);
    return x;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

const char* kTrialsHeader = "regime,mode,model,trial,seed,pilots,nmse,rate_bps_hz,capacity_bps_hz";
const char* kAggregateHeader =
    "regime,mode,model,pilots,trials,mean_nmse,stderr_nmse,mean_rate_bps_hz,stderr_rate_bps_hz,mean_capacity_bps_hz";
const char* kMismatchHeader = "regime,mode,pilots,rate_gap_bps_hz";

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const char* header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != header) throw std::runtime_error(path.string() + ": unexpected header");
    const auto columns = split(header).size();
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != columns) throw std::runtime_error(path.string() + ": wrong column count");
        rows.push_back(std::move(cells));
    }
    return rows;
}

// JSON has no infinity; write non-finite values as strings
json num(double x) { return std::isfinite(x) ? json(x) : json(fmt(x)); }

double num_from(const json& j) { return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>(); }

json trial_json(const TrialRecord& r) {
    return {{"regime", to_string(r.regime)},
            {"mode", to_string(r.mode)},
            {"model", to_string(r.model)},
            {"trial", r.trial},
            {"seed", r.seed},
            {"pilots", r.pilots},
            {"nmse", num(r.nmse)},
            {"rate_bps_hz", num(r.rate)},
            {"capacity_bps_hz", num(r.capacity)}};
}

json aggregate_json(const AggregateRow& a) {
    return {{"regime", to_string(a.regime)},
            {"mode", to_string(a.mode)},
            {"model", to_string(a.model)},
            {"pilots", a.pilots},
            {"trials", a.trials},
            {"mean_nmse", num(a.mean_nmse)},
            {"stderr_nmse", num(a.stderr_nmse)},
            {"mean_rate_bps_hz", num(a.mean_rate)},
            {"stderr_rate_bps_hz", num(a.stderr_rate)},
            {"mean_capacity_bps_hz", num(a.mean_capacity)}};
}

bool has_both_models(const ExperimentConfig& config) {
    bool near = false, far = false;
    for (auto m : config.models) {
        near |= m == SteeringModel::near_field;
        far |= m == SteeringModel::far_field;
    }
    return near && far;
}

}  // namespace

std::vector<std::filesystem::path> emit_results(const ResultTable& table, const ExperimentConfig& config,
                                                const std::filesystem::path& dir, OutputFormat format) {
    if (table.rows.empty()) throw std::runtime_error("no trials finished; nothing to write");
    std::filesystem::create_directories(dir);
    const bool mismatch = has_both_models(config);
    std::vector<std::filesystem::path> written;

    if (format == OutputFormat::json) {
        json j;
        j["config"] = config_to_json(config);
        j["partial"] = table.partial;
        j["estimation_failures"] = table.estimation_failures;
        j["trials"] = json::array();
        for (const auto& r : table.rows) j["trials"].push_back(trial_json(r));
        j["aggregate"] = json::array();
        for (const auto& a : table.aggregates) j["aggregate"].push_back(aggregate_json(a));
        if (mismatch) {
            j["mismatch"] = json::array();
            for (const auto& m : model_mismatch_report(table)) {
                j["mismatch"].push_back({{"regime", to_string(m.regime)},
                                         {"mode", to_string(m.mode)},
                                         {"pilots", m.pilots},
                                         {"rate_gap_bps_hz", num(m.gap)}});
            }
        }
        const auto path = dir / "results.json";
        open_out(path) << j.dump(2) << '\n';
        written.push_back(path);
        return written;
    }

    {
        const auto path = dir / "trials.csv";
        auto out = open_out(path);
        out << kTrialsHeader << '\n';
        for (const auto& r : table.rows) {
            out << to_string(r.regime) << ',' << to_string(r.mode) << ',' << to_string(r.model) << ',' << r.trial
                << ',' << r.seed << ',' << r.pilots << ',' << fmt(r.nmse) << ',' << fmt(r.rate) << ','
                << fmt(r.capacity) << '\n';
        }
        written.push_back(path);
    }
    {
        const auto path = dir / "aggregate.csv";
        auto out = open_out(path);
        out << kAggregateHeader << '\n';
        for (const auto& a : table.aggregates) {
            out << to_string(a.regime) << ',' << to_string(a.mode) << ',' << to_string(a.model) << ',' << a.pilots
                << ',' << a.trials << ',' << fmt(a.mean_nmse) << ',' << fmt(a.stderr_nmse) << ','
                << fmt(a.mean_rate) << ',' << fmt(a.stderr_rate) << ',' << fmt(a.mean_capacity) << '\n';
        }
        written.push_back(path);
    }
    if (mismatch) {
        const auto path = dir / "mismatch.csv";
        auto out = open_out(path);
        out << kMismatchHeader << '\n';
        for (const auto& m : model_mismatch_report(table)) {
            out << to_string(m.regime) << ',' << to_string(m.mode) << ',' << m.pilots << ',' << fmt(m.gap) << '\n';
        }
        written.push_back(path);
    }
    return written;
}

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
    std::vector<TrialRecord> out;
    for (const auto& c : read_csv(path, kTrialsHeader)) {
        TrialRecord r;
        r.regime = parse_regime(c[0]);
        r.mode = parse_mode(c[1]);
        r.model = parse_model(c[2]);
        r.trial = parse_int<int>(c[3]);
        r.seed = parse_int<std::uint64_t>(c[4]);
        r.pilots = parse_int<int>(c[5]);
        r.nmse = parse_double(c[6]);
        r.rate = parse_double(c[7]);
        r.capacity = parse_double(c[8]);
        out.push_back(r);
    }
    return out;
}

std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
    std::vector<AggregateRow> out;
    for (const auto& c : read_csv(path, kAggregateHeader)) {
        AggregateRow a;
        a.regime = parse_regime(c[0]);
        a.mode = parse_mode(c[1]);
        a.model = parse_model(c[2]);
        a.pilots = parse_int<int>(c[3]);
        a.trials = parse_int<int>(c[4]);
        a.mean_nmse = parse_double(c[5]);
        a.stderr_nmse = parse_double(c[6]);
        a.mean_rate = parse_double(c[7]);
        a.stderr_rate = parse_double(c[8]);
        a.mean_capacity = parse_double(c[9]);
        out.push_back(a);
    }
    return out;
}

ResultTable read_results_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const json j = json::parse(in);
    ResultTable t;
    t.partial = j.at("partial").get<bool>();
    t.estimation_failures = j.at("estimation_failures").get<int>();
    for (const auto& r : j.at("trials")) {
        TrialRecord rec;
        rec.regime = parse_regime(r.at("regime").get<std::string>());
        rec.mode = parse_mode(r.at("mode").get<std::string>());
        rec.model = parse_model(r.at("model").get<std::string>());
        rec.trial = r.at("trial").get<int>();
        rec.seed = r.at("seed").get<std::uint64_t>();
        rec.pilots = r.at("pilots").get<int>();
        rec.nmse = num_from(r.at("nmse"));
        rec.rate = num_from(r.at("rate_bps_hz"));
        rec.capacity = num_from(r.at("capacity_bps_hz"));
        t.rows.push_back(rec);
    }
    for (const auto& r : j.at("aggregate")) {
        AggregateRow a;
        a.regime = parse_regime(r.at("regime").get<std::string>());
        a.mode = parse_mode(r.at("mode").get<std::string>());
        a.model = parse_model(r.at("model").get<std::string>());
        a.pilots = r.at("pilots").get<int>();
        a.trials = r.at("trials").get<int>();
        a.mean_nmse = num_from(r.at("mean_nmse"));
        a.stderr_nmse = num_from(r.at("stderr_nmse"));
        a.mean_rate = num_from(r.at("mean_rate_bps_hz"));
        a.stderr_rate = num_from(r.at("stderr_rate_bps_hz"));
        a.mean_capacity = num_from(r.at("mean_capacity_bps_hz"));
        t.aggregates.push_back(a);
    }
    return t;
}

}  // namespace aris

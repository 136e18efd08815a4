#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stfl/harness.hpp"

namespace stfl {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown field '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number_unsigned()) {
        throw ConfigError("field '" + std::string(key) + "' in " + where + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<double> get_vector(const json& v, const std::string& where);

Matrix parse_matrix(const json& v, const std::string& where) {
    if (!v.is_array()) {
        throw ConfigError(where + " must be an array of rows");
    }
    std::vector<std::vector<double>> rows;
    for (const auto& r : v) {
        rows.push_back(get_vector(r, where));
    }
    try {
        return Matrix::from_rows(rows);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

PopulationSpec parse_population(const json& v) {
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        if (name == "default") {
            return default_population_spec();
        }
        if (name == "zero_mean") {
            return zero_mean_population(default_population_spec());
        }
        throw ConfigError("population must be an object, \"default\" or \"zero_mean\"");
    }
    if (!v.is_object()) {
        throw ConfigError("population must be an object, \"default\" or \"zero_mean\"");
    }
    const std::string where = "population";
    reject_unknown(v,
                   {"population_size", "dataset_size", "dimension", "mixture", "target_model", "label_noise_std"},
                   where);
    PopulationSpec p = default_population_spec();
    if (v.contains("population_size")) p.population_size = get_count(v, "population_size", where);
    if (v.contains("dataset_size")) p.dataset_size = get_count(v, "dataset_size", where);
    if (v.contains("dimension")) p.dimension = get_count(v, "dimension", where);
    if (v.contains("target_model")) p.target_model = get_vector(v.at("target_model"), "population.target_model");
    if (v.contains("label_noise_std")) p.label_noise_std = get_as<double>(v, "label_noise_std", where);
    if (v.contains("mixture")) {
        const json& mix = v.at("mixture");
        if (!mix.is_array()) {
            throw ConfigError("population.mixture must be an array");
        }
        p.mixture.clear();
        for (std::size_t k = 0; k < mix.size(); ++k) {
            const std::string w = "population.mixture[" + std::to_string(k) + "]";
            const json& c = mix[k];
            if (!c.is_object()) {
                throw ConfigError(w + " must be an object");
            }
            reject_unknown(c, {"mean", "covariance", "probability"}, w);
            for (const char* f : {"mean", "covariance", "probability"}) {
                if (!c.contains(f)) {
                    throw ConfigError(w + " is missing '" + f + "'");
                }
            }
            p.mixture.push_back({get_vector(c.at("mean"), w + ".mean"), parse_matrix(c.at("covariance"), w + ".covariance"),
                                 get_as<double>(c, "probability", w)});
        }
    }
    return p;
}

std::vector<double> get_vector(const json& v, const std::string& where) {
    if (!v.is_array()) {
        throw ConfigError(where + " must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) {
            throw ConfigError(where + " must be an array of numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        rows.push_back(m.row(r));
    }
    return rows;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    const std::string where = "config";
    reject_unknown(doc,
                   {"population", "num_selected", "epochs", "replicates", "seed", "alpha", "q", "omega",
                    "beta_schedule", "compensation_enabled", "output_path", "dynamics", "compensator", "delta",
                    "normalize_compensator", "class_alpha"},
                   where);
    ExperimentConfig c;
    if (doc.contains("population")) c.population = parse_population(doc.at("population"));
    if (doc.contains("num_selected")) c.num_selected = get_count(doc, "num_selected", where);
    if (doc.contains("epochs")) c.epochs = get_count(doc, "epochs", where);
    if (doc.contains("replicates")) c.replicates = get_count(doc, "replicates", where);
    if (doc.contains("seed")) c.seed = static_cast<std::uint64_t>(get_count(doc, "seed", where));
    if (doc.contains("alpha")) {
        const json& a = doc.at("alpha");
        if (a.is_string() && a.get<std::string>() == "optimal") {
            c.alpha.optimal = true;
        } else if (a.is_number()) {
            c.alpha.value = a.get<double>();
        } else {
            throw ConfigError("alpha must be a number or \"optimal\"");
        }
    }
    if (doc.contains("q")) c.q = get_as<double>(doc, "q", where);
    if (doc.contains("omega")) c.omega = get_as<double>(doc, "omega", where);
    if (doc.contains("beta_schedule")) {
        try {
            c.beta_schedule = BetaSchedule::parse(get_as<std::string>(doc, "beta_schedule", where));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (doc.contains("compensation_enabled")) c.compensation_enabled = get_as<bool>(doc, "compensation_enabled", where);
    if (doc.contains("output_path")) c.output_path = get_as<std::string>(doc, "output_path", where);
    if (doc.contains("dynamics")) {
        const auto d = get_as<std::string>(doc, "dynamics", where);
        if (d == "network") {
            c.dynamics = Dynamics::network;
        } else if (d == "contraction") {
            c.dynamics = Dynamics::contraction;
        } else {
            throw ConfigError("dynamics must be \"network\" or \"contraction\"");
        }
    }
    if (doc.contains("compensator")) {
        const auto k = get_as<std::string>(doc, "compensator", where);
        if (k == "ewma") {
            c.compensator = Compensator::ewma;
        } else if (k == "calibrated") {
            c.compensator = Compensator::calibrated;
        } else {
            throw ConfigError("compensator must be \"ewma\" or \"calibrated\"");
        }
    }
    if (doc.contains("delta")) c.delta = get_as<double>(doc, "delta", where);
    if (doc.contains("normalize_compensator"))
        c.normalize_compensator = get_as<bool>(doc, "normalize_compensator", where);
    if (doc.contains("class_alpha")) c.class_alpha = get_vector(doc.at("class_alpha"), "class_alpha");
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    json mix = json::array();
    for (const auto& comp : c.population.mixture) {
        mix.push_back({{"mean", comp.mean}, {"covariance", matrix_json(comp.covariance)}, {"probability", comp.probability}});
    }
    json doc = {
        {"population",
         {{"population_size", c.population.population_size},
          {"dataset_size", c.population.dataset_size},
          {"dimension", c.population.dimension},
          {"mixture", mix},
          {"target_model", c.population.target_model},
          {"label_noise_std", c.population.label_noise_std}}},
        {"num_selected", c.num_selected},
        {"epochs", c.epochs},
        {"replicates", c.replicates},
        {"seed", c.seed},
        {"alpha", c.alpha.optimal ? json("optimal") : json(c.alpha.value)},
        {"q", c.q},
        {"omega", c.omega},
        {"beta_schedule", c.beta_schedule.name()},
        {"compensation_enabled", c.compensation_enabled},
        {"output_path", c.output_path},
        {"dynamics", c.dynamics == Dynamics::network ? "network" : "contraction"},
        {"compensator", c.compensator == Compensator::ewma ? "ewma" : "calibrated"},
        {"delta", c.delta},
        {"normalize_compensator", c.normalize_compensator},
    };
    if (!c.class_alpha.empty()) {
        doc["class_alpha"] = c.class_alpha;
    }
    return doc.dump(2) + "\n";
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trace_csv(std::ostream& out, const ErrorTrace& trace) {
    out << "epoch,avg_error,std_error,global_error\n";
    for (const auto& r : trace.rows) {
        out << r.epoch << ',' << format_double(r.avg_error) << ',' << format_double(r.std_error) << ','
            << format_double(r.global_error) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "q_delta,tau_analytic,tau_measured,capable\n";
    for (const auto& r : rows) {
        out << format_double(r.q_delta) << ',' << format_double(r.tau_analytic) << ','
            << format_double(r.tau_measured) << ',' << (r.capable ? "capable" : "incapable") << '\n';
    }
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
    const std::size_t d = dataset.dimension();
    for (std::size_t i = 0; i < d; ++i) {
        out << 'x' << i << ',';
    }
    out << "y\n";
    for (const auto& p : dataset.points) {
        for (double x : p.x) {
            out << format_double(x) << ',';
        }
        out << format_double(p.y) << '\n';
    }
}

std::string theory_report_json(const TheoryReport& report) {
    json classes = json::array();
    for (const auto& c : report.classes) {
        classes.push_back({
            {"class_id", c.class_id},
            {"lambda_max", c.lambda_max},
            {"lambda_min", c.lambda_min},
            {"condition_number", number_or_null(c.condition_number)},
            {"q_delta", c.q_delta},
            {"alpha", c.alpha},
            {"sigma", c.sigma_at_alpha},
            {"capability_value", c.capability_value},
            {"alpha_star", c.alpha_star},
            {"alpha_star_valid", c.alpha_star_valid},
            {"sigma_star", c.sigma_star},
            {"tau", number_or_null(c.tau)},
        });
    }
    json doc = {
        {"verdict", to_string(report.verdict)},
        {"max_capability_value", report.max_capability_value},
        {"capable_at_optimal", report.capable_at_optimal},
        {"tau", number_or_null(report.tau)},
        {"diagnostic", report.diagnostic},
        {"classes", classes},
    };
    return doc.dump();
}

std::string theory_report_text(const TheoryReport& report) {
    std::ostringstream out;
    out << "verdict: " << to_string(report.verdict) << '\n';
    out << "max capability value: " << format_double(report.max_capability_value) << '\n';
    out << "capable at optimal alpha: " << (report.capable_at_optimal ? "yes" : "no") << '\n';
    out << "time constant: " << format_double(report.tau) << '\n';
    if (!report.diagnostic.empty()) {
        out << "diagnostic: " << report.diagnostic << '\n';
    }
    for (const auto& c : report.classes) {
        out << "class " << c.class_id << ":\n"
            << "  lambda_max " << format_double(c.lambda_max) << '\n'
            << "  lambda_min " << format_double(c.lambda_min) << '\n'
            << "  condition_number " << format_double(c.condition_number) << '\n'
            << "  q_delta " << format_double(c.q_delta) << '\n'
            << "  alpha " << format_double(c.alpha) << '\n'
            << "  sigma " << format_double(c.sigma_at_alpha) << '\n'
            << "  capability_value " << format_double(c.capability_value) << '\n'
            << "  alpha_star " << format_double(c.alpha_star) << (c.alpha_star_valid ? "" : " (invalid)") << '\n'
            << "  sigma_star " << format_double(c.sigma_star) << '\n'
            << "  tau " << format_double(c.tau) << '\n';
    }
    return out.str();
}

} // namespace stfl

#include "stfl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

#include "stfl/lazy_slots.hpp"
#include "stfl/loss.hpp"
#include "stfl/rng.hpp"

namespace stfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

} // namespace

void ExperimentConfig::validate() const {
    try {
        population.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("population: ") + e.what());
    }
    if (num_selected == 0 || epochs == 0 || replicates == 0) {
        throw ConfigError("num_selected, epochs and replicates must be >= 1");
    }
    if (num_selected > population.population_size) {
        throw ConfigError("num_selected exceeds population_size");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw ConfigError("q must lie in [0, 1]");
    }
    if (!(omega >= 0.0 && omega < 1.0)) {
        throw ConfigError("omega must lie in [0, 1)");
    }
    if (!alpha.optimal && !finite_nonneg(alpha.value)) {
        throw ConfigError("alpha must be finite and >= 0, or \"optimal\"");
    }
    if (!finite_nonneg(delta)) {
        throw ConfigError("delta must be finite and >= 0");
    }
    if (!class_alpha.empty()) {
        if (class_alpha.size() != population.mixture.size()) {
            throw ConfigError("class_alpha needs one entry per mixture component");
        }
        for (double a : class_alpha) {
            if (!finite_nonneg(a)) {
                throw ConfigError("class_alpha entries must be finite and >= 0");
            }
        }
    }
}

std::vector<double> ErrorTrace::avg_errors() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back(r.avg_error);
    }
    return out;
}

const EpochStats& ErrorTrace::at_epoch(std::size_t epoch) const {
    if (epoch == 0 || epoch > rows.size()) {
        throw std::out_of_range("epoch " + std::to_string(epoch) + " is outside the trace");
    }
    return rows[epoch - 1];
}

namespace {

struct DeviceResources {
    std::unique_ptr<LocalObjective> objective;
    std::size_t class_label = 0;
    std::size_t dataset_size = 0;
    double alpha = 0.0;
};

DeviceResources make_resources(const ExperimentConfig& cfg, std::size_t id) {
    const Dataset ds = generate_dataset(cfg.population, id, cfg.seed);
    DeviceResources res;
    res.objective = QuadraticLoss{}.bind(ds);
    res.class_label = ds.class_label;
    res.dataset_size = ds.size();
    if (!cfg.class_alpha.empty()) {
        res.alpha = cfg.class_alpha[ds.class_label];
    } else if (cfg.alpha.optimal) {
        const EigenResult eig = sym_eigen(ds.second_moment);
        res.alpha = optimal_step(ds.second_moment, eig);
    } else {
        res.alpha = cfg.alpha.value;
    }
    return res;
}

struct ReplicateTrace {
    std::vector<double> avg;
    std::vector<double> global;
    std::vector<double> compensation;
    std::vector<double> local;
    std::vector<std::vector<ErrorSample>> samples;

    explicit ReplicateTrace(std::size_t epochs)
        : avg(epochs), global(epochs), compensation(epochs), local(epochs) {}
};

void gradient_step(DeviceState& dev, ModelVector start, bool received) {
    const ModelVector g = dev.objective->gradient(start);
    axpy(-dev.alpha, g, start);
    dev.local_model = std::move(start);
    dev.last_received = received;
}

class Simulation {
public:
    Simulation(const ExperimentConfig& cfg, const RunOptions& options)
        : cfg_(cfg), options_(options), resources_(cfg.population.population_size) {
        if (cfg_.dynamics == Dynamics::contraction) {
            GlobalState gs;
            gs.num_selected = cfg_.num_selected;
            gs.population_size = cfg_.population.population_size;
            cohort_ = schedule(gs, 0, cfg_.seed);
        }
    }

    ReplicateTrace run_replicate(std::size_t r) {
        const std::uint64_t key = KeyedRng::derive(cfg_.seed, StreamTag::replicate, {r}).key();
        return cfg_.dynamics == Dynamics::network ? network(key) : contraction(key);
    }

private:
    const DeviceResources& resources(std::size_t id) {
        return resources_.get(id, [&] { return make_resources(cfg_, id); });
    }

    DeviceState fresh_device(std::size_t id) const {
        DeviceState dev = DeviceState::make(id, cfg_.population.dimension, 0.0, cfg_.q, cfg_.effective_omega());
        dev.normalize_compensator = cfg_.normalize_compensator;
        return dev;
    }

    GlobalState fresh_server() const {
        GlobalState gs;
        gs.global_model.assign(cfg_.population.dimension, 0.0);
        gs.beta = cfg_.beta_schedule;
        gs.num_selected = cfg_.num_selected;
        gs.population_size = cfg_.population.population_size;
        return gs;
    }

    bool receives(const DeviceState& dev, std::size_t epoch, std::uint64_t key) const {
        return cfg_.q == 0.0 || draw_outage(dev, epoch, key);
    }

    ReplicateTrace network(std::uint64_t key) {
        const std::size_t pop = cfg_.population.population_size;
        const ModelVector& target = cfg_.population.target_model;
        const bool ewma = cfg_.compensator == Compensator::ewma;
        // With w = 0 the accumulator only holds the current epoch's input, so
        // unscheduled devices can be skipped without changing any result.
        const bool track_all = ewma && cfg_.effective_omega() > 0.0;
        const double n_inv = 1.0 / static_cast<double>(cfg_.num_selected);

        ReplicateTrace out(cfg_.epochs);
        GlobalState gs = fresh_server();
        std::vector<DeviceState> devices;
        devices.reserve(pop);
        for (std::size_t m = 0; m < pop; ++m) {
            devices.push_back(fresh_device(m));
        }
        std::vector<char> received(pop, 1);
        std::vector<Upload> uploads;
        uploads.reserve(cfg_.num_selected);

        for (std::size_t e = 0; e < cfg_.epochs; ++e) {
            const std::vector<std::size_t> ids = schedule(gs, e, key);
            const ModelVector& global = gs.global_model;
            auto advance = [&](DeviceState& dev) {
                const bool rec = receives(dev, e, key);
                received[dev.device_id] = rec ? 1 : 0;
                if (ewma) {
                    advance_compensator(dev, rec, rec ? &global : nullptr, dev.local_model);
                }
            };
            if (track_all) {
                for (auto& dev : devices) {
                    advance(dev);
                }
            } else {
                for (std::size_t id : ids) {
                    advance(devices[id]);
                }
            }

            uploads.clear();
            double avg = 0.0, comp = 0.0, local = 0.0;
            for (std::size_t id : ids) {
                DeviceState& dev = devices[id];
                const DeviceResources& res = resources(id);
                dev.objective = res.objective.get();
                dev.alpha = res.alpha;
                const bool rec = received[id] != 0;
                const double local_before = distance_sq(dev.local_model, target);
                if (ewma) {
                    comp += distance_sq(global, dev.compensated_model());
                    local_update(dev, rec, rec ? &global : nullptr);
                } else {
                    KeyedRng crng = KeyedRng::derive(key, StreamTag::compensation, {id, e});
                    ModelVector est = calibrated_compensator(global, target, local_before, cfg_.delta, crng);
                    comp += distance_sq(global, est);
                    gradient_step(dev, rec ? global : std::move(est), rec);
                }
                local += local_before;
                avg += distance_sq(dev.local_model, target);
                uploads.push_back({id, dev.local_model, res.dataset_size});
            }
            temporal_update(gs, spatial_aggregate(uploads));
            out.avg[e] = avg * n_inv;
            out.compensation[e] = comp * n_inv;
            out.local[e] = local * n_inv;
            out.global[e] = distance_sq(gs.global_model, target);
        }
        return out;
    }

    ReplicateTrace contraction(std::uint64_t key) {
        const ModelVector& target = cfg_.population.target_model;
        const bool ewma = cfg_.compensator == Compensator::ewma;
        const double n_inv = 1.0 / static_cast<double>(cohort_.size());

        ReplicateTrace out(cfg_.epochs);
        if (options_.collect_samples) {
            out.samples.resize(cfg_.epochs);
        }
        GlobalState gs = fresh_server();
        std::vector<DeviceState> devices;
        std::vector<const DeviceResources*> res;
        devices.reserve(cohort_.size());
        for (std::size_t id : cohort_) {
            res.push_back(&resources(id));
            devices.push_back(fresh_device(id));
            devices.back().objective = res.back()->objective.get();
            devices.back().alpha = res.back()->alpha;
        }
        std::vector<Upload> uploads;
        uploads.reserve(cohort_.size());

        for (std::size_t e = 0; e < cfg_.epochs; ++e) {
            uploads.clear();
            double avg = 0.0, comp = 0.0, local = 0.0;
            for (std::size_t i = 0; i < devices.size(); ++i) {
                DeviceState& dev = devices[i];
                const ModelVector view = dev.local_model;
                const bool rec = receives(dev, e, key);
                const double local_before = distance_sq(view, target);
                if (ewma) {
                    advance_compensator(dev, rec, rec ? &view : nullptr, dev.local_model);
                    comp += distance_sq(view, dev.compensated_model());
                    local_update(dev, rec, rec ? &view : nullptr);
                } else {
                    KeyedRng crng = KeyedRng::derive(key, StreamTag::compensation, {dev.device_id, e});
                    ModelVector est = calibrated_compensator(view, target, local_before, cfg_.delta, crng);
                    comp += distance_sq(view, est);
                    gradient_step(dev, rec ? view : std::move(est), rec);
                }
                local += local_before;
                avg += distance_sq(dev.local_model, target);
                if (options_.collect_samples) {
                    out.samples[e].push_back({res[i]->class_label, subtract(dev.local_model, target)});
                }
                uploads.push_back({dev.device_id, dev.local_model, res[i]->dataset_size});
            }
            temporal_update(gs, spatial_aggregate(uploads));
            out.avg[e] = avg * n_inv;
            out.compensation[e] = comp * n_inv;
            out.local[e] = local * n_inv;
            out.global[e] = distance_sq(gs.global_model, target);
        }
        return out;
    }

    const ExperimentConfig& cfg_;
    const RunOptions& options_;
    LazySlots<DeviceResources> resources_;
    std::vector<std::size_t> cohort_;
};

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = count;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

double mean_of(const std::vector<ReplicateTrace>& reps, std::vector<double> ReplicateTrace::*field, std::size_t t) {
    double s = 0.0;
    for (const auto& rep : reps) {
        s += (rep.*field)[t];
    }
    return s / static_cast<double>(reps.size());
}

} // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    Simulation sim(config, options);

    const std::size_t R = config.replicates;
    std::vector<std::optional<ReplicateTrace>> slots(R);
    parallel_for(R, options.workers, [&](std::size_t r) { slots[r].emplace(sim.run_replicate(r)); });
    std::vector<ReplicateTrace> reps;
    reps.reserve(R);
    for (auto& s : slots) {
        reps.push_back(std::move(*s));
    }

    RunResult result;
    result.trace.rows.resize(config.epochs);
    result.delta_history.resize(config.epochs);
    for (std::size_t t = 0; t < config.epochs; ++t) {
        EpochStats& row = result.trace.rows[t];
        row.epoch = t + 1;
        row.avg_error = mean_of(reps, &ReplicateTrace::avg, t);
        row.global_error = mean_of(reps, &ReplicateTrace::global, t);
        if (R > 1) {
            double ss = 0.0;
            for (const auto& rep : reps) {
                ss += (rep.avg[t] - row.avg_error) * (rep.avg[t] - row.avg_error);
            }
            row.std_error = std::sqrt(ss / static_cast<double>(R - 1)) / std::sqrt(static_cast<double>(R));
        }
        result.delta_history[t] = {t + 1, mean_of(reps, &ReplicateTrace::compensation, t),
                                   mean_of(reps, &ReplicateTrace::local, t)};
    }
    result.delta = estimate_delta(result.delta_history);
    result.hypothesis_onset = hypothesis_onset(result.delta_history, config.delta);

    std::size_t class0 = 0;
    for (std::size_t m = 0; m < config.population.population_size; ++m) {
        class0 += draw_class_label(config.population, m, config.seed) == 0 ? 1 : 0;
    }
    result.class0_fraction = static_cast<double>(class0) / static_cast<double>(config.population.population_size);

    if (options.collect_samples && config.dynamics == Dynamics::contraction) {
        result.samples.resize(config.epochs);
        for (std::size_t t = 0; t < config.epochs; ++t) {
            for (auto& rep : reps) {
                auto& src = rep.samples[t];
                result.samples[t].insert(result.samples[t].end(), std::make_move_iterator(src.begin()),
                                         std::make_move_iterator(src.end()));
            }
        }
    }
    return result;
}

std::vector<DeviceClassTheory> theory_classes(const ExperimentConfig& config) {
    std::vector<DeviceClassTheory> out;
    const auto& mix = config.population.mixture;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        out.push_back(make_class_theory(analytic_second_moment(mix[k]), config.q * config.delta, k));
    }
    return out;
}

std::vector<double> theory_alphas(const ExperimentConfig& config, std::span<const DeviceClassTheory> classes) {
    if (!config.class_alpha.empty()) {
        return config.class_alpha;
    }
    std::vector<double> out;
    for (const auto& cls : classes) {
        out.push_back(config.alpha.optimal && !cls.singular() ? optimal_alpha(cls).alpha : config.alpha.value);
    }
    return out;
}

TheoryReport theory_report(const ExperimentConfig& config) {
    config.validate();
    const auto classes = theory_classes(config);
    return build_theory_report(classes, theory_alphas(config, classes));
}

TimeConstantFit measure_time_constant(const ErrorTrace& trace, EpochWindow window) {
    const std::size_t first = std::max<std::size_t>(window.first, 1);
    const std::size_t last = std::min(window.last, trace.rows.size());
    if (last < first || last - first + 1 < 10) {
        throw std::invalid_argument("measure_time_constant: window must cover at least 10 epochs of the trace");
    }
    std::vector<double> ts, ys;
    for (std::size_t t = first; t <= last; ++t) {
        const double eps = trace.at_epoch(t).avg_error;
        if (!(eps > 0.0) || !std::isfinite(eps)) {
            throw std::invalid_argument("measure_time_constant: trace must be strictly positive in the window");
        }
        const double y = std::log(eps);
        if (ys.size() >= 10 && std::abs(y - ys.back()) < 1e-4) {
            break;
        }
        ts.push_back(static_cast<double>(t));
        ys.push_back(y);
    }
    const double n = static_cast<double>(ts.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        my += ys[i];
    }
    mt /= n;
    my /= n;
    double sty = 0.0, stt = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        sty += (ts[i] - mt) * (ys[i] - my);
        stt += (ts[i] - mt) * (ts[i] - mt);
    }
    TimeConstantFit fit;
    fit.slope = sty / stt;
    fit.tau = fit.slope < 0.0 ? -1.0 / fit.slope : kInf;
    fit.first = first;
    fit.last = static_cast<std::size_t>(ts.back());
    return fit;
}

std::vector<SweepRow> sweep_time_constant(const ExperimentConfig& base, std::span<const double> q_delta_grid,
                                          const RunOptions& options, EpochWindow window) {
    if (!(base.delta > 0.0)) {
        throw ConfigError("sweep_time_constant needs delta > 0");
    }
    std::vector<SweepRow> rows;
    for (double qd : q_delta_grid) {
        if (!(qd >= 0.0) || !std::isfinite(qd)) {
            throw ConfigError("q_delta grid values must be finite and >= 0");
        }
        ExperimentConfig cfg = base;
        cfg.q = qd / base.delta;
        SweepRow row;
        row.q_delta = qd;
        row.tau_measured = std::numeric_limits<double>::quiet_NaN();
        if (cfg.q > 1.0) {
            row.tau_analytic = kInf;
            rows.push_back(row);
            continue;
        }
        const TheoryReport report = theory_report(cfg);
        row.tau_analytic = report.tau;
        row.capable = report.verdict == Verdict::capable;
        if (row.capable) {
            row.tau_measured = measure_time_constant(run_experiment(cfg, options).trace, window).tau;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<PresetRun> preset_fig2() {
    ExperimentConfig base;
    base.population = zero_mean_population(default_population_spec());
    auto make = [&](const char* label, double q, double alpha, double omega) {
        ExperimentConfig c = base;
        c.q = q;
        c.alpha.value = alpha;
        c.omega = omega;
        c.compensation_enabled = omega > 0.0;
        return PresetRun{label, c};
    };
    return {
        make("q0.9_alpha0.25_omega0.25", 0.9, 0.25, 0.25),
        make("q0.9_alpha0.5_omega0", 0.9, 0.5, 0.0),
        make("q0.2_alpha0.25_omega0.25", 0.2, 0.25, 0.25),
        make("q0.2_alpha0.5_omega0.25", 0.2, 0.5, 0.25),
    };
}

SweepPreset preset_fig3() {
    SweepPreset p;
    p.base.population = zero_mean_population(default_population_spec());
    p.base.population.dataset_size = 10000;
    p.base.alpha.optimal = true;
    p.base.q = 0.0;
    p.base.epochs = 60;
    p.base.replicates = 1000;
    p.base.dynamics = Dynamics::contraction;
    p.base.compensator = Compensator::calibrated;
    p.base.delta = 1.0;
    p.grid = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
    return p;
}

} // namespace stfl

#include "aimreg/hybrid.hpp"

#include "aimreg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aimreg::hybrid {

void ClockConfig::validate() const {
    if (!(t_low > 0.0) || !(t_high >= t_low) || !std::isfinite(t_high)) {
        throw InvalidConfig("clock: require 0 < t_low <= t_high");
    }
    if (const auto* p = std::get_if<PeriodicStrategy>(&strategy)) {
        if (!(p->period >= t_low && p->period <= t_high)) {
            throw InvalidConfig("clock: periodic T must lie in [t_low, t_high]");
        }
    }
}

Clock::Clock(ClockConfig config) : config_(config) {
    config_.validate();
    if (const auto* u = std::get_if<UniformRandomStrategy>(&config_.strategy)) {
        rng_.seed(u->seed);
    }
}

double Clock::next_jump_time(double last_jump_t) {
    if (const auto* p = std::get_if<PeriodicStrategy>(&config_.strategy)) {
        return last_jump_t + p->period;
    }
    if (config_.t_low == config_.t_high) {
        return last_jump_t + config_.t_low;
    }
    // Map 53 random bits onto [0, 1] so both ends of the gap range are reachable.
    const double u = static_cast<double>(rng_() >> 11) / static_cast<double>((1ULL << 53) - 1);
    return last_jump_t + config_.t_low + u * (config_.t_high - config_.t_low);
}

double default_dt(const ClockConfig& clock) {
    return std::min(1e-3, clock.t_low / 100.0);
}

namespace {

class Recorder {
public:
    Recorder(HybridArc& arc, const SimOptions& options, const SampleObserver& observer)
        : arc_(arc), options_(options), observer_(observer) {}

    void record(const HybridTime& ht, const Vector& x) {
        if (has_last_ && last_ == ht) {
            return;
        }
        has_last_ = true;
        last_ = ht;
        if (options_.store_samples) {
            arc_.samples.push_back({ht, x});
        }
        ++count_;
        if (observer_) {
            observer_(ht, x);
        }
    }

    void mark_jump(double t) {
        arc_.jump_indices.push_back(count_ - 1);
        arc_.jump_times.push_back(t);
    }

private:
    HybridArc& arc_;
    const SimOptions& options_;
    const SampleObserver& observer_;
    bool has_last_ = false;
    HybridTime last_{};
    std::size_t count_ = 0;
};

}  // namespace

HybridArc simulate(const VectorField& flow, const JumpMap& jump, const Vector& x0,
                   const ClockConfig& clock_config, const SimOptions& options,
                   const SampleObserver& observer) {
    clock_config.validate();
    if (!(options.horizon > 0.0) || !std::isfinite(options.horizon)) {
        throw InvalidConfig("simulate: horizon must be positive");
    }
    if (!(options.dt > 0.0) || options.dt > clock_config.t_low / 10.0 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "simulate: dt = " << options.dt << " must lie in (0, t_low / 10]";
        throw InvalidConfig(os.str());
    }
    if (!x0.allFinite()) {
        throw InvalidInput("simulate: non-finite initial state");
    }

    const std::size_t stride = std::max<std::size_t>(1, options.record_stride);
    const double tol = 1e-9 * std::max(1.0, options.horizon);

    HybridArc arc;
    Recorder rec(arc, options, observer);
    Clock clock(clock_config);

    Vector x = x0;
    double t = 0.0;
    std::size_t j = 0;
    std::size_t step_count = 0;
    rec.record({t, j}, x);

    double next_jump = clock.next_jump_time(0.0);
    for (;;) {
        const bool jump_due = next_jump <= options.horizon + tol;
        const double t_stop = jump_due ? next_jump : options.horizon;
        const double t_start = t;
        const double span = t_stop - t_start;
        const auto n_steps =
            span > 0.0 ? static_cast<std::size_t>(std::ceil(span / options.dt - 1e-9)) : 0;
        for (std::size_t k = 1; k <= n_steps; ++k) {
            // Stepping from t_start avoids drift; the last step is shortened
            // to land exactly on t_stop.
            const double t_next = k == n_steps ? t_stop : t_start + static_cast<double>(k) * options.dt;
            try {
                x = numerics::rk4_step(flow, t, x, t_next - t);
            } catch (const IntegrationBlowup& e) {
                throw IntegrationBlowup(HybridTime{t, j}, e.state(),
                                        "simulate: integration blow-up");
            }
            t = t_next;
            ++step_count;
            if (step_count % stride == 0) {
                rec.record({t, j}, x);
            }
        }
        if (!jump_due) {
            rec.record({t, j}, x);
            break;
        }

        rec.record({t, j}, x);
        x = jump(HybridTime{t, j}, x);
        if (!x.allFinite()) {
            throw IntegrationBlowup(HybridTime{t, j}, x, "simulate: non-finite jump map output");
        }
        ++j;
        rec.record({t, j}, x);
        rec.mark_jump(t);
        next_jump = clock.next_jump_time(t);
    }
    return arc;
}

ArcCheck validate_arc(const HybridArc& arc, const ClockConfig& clock, double tol) {
    auto fail = [](std::string msg) { return ArcCheck{false, std::move(msg)}; };
    for (std::size_t i = 1; i < arc.samples.size(); ++i) {
        const auto& a = arc.samples[i - 1].time;
        const auto& b = arc.samples[i].time;
        if (b.t + static_cast<double>(b.j) < a.t + static_cast<double>(a.j)) {
            return fail("samples not ordered by t + j at index " + std::to_string(i));
        }
        if (b.j == a.j && b.t < a.t) {
            return fail("t decreasing within a flow interval at index " + std::to_string(i));
        }
        if (b.j != a.j && (b.j != a.j + 1 || b.t != a.t)) {
            return fail("jump must increment j by one at fixed t, index " + std::to_string(i));
        }
    }
    double last = 0.0;
    for (double tj : arc.jump_times) {
        const double gap = tj - last;
        if (gap < clock.t_low - tol || gap > clock.t_high + tol) {
            return fail("inter-jump gap outside [t_low, t_high]");
        }
        last = tj;
    }
    return {};
}

}  // namespace aimreg::hybrid

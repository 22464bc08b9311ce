#pragma once

// Hybrid time domains, clock strategies and the flow/jump simulation engine.
//
// Jumps are clock-triggered only: the engine integrates the flow with fixed
// RK4 steps, shortens the last step of each flow interval so that it lands
// exactly on the next tick, stores the pre-jump sample at (t, j) and the
// post-jump sample at (t, j + 1), and continues.

#include "aimreg/core.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <variant>
#include <vector>

namespace aimreg::hybrid {

struct PeriodicStrategy {
    double period = 0.1;
};

/// Inter-jump gaps drawn uniformly from [t_low, t_high] with a seeded engine.
struct UniformRandomStrategy {
    std::uint64_t seed = 0;
};

using ClockStrategy = std::variant<PeriodicStrategy, UniformRandomStrategy>;

struct ClockConfig {
    double t_low = 0.1;
    double t_high = 0.1;
    ClockStrategy strategy = PeriodicStrategy{0.1};

    /// Throws InvalidConfig unless 0 < t_low <= t_high and a periodic T lies
    /// in [t_low, t_high].
    void validate() const;
};

/// Stateful clock. Copying a Clock copies its generator state.
class Clock {
public:
    explicit Clock(ClockConfig config);

    /// Next jump instant after a jump at last_jump_t.
    double next_jump_time(double last_jump_t);

    const ClockConfig& config() const noexcept { return config_; }

private:
    ClockConfig config_;
    std::mt19937_64 rng_;
};

struct ArcSample {
    HybridTime time;
    Vector state;
};

struct HybridArc {
    std::vector<ArcSample> samples;
    /// Positions in `samples` of post-jump entries (where j increments).
    std::vector<std::size_t> jump_indices;
    std::vector<double> jump_times;
};

/// Jump map evaluated at the pre-jump point. It may also update discrete
/// state held by the caller (identifier memory); the returned vector is the
/// post-jump continuous state.
using JumpMap = std::function<Vector(const HybridTime&, const Vector&)>;

/// Called for every recorded sample, in order.
using SampleObserver = std::function<void(const HybridTime&, const Vector&)>;

struct SimOptions {
    double horizon = 1.0;
    double dt = 1e-3;
    /// Record every n-th flow step. Pre/post-jump samples and the final
    /// sample are always recorded.
    std::size_t record_stride = 1;
    /// Keep recorded samples in the returned arc. Observers still see them
    /// when false.
    bool store_samples = true;
};

/// Default step size for a clock: min(1e-3, t_low / 100).
double default_dt(const ClockConfig& clock);

/// Integrate the hybrid system from x0 at (0, 0) until t = horizon.
///
/// Throws InvalidConfig when dt > t_low / 10 or horizon <= 0, and
/// IntegrationBlowup (with the hybrid time of failure) on non-finite state.
HybridArc simulate(const VectorField& flow, const JumpMap& jump, const Vector& x0,
                   const ClockConfig& clock, const SimOptions& options,
                   const SampleObserver& observer = {});

struct ArcCheck {
    bool ok = true;
    std::string message;
};

/// Post-hoc check of the hybrid-arc invariants: ordering by t + j, t
/// non-decreasing within each j, and inter-jump gaps inside [t_low, t_high]
/// (to within tol).
ArcCheck validate_arc(const HybridArc& arc, const ClockConfig& clock, double tol = 1e-12);

}  // namespace aimreg::hybrid

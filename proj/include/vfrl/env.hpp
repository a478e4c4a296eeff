#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vfrl/rng.hpp"
#include "vfrl/types.hpp"

namespace vfrl {

struct Predicate {
    std::string name;
    std::function<bool(const Vec&)> holds;
};

struct StepResult {
    Vec s_next;
    double reward = 0.0;
    Vec cost;
    bool done = false;  // terminal by env rule (goal / unsafe-terminal); horizon is the session's job
};

// A constrained MDP simulator. Dynamics are exposed statelessly so rollouts
// can start from arbitrary states; EnvSession adds the horizon bookkeeping.
// Actions are discrete arms everywhere: native arms for discrete spaces and
// per-dimension bin centers for continuous ones (see policy.hpp).
class Env {
public:
    virtual ~Env() = default;

    virtual const CmdpSpec& spec() const = 0;
    virtual std::string name() const = 0;
    virtual std::unique_ptr<Env> clone() const = 0;

    virtual int arm_count() const = 0;
    // The executed control for an arm; a single element (the arm index) for
    // discrete spaces.
    virtual Vec arm_action(int arm) const = 0;
    // Network encoding of a stored control: one-hot for discrete actions,
    // the raw control vector for continuous ones.
    virtual Vec encode_action(const Vec& a) const = 0;
    virtual int encoding_dim() const = 0;
    Vec arm_encoding(int arm) const { return encode_action(arm_action(arm)); }

    // Deployment-time initial distribution.
    virtual Vec sample_init(Rng& rng) const = 0;
    // Initial distribution used when generating the offline dataset. In the
    // planted-hazard variants this deliberately excludes the approach region
    // of the planted hazard; otherwise it equals sample_init.
    virtual Vec sample_dataset_init(Rng& rng) const { return sample_init(rng); }
    // Broad-coverage starts used only while fitting the task policy
    // (exploring starts); never used for dataset generation.
    virtual Vec sample_explore(Rng& rng) const { return sample_init(rng); }

    virtual StepResult step(const Vec& s, int arm, Rng& rng) const = 0;
    // Noise-free probe of the same dynamics (used by the mutation operator).
    virtual StepResult step_mean(const Vec& s, int arm) const = 0;

    virtual bool goal(const Vec& s) const = 0;
    virtual bool unsafe(const Vec& s) const = 0;

    // Projects a vector into the documented state bounds.
    virtual Vec clip_state(Vec s) const = 0;

    virtual std::vector<Predicate> predicates() const = 0;

    // All states of a tabular environment; empty for continuous ones.
    virtual std::vector<Vec> enumerate_states() const { return {}; }

    // Throws with the offending dimension or arm named.
    void check_state(const Vec& s) const;
    void check_arm(int arm) const;
};

std::unique_ptr<Env> make_env(const RunConfig& cfg);

struct NavLayout {
    struct Disc {
        double cx, cy;
        double core_r;    // entering the core is the unsafe-terminal event
        double hazard_r;  // inside the hazard radius each step costs 1
    };
    struct Region {
        double x_lo, x_hi, y_lo, y_hi;
    };
    struct Wall {
        double x0, y0, x1, y1;  // axis-aligned box
    };
    std::vector<Disc> obstacles;
    std::vector<Wall> walls;
    double goal_x = 0.85, goal_y = 0.85, goal_r = 0.10;
    Region deploy_start{0.05, 0.25, 0.05, 0.15};
    Region data_start{0.05, 0.25, 0.05, 0.15};
};

// Point-mass navigation in the unit square with circular hazards; the maze
// variant adds axis-aligned wall boxes (contact costs 1 and blocks motion).
class NavEnv : public Env {
public:
    enum class Variant { Nav, Maze };
    NavEnv(Variant variant, double noise_sigma, bool planted_hazard, bool obstacles = true);

    const CmdpSpec& spec() const override { return spec_; }
    std::string name() const override { return variant_ == Variant::Nav ? "nav2" : "maze"; }
    std::unique_ptr<Env> clone() const override { return std::make_unique<NavEnv>(*this); }

    int arm_count() const override { return bins_ * bins_; }
    Vec arm_action(int arm) const override;
    Vec encode_action(const Vec& a) const override { return a; }
    int encoding_dim() const override { return 2; }

    Vec sample_init(Rng& rng) const override;
    Vec sample_dataset_init(Rng& rng) const override;
    Vec sample_explore(Rng& rng) const override;

    StepResult step(const Vec& s, int arm, Rng& rng) const override;
    StepResult step_mean(const Vec& s, int arm) const override;

    bool goal(const Vec& s) const override;
    bool unsafe(const Vec& s) const override;
    Vec clip_state(Vec s) const override;
    std::vector<Predicate> predicates() const override;

    const NavLayout& layout() const { return layout_; }
    // Replaces the default layout (test fixtures); rebuilds the shaping field.
    void set_layout(NavLayout layout);
    double max_speed() const { return vmax_; }

private:
    StepResult advance(const Vec& s, int arm, double nx, double ny) const;
    double shaping_distance(double x, double y) const;
    void build_distance_field();

    Variant variant_;
    CmdpSpec spec_;
    NavLayout layout_;
    double noise_sigma_;
    double vmax_ = 0.12;
    double accel_gain_ = 0.06;
    int bins_ = 7;
    // Coarse geodesic distance-to-goal field used for reward shaping (BFS on
    // a grid that respects walls); plain Euclidean distance for Nav.
    std::vector<double> dist_field_;
    int field_n_ = 0;
};

// One-compartment insulin dosing over a 144-tick day (10-minute ticks).
// State: (glucose mg/dL, gut absorption, previous glucose, meal flag,
// normalized time). Violations are non-terminal: the episode always runs the
// full day. The update rule, Euler-integrated per tick:
//   gut'     = gut * (1 - k_abs) + carbs_on_meal
//   glucose' = clamp(glucose + absorption_gain * gut
//                    - insulin_sensitivity * dose + drift + noise, 10, 600)
// with k_abs = 0.25, absorption_gain = 0.30, insulin_sensitivity = 2.5 per
// dose unit, drift = +2.0 per tick (see docs/environments.md).
class DoseEnv : public Env {
public:
    DoseEnv(double noise_sigma, bool planted_hazard);

    const CmdpSpec& spec() const override { return spec_; }
    std::string name() const override { return "dose"; }
    std::unique_ptr<Env> clone() const override { return std::make_unique<DoseEnv>(*this); }

    int arm_count() const override { return 21; }  // doses 0..10 in 0.5 steps
    Vec arm_action(int arm) const override;
    Vec encode_action(const Vec& a) const override;
    int encoding_dim() const override { return 21; }

    Vec sample_init(Rng& rng) const override;
    Vec sample_dataset_init(Rng& rng) const override;
    Vec sample_explore(Rng& rng) const override;

    StepResult step(const Vec& s, int arm, Rng& rng) const override;
    StepResult step_mean(const Vec& s, int arm) const override;

    bool goal(const Vec& s) const override;
    bool unsafe(const Vec& s) const override;
    Vec clip_state(Vec s) const override;
    std::vector<Predicate> predicates() const override;

    static constexpr int kTicks = 144;
    static constexpr double kRangeLo = 65.0;
    static constexpr double kRangeHi = 105.0;

private:
    StepResult advance(const Vec& s, int arm, double noise) const;
    double meal_carbs(int tick, Rng& rng, bool planted_scale) const;

    CmdpSpec spec_;
    double noise_sigma_;
    bool planted_;
};

// 8x8 deterministic gridworld; small enough that every trajectory up to the
// horizon can be enumerated, which the empirical PAC check requires.
class GridEnv : public Env {
public:
    explicit GridEnv(bool planted_hazard);

    const CmdpSpec& spec() const override { return spec_; }
    std::string name() const override { return "grid"; }
    std::unique_ptr<Env> clone() const override { return std::make_unique<GridEnv>(*this); }

    int arm_count() const override { return 4; }  // up, down, left, right
    Vec arm_action(int arm) const override { return {static_cast<double>(arm)}; }
    Vec encode_action(const Vec& a) const override;
    int encoding_dim() const override { return 4; }

    Vec sample_init(Rng& rng) const override;
    Vec sample_dataset_init(Rng& rng) const override;

    StepResult step(const Vec& s, int arm, Rng& rng) const override;
    StepResult step_mean(const Vec& s, int arm) const override;

    bool goal(const Vec& s) const override;
    bool unsafe(const Vec& s) const override;
    Vec clip_state(Vec s) const override;
    std::vector<Predicate> predicates() const override;
    std::vector<Vec> enumerate_states() const override;

    static constexpr int kSize = 8;
    bool hazard_at(int row, int col) const;

private:
    CmdpSpec spec_;
    bool planted_;
};

// Stateful rollout handle: owns the current state and enforces the horizon.
class EnvSession {
public:
    explicit EnvSession(const Env& env) : env_(&env) {}

    Vec reset(Rng& rng);
    Vec reset_dataset(Rng& rng);
    // Starts an episode from an arbitrary (dimensionally valid, finite) state.
    void set_state(const Vec& s);
    // Replaces the current state mid-episode (mutation), keeping the step count.
    void override_state(const Vec& s);

    const Vec& state() const { return state_; }
    int steps() const { return steps_; }
    bool done() const { return done_; }

    StepResult step(int arm, Rng& rng);

private:
    const Env* env_;
    Vec state_;
    int steps_ = 0;
    bool done_ = true;
};

}  // namespace vfrl

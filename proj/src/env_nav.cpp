#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <limits>

#include "vfrl/env.hpp"

namespace vfrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double disc_dist(const NavLayout::Disc& d, double x, double y) {
    return std::hypot(x - d.cx, y - d.cy);
}

bool in_wall(const NavLayout::Wall& w, double x, double y) {
    return x >= w.x0 && x <= w.x1 && y >= w.y0 && y <= w.y1;
}

// Closest approach of the swept segment to a disc center; motion fast enough
// to hop over a disc in one step must still register the crossing.
struct SweepHit {
    double px, py;  // closest point on the segment
};

std::optional<SweepHit> sweep_disc(double x0, double y0, double x1, double y1, double cx,
                                   double cy, double r) {
    const double dx = x1 - x0;
    const double dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((cx - x0) * dx + (cy - y0) * dy) / len2, 0.0, 1.0);
    const double px = x0 + t * dx;
    const double py = y0 + t * dy;
    if (std::hypot(px - cx, py - cy) <= r) return SweepHit{px, py};
    return std::nullopt;
}

}  // namespace

NavEnv::NavEnv(Variant variant, double noise_sigma, bool planted_hazard, bool obstacles)
    : variant_(variant), noise_sigma_(noise_sigma) {
    if (variant_ == Variant::Nav) {
        layout_.deploy_start = {0.05, 0.25, 0.05, 0.15};
        layout_.data_start = {0.05, 0.25, 0.05, 0.15};
        if (obstacles) {
            layout_.obstacles.push_back({0.42, 0.60, 0.05, 0.105});
            if (planted_hazard) {
                // Reached only from the wider deployment start strip, which the
                // dataset distribution below deliberately does not cover.
                layout_.obstacles.push_back({0.66, 0.47, 0.05, 0.10});
                layout_.deploy_start = {0.05, 0.60, 0.05, 0.15};
            }
        }
    } else {
        layout_.walls.push_back({0.25, 0.48, 1.0, 0.52});
        layout_.deploy_start = {0.60, 0.90, 0.05, 0.15};
        layout_.data_start = {0.60, 0.90, 0.05, 0.15};
        if (obstacles && planted_hazard) {
            layout_.obstacles.push_back({0.47, 0.41, 0.04, 0.08});
            layout_.deploy_start = {0.60, 0.90, 0.05, 0.40};
        }
    }

    spec_.state_dim = 4;
    spec_.action_space.discrete = false;
    spec_.action_space.box = {{-1.0, -1.0}, {1.0, 1.0}};
    spec_.gamma = 0.98;
    spec_.gamma_risk = 0.99;
    spec_.horizon = 60;
    spec_.cost_names = variant_ == Variant::Nav ? std::vector<std::string>{"hazard"}
                                                : std::vector<std::string>{"hazard", "contact"};
    build_distance_field();
}

void NavEnv::set_layout(NavLayout layout) {
    layout_ = std::move(layout);
    build_distance_field();
}

Vec NavEnv::arm_action(int arm) const {
    check_arm(arm);
    const int ix = arm / bins_;
    const int iy = arm % bins_;
    const double step = 2.0 / bins_;
    return {-1.0 + (ix + 0.5) * step, -1.0 + (iy + 0.5) * step};
}

Vec NavEnv::sample_init(Rng& rng) const {
    const auto& r = layout_.deploy_start;
    return {rng.uniform(r.x_lo, r.x_hi), rng.uniform(r.y_lo, r.y_hi), 0.0, 0.0};
}

Vec NavEnv::sample_dataset_init(Rng& rng) const {
    const auto& r = layout_.data_start;
    return {rng.uniform(r.x_lo, r.x_hi), rng.uniform(r.y_lo, r.y_hi), 0.0, 0.0};
}

Vec NavEnv::sample_explore(Rng& rng) const {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Vec s{rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98),
              rng.uniform(-0.5 * vmax_, 0.5 * vmax_), rng.uniform(-0.5 * vmax_, 0.5 * vmax_)};
        if (!unsafe(s) && !goal(s)) return s;
    }
    return sample_init(rng);
}

StepResult NavEnv::step(const Vec& s, int arm, Rng& rng) const {
    const double nx = noise_sigma_ > 0.0 ? rng.normal(0.0, noise_sigma_) : 0.0;
    const double ny = noise_sigma_ > 0.0 ? rng.normal(0.0, noise_sigma_) : 0.0;
    return advance(s, arm, nx, ny);
}

StepResult NavEnv::step_mean(const Vec& s, int arm) const { return advance(s, arm, 0.0, 0.0); }

StepResult NavEnv::advance(const Vec& s, int arm, double nx, double ny) const {
    check_state(s);
    check_arm(arm);
    const Vec a = arm_action(arm);

    // Velocity drag keeps the point mass controllable at this time scale.
    constexpr double kDrag = 0.80;
    double vx = clampd(kDrag * s[2] + accel_gain_ * a[0], -vmax_, vmax_);
    double vy = clampd(kDrag * s[3] + accel_gain_ * a[1], -vmax_, vmax_);

    double x = s[0];
    double y = s[1];
    bool contact = false;
    bool hazard = false;
    bool hit_core = false;
    bool hit_goal = false;

    // Axis-separated motion so walls block instead of teleporting; thin walls
    // are handled by testing the swept interval, not just the endpoint.
    double tx = clampd(x + vx + nx, 0.0, 1.0);
    for (const auto& w : layout_.walls) {
        if (y < w.y0 || y > w.y1) continue;
        const double lo = std::min(x, tx);
        const double hi = std::max(x, tx);
        if (hi < w.x0 || lo > w.x1) continue;
        if (x < w.x0) tx = w.x0 - 1e-6;
        else if (x > w.x1) tx = w.x1 + 1e-6;
        else tx = x;  // started inside: stay put on this axis
        vx = 0.0;
        contact = true;
    }
    double ty = clampd(y + vy + ny, 0.0, 1.0);
    for (const auto& w : layout_.walls) {
        if (tx < w.x0 || tx > w.x1) continue;
        const double lo = std::min(y, ty);
        const double hi = std::max(y, ty);
        if (hi < w.y0 || lo > w.y1) continue;
        if (y < w.y0) ty = w.y0 - 1e-6;
        else if (y > w.y1) ty = w.y1 + 1e-6;
        else ty = y;
        vy = 0.0;
        contact = true;
    }

    // Disc crossings are tested on the straight displacement segment: motion
    // fast enough to hop over a disc in one step still registers. Core or
    // goal crossings snap the position to the contact point and terminate.
    double fx = tx, fy = ty;
    for (const auto& d : layout_.obstacles) {
        if (sweep_disc(x, y, tx, ty, d.cx, d.cy, d.hazard_r)) hazard = true;
        if (const auto hit = sweep_disc(x, y, tx, ty, d.cx, d.cy, d.core_r)) {
            fx = hit->px;
            fy = hit->py;
            hit_core = true;
            break;
        }
    }
    if (!hit_core) {
        if (const auto hit =
                sweep_disc(x, y, tx, ty, layout_.goal_x, layout_.goal_y, layout_.goal_r)) {
            fx = hit->px;
            fy = hit->py;
            hit_goal = true;
        }
    }

    StepResult out;
    out.s_next = {fx, fy, vx, vy};
    if (disc_dist({layout_.goal_x, layout_.goal_y, 0, 0}, fx, fy) <= layout_.goal_r) hit_goal = true;

    const double hazard_cost = hazard || hit_core ? 1.0 : 0.0;
    out.cost = variant_ == Variant::Nav ? Vec{hazard_cost}
                                        : Vec{hazard_cost, contact ? 1.0 : 0.0};

    const double before = shaping_distance(s[0], s[1]);
    const double after = shaping_distance(fx, fy);
    out.reward = 12.0 * (before - after) - 0.02;
    if (hit_goal && !hit_core) out.reward += 5.0;

    out.done = hit_goal || hit_core || unsafe(out.s_next);
    return out;
}

bool NavEnv::goal(const Vec& s) const {
    return std::hypot(s[0] - layout_.goal_x, s[1] - layout_.goal_y) <= layout_.goal_r;
}

bool NavEnv::unsafe(const Vec& s) const {
    for (const auto& d : layout_.obstacles)
        if (disc_dist(d, s[0], s[1]) <= d.core_r) return true;
    for (const auto& w : layout_.walls)
        if (in_wall(w, s[0], s[1])) return true;
    return false;
}

Vec NavEnv::clip_state(Vec s) const {
    s.resize(4, 0.0);
    s[0] = clampd(s[0], 0.0, 1.0);
    s[1] = clampd(s[1], 0.0, 1.0);
    s[2] = clampd(s[2], -vmax_, vmax_);
    s[3] = clampd(s[3], -vmax_, vmax_);
    return s;
}

std::vector<Predicate> NavEnv::predicates() const {
    const NavLayout layout = layout_;
    const double vmax = vmax_;
    std::vector<Predicate> out;
    out.push_back({"near_hazard", [layout](const Vec& s) {
                       for (const auto& d : layout.obstacles)
                           if (disc_dist(d, s[0], s[1]) <= 1.3 * d.hazard_r) return true;
                       for (const auto& w : layout.walls)
                           if (s[0] >= w.x0 - 0.04 && s[0] <= w.x1 + 0.04 && s[1] >= w.y0 - 0.04 &&
                               s[1] <= w.y1 + 0.04)
                               return true;
                       return false;
                   }});
    out.push_back({"high_speed", [vmax](const Vec& s) {
                       return std::hypot(s[2], s[3]) > 0.7 * vmax;
                   }});
    out.push_back({"upper_half", [](const Vec& s) { return s[1] > 0.5; }});
    out.push_back({"near_goal", [layout](const Vec& s) {
                       return std::hypot(s[0] - layout.goal_x, s[1] - layout.goal_y) <=
                              2.0 * layout.goal_r;
                   }});
    return out;
}

double NavEnv::shaping_distance(double x, double y) const {
    if (variant_ == Variant::Nav || dist_field_.empty())
        return std::hypot(x - layout_.goal_x, y - layout_.goal_y);
    const int n = field_n_;
    int cx = std::min(n - 1, std::max(0, static_cast<int>(x * n)));
    int cy = std::min(n - 1, std::max(0, static_cast<int>(y * n)));
    double d = dist_field_[static_cast<std::size_t>(cy) * n + cx];
    if (d == kInf) {
        // Inside a blocked cell (can only happen for injected states): take
        // the best neighbouring value.
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int qx = cx + dx;
                const int qy = cy + dy;
                if (qx < 0 || qy < 0 || qx >= n || qy >= n) continue;
                d = std::min(d, dist_field_[static_cast<std::size_t>(qy) * n + qx] + 1.0 / n);
            }
        if (d == kInf) d = 2.0;
    }
    return d;
}

void NavEnv::build_distance_field() {
    dist_field_.clear();
    if (variant_ == Variant::Nav) return;
    const int n = 48;
    field_n_ = n;
    const double cell = 1.0 / n;
    std::vector<char> blocked(static_cast<std::size_t>(n) * n, 0);
    for (int cy = 0; cy < n; ++cy)
        for (int cx = 0; cx < n; ++cx) {
            const double px = (cx + 0.5) * cell;
            const double py = (cy + 0.5) * cell;
            for (const auto& w : layout_.walls)
                if (px >= w.x0 - 0.5 * cell && px <= w.x1 + 0.5 * cell && py >= w.y0 - 0.5 * cell &&
                    py <= w.y1 + 0.5 * cell)
                    blocked[static_cast<std::size_t>(cy) * n + cx] = 1;
        }
    dist_field_.assign(static_cast<std::size_t>(n) * n, kInf);
    // Dijkstra over 8-neighbour moves from the goal cell.
    const int gx = std::min(n - 1, std::max(0, static_cast<int>(layout_.goal_x * n)));
    const int gy = std::min(n - 1, std::max(0, static_cast<int>(layout_.goal_y * n)));
    struct Item {
        double d;
        int x, y;
    };
    auto cmp = [](const Item& a, const Item& b) { return a.d > b.d; };
    std::vector<Item> heap;
    auto push = [&](double d, int x, int y) {
        heap.push_back({d, x, y});
        std::push_heap(heap.begin(), heap.end(), cmp);
    };
    dist_field_[static_cast<std::size_t>(gy) * n + gx] = 0.0;
    push(0.0, gx, gy);
    while (!heap.empty()) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        const Item it = heap.back();
        heap.pop_back();
        if (it.d > dist_field_[static_cast<std::size_t>(it.y) * n + it.x]) continue;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int qx = it.x + dx;
                const int qy = it.y + dy;
                if (qx < 0 || qy < 0 || qx >= n || qy >= n) continue;
                const std::size_t qi = static_cast<std::size_t>(qy) * n + qx;
                if (blocked[qi]) continue;
                const double nd = it.d + cell * (dx != 0 && dy != 0 ? 1.4142135623730951 : 1.0);
                if (nd < dist_field_[qi]) {
                    dist_field_[qi] = nd;
                    push(nd, qx, qy);
                }
            }
    }
}

}  // namespace vfrl

#include "vfrl/types.hpp"

#include <cmath>

namespace vfrl {

void CmdpSpec::validate() const {
    if (state_dim < 1) throw Error("state_dim must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must be in (0,1)");
    if (!(gamma_risk > 0.0 && gamma_risk < 1.0)) throw Error("gamma_risk must be in (0,1)");
    if (horizon < 1) throw Error("horizon must be >= 1");
    if (cost_names.empty()) throw Error("at least one cost channel is required");
    if (action_space.discrete) {
        if (action_space.arms < 1) throw Error("discrete action space needs >= 1 arm");
    } else {
        const auto& box = action_space.box;
        if (box.lo.empty() || box.lo.size() != box.hi.size())
            throw Error("continuous action box is malformed");
        for (std::size_t d = 0; d < box.lo.size(); ++d)
            if (!(box.lo[d] < box.hi[d]))
                throw Error("action box bounds must satisfy lo < hi in dimension " + std::to_string(d));
    }
}

std::pair<std::size_t, std::size_t> TrajectoryDataset::episode_range(std::size_t e) const {
    if (e >= episode_starts.size()) throw Error("episode index out of range");
    const std::size_t begin = episode_starts[e];
    const std::size_t end = e + 1 < episode_starts.size() ? episode_starts[e + 1] : transitions.size();
    return {begin, end};
}

void TrajectoryDataset::append_episode(std::vector<Transition> episode) {
    if (episode.empty()) throw Error("cannot append an empty episode");
    episode_starts.push_back(transitions.size());
    for (auto& t : episode) transitions.push_back(std::move(t));
}

void TrajectoryDataset::validate(int horizon) const {
    for (std::size_t e = 0; e < episode_count(); ++e) {
        const auto [begin, end] = episode_range(e);
        if (begin >= end) throw Error("episode " + std::to_string(e) + " is empty");
        const std::size_t len = end - begin;
        if (!transitions[end - 1].done && len != static_cast<std::size_t>(horizon))
            throw Error("episode " + std::to_string(e) +
                        " neither terminates nor runs the full horizon");
        for (std::size_t i = begin; i + 1 < end; ++i)
            if (transitions[i].done)
                throw Error("episode " + std::to_string(e) + " has an interior done flag");
    }
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const Transition& t = transitions[i];
        if (static_cast<int>(t.s.size()) != state_dim ||
            static_cast<int>(t.s_next.size()) != state_dim)
            throw Error("record " + std::to_string(i) + ": state length != state_dim");
        if (static_cast<int>(t.a.size()) != action_dim)
            throw Error("record " + std::to_string(i) + ": action length != action_dim");
        if (static_cast<int>(t.c.size()) != cost_dim)
            throw Error("record " + std::to_string(i) + ": cost length != cost_dim");
        for (double ci : t.c)
            if (!(ci >= 0.0)) throw Error("record " + std::to_string(i) + ": negative cost");
        for (double v : t.s)
            if (!std::isfinite(v)) throw Error("record " + std::to_string(i) + ": non-finite state");
    }
}

double CostChannel::scalar(const Vec& c) const {
    if (sum) {
        double acc = 0.0;
        for (double v : c) acc += v;
        return acc;
    }
    if (index < 0 || index >= static_cast<int>(c.size()))
        throw Error("cost_channel index out of range");
    return c[static_cast<std::size_t>(index)];
}

CostChannel CostChannel::parse(const std::string& text) {
    CostChannel ch;
    if (text == "sum") return ch;
    try {
        ch.sum = false;
        ch.index = std::stoi(text);
    } catch (const std::exception&) {
        throw Error("cost_channel must be 'sum' or a channel index");
    }
    if (ch.index < 0) throw Error("cost_channel index must be >= 0");
    return ch;
}

std::string CostChannel::to_string() const { return sum ? "sum" : std::to_string(index); }

}  // namespace vfrl

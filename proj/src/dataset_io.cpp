#include <cstdio>
#include <fstream>
#include <sstream>

#include "vfrl/types.hpp"

namespace vfrl {

namespace {

double parse_field(const std::string& text, std::size_t record) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(text, &pos);
        if (pos != text.size()) throw Error("");
        return d;
    } catch (const std::exception&) {
        throw Error("record " + std::to_string(record) + ": bad numeric field '" + text + "'");
    }
}

}  // namespace

void write_dataset(const TrajectoryDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file '" + path + "'");
    out << "# vfrl dataset v1\n";
    out << "state_dim=" << ds.state_dim << "\n";
    out << "action_dim=" << ds.action_dim << "\n";
    out << "action_kind=" << (ds.discrete_actions ? "discrete" : "continuous") << "\n";
    out << "cost_dim=" << ds.cost_dim << "\n";
    out << "seed=" << ds.seed << "\n";
    out << "source_policy_id=" << ds.source_policy_id << "\n";
    out << "episode_id,step,s...,a...,s_next...,r,c...,done\n";
    for (std::size_t e = 0; e < ds.episode_count(); ++e) {
        const auto [begin, end] = ds.episode_range(e);
        for (std::size_t i = begin; i < end; ++i) {
            const Transition& t = ds.transitions[i];
            out << e << ',' << (i - begin);
            for (double v : t.s) out << ',' << format_double(v);
            for (double v : t.a) out << ',' << format_double(v);
            for (double v : t.s_next) out << ',' << format_double(v);
            out << ',' << format_double(t.r);
            for (double v : t.c) out << ',' << format_double(v);
            out << ',' << (t.done ? 1 : 0) << "\n";
        }
    }
    if (!out) throw Error("failed while writing dataset file '" + path + "'");
}

TrajectoryDataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file '" + path + "'");
    TrajectoryDataset ds;
    std::string line;
    if (!std::getline(in, line) || trim(line) != "# vfrl dataset v1")
        throw Error("dataset file '" + path + "' has no recognized header");

    bool saw_columns = false;
    while (!saw_columns && std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line.rfind("episode_id,", 0) == 0) {
            saw_columns = true;
            break;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw Error("dataset header: expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "state_dim") ds.state_dim = std::stoi(value);
        else if (key == "action_dim") ds.action_dim = std::stoi(value);
        else if (key == "action_kind") ds.discrete_actions = (value == "discrete");
        else if (key == "cost_dim") ds.cost_dim = std::stoi(value);
        else if (key == "seed") ds.seed = std::stoull(value);
        else if (key == "source_policy_id") ds.source_policy_id = value;
        else throw Error("dataset header: unknown key '" + key + "'");
    }
    if (ds.state_dim < 1 || ds.action_dim < 1 || ds.cost_dim < 1)
        throw Error("dataset header is incomplete");

    const std::size_t expected =
        2 + 2 * static_cast<std::size_t>(ds.state_dim) + static_cast<std::size_t>(ds.action_dim) +
        1 + static_cast<std::size_t>(ds.cost_dim) + 1;
    std::size_t record = 0;
    long long current_episode = -1;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != expected)
            throw Error("record " + std::to_string(record) + ": expected " +
                        std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
        std::size_t f = 0;
        const long long episode = static_cast<long long>(parse_field(fields[f++], record));
        ++f;  // step index is redundant with position
        Transition t;
        t.s.resize(ds.state_dim);
        for (int d = 0; d < ds.state_dim; ++d) t.s[d] = parse_field(fields[f++], record);
        t.a.resize(ds.action_dim);
        for (int d = 0; d < ds.action_dim; ++d) t.a[d] = parse_field(fields[f++], record);
        t.s_next.resize(ds.state_dim);
        for (int d = 0; d < ds.state_dim; ++d) t.s_next[d] = parse_field(fields[f++], record);
        t.r = parse_field(fields[f++], record);
        t.c.resize(ds.cost_dim);
        for (int d = 0; d < ds.cost_dim; ++d) {
            t.c[d] = parse_field(fields[f++], record);
            if (!(t.c[d] >= 0.0))
                throw Error("record " + std::to_string(record) + ": negative cost");
        }
        t.done = parse_field(fields[f++], record) != 0.0;
        if (episode != current_episode) {
            if (episode != current_episode + 1)
                throw Error("record " + std::to_string(record) + ": episode ids must be consecutive");
            ds.episode_starts.push_back(ds.transitions.size());
            current_episode = episode;
        }
        ds.transitions.push_back(std::move(t));
        ++record;
    }
    return ds;
}

}  // namespace vfrl

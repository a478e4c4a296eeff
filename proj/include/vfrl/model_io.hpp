#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vfrl/mlp.hpp"

namespace vfrl {

// Flat text container with a version header holding named networks plus
// string metadata; shared by the policy, critic, ensemble and shield
// artifacts. Values round-trip exactly (see format_double).
struct ModelFile {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Mlp>> mlps;

    void set_meta(const std::string& key, const std::string& value) { meta[key] = value; }
    const std::string& meta_at(const std::string& key) const;
    std::string meta_or(const std::string& key, const std::string& def) const;
    bool has_mlp(const std::string& name) const;
    const Mlp& mlp(const std::string& name) const;

    void save(const std::string& path) const;
    static ModelFile load(const std::string& path);
};

}  // namespace vfrl

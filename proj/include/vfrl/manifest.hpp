#pragma once

#include <map>
#include <string>

#include "vfrl/types.hpp"

namespace vfrl {

// Stage handoff record under runs/<run-id>/: which artifacts exist and the
// immutable config snapshot the run was created with. Stage functions check
// their upstream artifacts through this instead of silently recomputing.
class PipelineManifest {
public:
    static PipelineManifest create(const RunConfig& cfg);
    static PipelineManifest open(const std::string& dir);

    const std::string& dir() const { return dir_; }
    const std::string& run_id() const { return run_id_; }
    const std::string& config_snapshot() const { return config_snapshot_; }

    std::string path(const std::string& artifact) const { return dir_ + "/" + artifact; }

    void record(const std::string& stage, const std::string& artifact);
    bool stage_done(const std::string& stage) const { return stages_.count(stage) > 0; }
    // Throws an error naming the missing stage.
    void require(const std::string& stage) const;
    const std::map<std::string, std::string>& stages() const { return stages_; }

    void save() const;

private:
    std::string dir_;
    std::string run_id_;
    std::string config_snapshot_;
    std::map<std::string, std::string> stages_;  // stage -> primary artifact
};

}  // namespace vfrl

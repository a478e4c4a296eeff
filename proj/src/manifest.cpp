#include "vfrl/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace vfrl {

PipelineManifest PipelineManifest::create(const RunConfig& cfg) {
    PipelineManifest m;
    m.run_id_ = cfg.run_id;
    m.dir_ = cfg.out_dir + "/" + cfg.run_id;
    m.config_snapshot_ = cfg.snapshot();
    std::filesystem::create_directories(m.dir_);
    const std::string manifest_path = m.dir_ + "/manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        PipelineManifest existing = open(m.dir_);
        if (existing.config_snapshot_ != m.config_snapshot_)
            throw Error("run '" + cfg.run_id + "' exists with a different config snapshot");
        return existing;
    }
    m.save();
    return m;
}

PipelineManifest PipelineManifest::open(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw Error("no manifest at '" + dir + "'");
    nlohmann::ordered_json j;
    in >> j;
    PipelineManifest m;
    m.dir_ = dir;
    m.run_id_ = j.at("run_id");
    m.config_snapshot_ = j.at("config");
    for (const auto& [stage, artifact] : j.at("stages").items())
        m.stages_[stage] = artifact.get<std::string>();
    return m;
}

void PipelineManifest::record(const std::string& stage, const std::string& artifact) {
    stages_[stage] = artifact;
    save();
}

void PipelineManifest::require(const std::string& stage) const {
    if (!stage_done(stage))
        throw Error("stage '" + stage + "' has not been run for '" + run_id_ +
                    "'; run it first");
}

void PipelineManifest::save() const {
    nlohmann::ordered_json j;
    j["run_id"] = run_id_;
    j["config"] = config_snapshot_;
    nlohmann::ordered_json stages;
    for (const auto& [stage, artifact] : stages_) stages[stage] = artifact;
    j["stages"] = stages;
    std::ofstream out(dir_ + "/manifest.json");
    if (!out) throw Error("cannot write manifest for '" + run_id_ + "'");
    out << j.dump(2) << "\n";
}

}  // namespace vfrl

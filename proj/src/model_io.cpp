#include "vfrl/model_io.hpp"

#include <fstream>
#include <sstream>

#include "vfrl/util.hpp"

namespace vfrl {

const std::string& ModelFile::meta_at(const std::string& key) const {
    const auto it = meta.find(key);
    if (it == meta.end()) throw Error("model container: missing meta key '" + key + "'");
    return it->second;
}

std::string ModelFile::meta_or(const std::string& key, const std::string& def) const {
    const auto it = meta.find(key);
    return it == meta.end() ? def : it->second;
}

bool ModelFile::has_mlp(const std::string& name) const {
    for (const auto& [n, _] : mlps)
        if (n == name) return true;
    return false;
}

const Mlp& ModelFile::mlp(const std::string& name) const {
    for (const auto& [n, net] : mlps)
        if (n == name) return net;
    throw Error("model container: no network named '" + name + "'");
}

void ModelFile::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << "vfrl-model v1\n";
    for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
    for (const auto& [name, net] : mlps) {
        out << "mlp " << name;
        for (std::size_t s : net.sizes()) out << " " << s;
        out << "\n";
        for (const auto& layer : net.layers()) {
            out << "b";
            for (double v : layer.b) out << " " << format_double(v);
            out << "\n";
            for (std::size_t r = 0; r < layer.out; ++r) {
                out << "w";
                for (std::size_t c = 0; c < layer.in; ++c)
                    out << " " << format_double(layer.w[r * layer.in + c]);
                out << "\n";
            }
        }
        out << "end\n";
    }
    if (!out) throw Error("failed while writing model file '" + path + "'");
}

ModelFile ModelFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line) != "vfrl-model v1")
        throw Error("model file '" + path + "' has no recognized header");
    ModelFile mf;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            mf.meta[key] = trim(value);
        } else if (tag == "mlp") {
            std::string name;
            ls >> name;
            std::vector<std::size_t> sizes;
            std::size_t s;
            while (ls >> s) sizes.push_back(s);
            if (sizes.size() < 2) throw Error("model file: bad mlp sizes for '" + name + "'");
            std::vector<Mlp::Layer> layers(sizes.size() - 1);
            for (std::size_t l = 0; l < layers.size(); ++l) {
                layers[l].in = sizes[l];
                layers[l].out = sizes[l + 1];
                layers[l].b.resize(layers[l].out);
                layers[l].w.resize(layers[l].in * layers[l].out);
                if (!std::getline(in, line)) throw Error("model file: truncated network");
                std::istringstream bs(line);
                bs >> tag;
                if (tag != "b") throw Error("model file: expected bias line");
                for (double& v : layers[l].b)
                    if (!(bs >> v)) throw Error("model file: short bias line");
                for (std::size_t r = 0; r < layers[l].out; ++r) {
                    if (!std::getline(in, line)) throw Error("model file: truncated network");
                    std::istringstream wsr(line);
                    wsr >> tag;
                    if (tag != "w") throw Error("model file: expected weight line");
                    for (std::size_t c = 0; c < layers[l].in; ++c)
                        if (!(wsr >> layers[l].w[r * layers[l].in + c]))
                            throw Error("model file: short weight line");
                }
            }
            if (!std::getline(in, line) || trim(line) != "end")
                throw Error("model file: network '" + name + "' not terminated");
            mf.mlps.emplace_back(name, Mlp(std::move(layers)));
        } else {
            throw Error("model file: unknown tag '" + tag + "'");
        }
    }
    return mf;
}

}  // namespace vfrl

#include <cmath>

#include <json.hpp>

#include "nfsim/error.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/stack.hpp"

namespace nfsim {

using nlohmann::json;

LayerStack::LayerStack(ApertureRef g, std::vector<double> s, std::vector<Eigen::VectorXcd> l)
    : grid(std::move(g)), spacings(std::move(s)), layers(std::move(l)) {
    if (!grid) throw GridMismatchError("layer stack without aperture grid");
    if (layers.empty() || spacings.size() + 1 != layers.size())
        throw GridMismatchError("layer stack needs L >= 1 layers and L - 1 spacings");
    for (const auto& layer : layers) {
        if (static_cast<std::size_t>(layer.size()) != grid->size())
            throw GridMismatchError("layer length does not match aperture grid");
        if (!layer.allFinite()) throw NumericalError("non-finite transmission coefficient");
        if (layer.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
            throw NumericalError("transmission coefficient magnitude exceeds 1");
    }
    rebuild_planes();
}

LayerStack LayerStack::phase_only(ApertureRef grid, std::vector<double> spacings,
                                  const std::vector<Eigen::VectorXd>& phases) {
    std::vector<Eigen::VectorXcd> layers;
    for (const auto& p : phases) {
        Eigen::VectorXcd g(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) g[i] = std::polar(1.0, p[i]);
        layers.push_back(std::move(g));
    }
    return LayerStack(std::move(grid), std::move(spacings), std::move(layers));
}

Eigen::VectorXd LayerStack::phases(std::size_t l) const {
    const auto& g = layers.at(l);
    Eigen::VectorXd p(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) p[i] = std::arg(g[i]);
    return p;
}

Eigen::VectorXd LayerStack::amplitudes(std::size_t l) const { return layers.at(l).cwiseAbs(); }

void LayerStack::rebuild_planes() {
    planes = layer_planes(*grid, spacings);
    for (std::size_t l = 0; l < offsets.size() && l < planes.size(); ++l) {
        if (offsets[l][0] == 0.0 && offsets[l][1] == 0.0) continue;
        std::vector<Vec3> pts = planes[l]->points;
        for (auto& q : pts) {
            q.x += offsets[l][0];
            q.y += offsets[l][1];
        }
        planes[l] = make_samples(std::move(pts), planes[l]->label);
    }
}

void LayerStack::set_offsets(std::vector<std::array<double, 2>> xy) {
    if (!xy.empty() && xy.size() != layers.size()) throw GridMismatchError("one offset per layer required");
    offsets = std::move(xy);
    rebuild_planes();
}

std::string stack_to_json(const LayerStack& stack) {
    json doc;
    doc["format"] = "nfsim-stack";
    doc["version"] = 1;
    doc["grid"] = {{"pitch", stack.grid->pitch()},
                   {"diameter", stack.grid->diameter()},
                   {"elements", stack.grid->size()}};
    doc["spacings"] = stack.spacings;
    if (!stack.offsets.empty()) doc["offsets"] = stack.offsets;
    json layers = json::array();
    for (const auto& g : stack.layers) {
        std::vector<double> amp, phase, re, im;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            amp.push_back(std::abs(g[i]));
            phase.push_back(std::arg(g[i]));
            re.push_back(g[i].real());
            im.push_back(g[i].imag());
        }
        layers.push_back({{"amp", amp}, {"phase", phase}, {"re", re}, {"im", im}});
    }
    doc["layers"] = layers;
    return doc.dump(1);
}

LayerStack stack_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("stack file is not valid JSON: ") + e.what());
    }
    try {
        if (doc.value("format", "") != "nfsim-stack") throw ConfigError("not an nfsim stack document");
        const json& g = doc.at("grid");
        auto grid = std::make_shared<const ApertureGrid>(g.at("pitch").get<double>(), g.at("diameter").get<double>());
        if (grid->size() != g.at("elements").get<std::size_t>())
            throw ConfigError("stack grid descriptor does not reproduce its element count");
        auto spacings = doc.at("spacings").get<std::vector<double>>();
        std::vector<Eigen::VectorXcd> layers;
        for (const auto& l : doc.at("layers")) {
            auto amp = l.at("amp").get<std::vector<double>>();
            auto phase = l.at("phase").get<std::vector<double>>();
            if (amp.size() != grid->size() || phase.size() != grid->size())
                throw ConfigError("stack layer length does not match grid");
            Eigen::VectorXcd v(static_cast<Eigen::Index>(amp.size()));
            if (l.contains("re") && l.contains("im")) {
                auto re = l.at("re").get<std::vector<double>>();
                auto im = l.at("im").get<std::vector<double>>();
                if (re.size() != amp.size() || im.size() != amp.size())
                    throw ConfigError("stack layer re/im length mismatch");
                for (std::size_t i = 0; i < amp.size(); ++i) {
                    v[static_cast<Eigen::Index>(i)] = cd(re[i], im[i]);
                    if (std::abs(std::polar(amp[i], phase[i]) - cd(re[i], im[i])) > 1e-9)
                        throw ConfigError("stack layer amp/phase disagree with re/im");
                }
            } else {
                for (std::size_t i = 0; i < amp.size(); ++i)
                    v[static_cast<Eigen::Index>(i)] = std::polar(amp[i], phase[i]);
            }
            layers.push_back(std::move(v));
        }
        LayerStack s(std::move(grid), std::move(spacings), std::move(layers));
        if (doc.contains("offsets")) s.set_offsets(doc.at("offsets").get<std::vector<std::array<double, 2>>>());
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed stack document: ") + e.what());
    }
}

}  // namespace nfsim

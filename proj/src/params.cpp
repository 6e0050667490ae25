#include "pnunet/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pnunet/errors.hpp"

namespace pnunet {

std::size_t shape_count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

ParamTensor& ParamSet::add(std::string name, std::vector<int> shape, double fill) {
    if (contains(name)) throw ArgumentError("duplicate parameter '" + name + "'");
    const std::size_t n = shape_count(shape);
    tensors_.push_back({std::move(name), std::move(shape), std::vector<double>(n, fill)});
    return tensors_.back();
}

const ParamTensor* ParamSet::find(const std::string& name) const noexcept {
    auto it = std::find_if(tensors_.begin(), tensors_.end(),
                           [&](const ParamTensor& t) { return t.name == name; });
    return it == tensors_.end() ? nullptr : &*it;
}

const ParamTensor& ParamSet::at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw ArgumentError("no parameter named '" + name + "'");
}

ParamTensor& ParamSet::at(const std::string& name) {
    return const_cast<ParamTensor&>(std::as_const(*this).at(name));
}

std::size_t ParamSet::total_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.count();
    return n;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& t : tensors_) out.add(t.name, t.shape);
    return out;
}

bool ParamSet::all_finite() const noexcept {
    for (const auto& t : tensors_)
        for (double v : t.values)
            if (!std::isfinite(v)) return false;
    return true;
}

void round_to_float(ParamSet& params) noexcept {
    for (auto& t : params)
        for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
}

Adam::Adam(const ParamSet& like, AdamConfig cfg)
    : cfg_(cfg), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(ParamSet& params, const ParamSet& grads) {
    if (params.size() != m_.size()) throw ArgumentError("optimizer/parameter layout mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto pit = params.begin();
    auto git = grads.begin();
    auto mit = m_.begin();
    auto vit = v_.begin();
    for (; pit != params.end(); ++pit, ++git, ++mit, ++vit) {
        auto& p = pit->values;
        const auto& g = git->values;
        auto& m = mit->values;
        auto& v = vit->values;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            if (cfg_.learning_rate == 0.0) continue;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            p[i] = static_cast<double>(static_cast<float>(p[i]));
        }
    }
}

}  // namespace pnunet

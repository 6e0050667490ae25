#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pnunet {

// A named, shaped block of network parameters. Values are held in double for
// computation but are kept float32-representable (see round_to_float), which
// is what makes the float32 weight file round-trip bit-exact.
struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;

    std::size_t count() const noexcept { return values.size(); }
    friend bool operator==(const ParamTensor&, const ParamTensor&) = default;
};

// Ordered collection of parameter tensors; order is part of the model contract.
class ParamSet {
public:
    ParamTensor& add(std::string name, std::vector<int> shape, double fill = 0.0);

    const ParamTensor& at(const std::string& name) const;
    ParamTensor& at(const std::string& name);
    const ParamTensor* find(const std::string& name) const noexcept;
    bool contains(const std::string& name) const noexcept { return find(name) != nullptr; }

    std::size_t size() const noexcept { return tensors_.size(); }
    std::size_t total_count() const noexcept;

    auto begin() noexcept { return tensors_.begin(); }
    auto end() noexcept { return tensors_.end(); }
    auto begin() const noexcept { return tensors_.begin(); }
    auto end() const noexcept { return tensors_.end(); }

    // Same names and shapes, all zero.
    ParamSet zeros_like() const;

    bool all_finite() const noexcept;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    std::vector<ParamTensor> tensors_;
};

std::size_t shape_count(const std::vector<int>& shape);

void round_to_float(ParamSet& params) noexcept;

// Adaptive-moment optimizer state over a ParamSet.
struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& like, AdamConfig cfg);

    // One update; parameters are rounded back to float32 afterwards. A zero
    // learning rate leaves parameters bit-identical.
    void step(ParamSet& params, const ParamSet& grads);

    long long steps() const noexcept { return t_; }
    const ParamSet& first_moment() const noexcept { return m_; }
    const ParamSet& second_moment() const noexcept { return v_; }

private:
    AdamConfig cfg_;
    ParamSet m_;
    ParamSet v_;
    long long t_ = 0;
};

}  // namespace pnunet

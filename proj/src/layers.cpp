#include "pnunet/layers.hpp"

#include <cmath>

#include "pnunet/errors.hpp"
#include "pnunet/kernels.hpp"

namespace pnunet::layers {

namespace {

kernels::ConvShape conv_shape(const ImageTensor& input, const ParamTensor& weight) {
    if (weight.shape.size() != 4 || weight.shape[0] != weight.shape[1])
        throw ArgumentError("conv weight '" + weight.name + "' must be [K,K,Cin,Cout]");
    if (weight.shape[2] != input.channels)
        throw ArgumentError("conv '" + weight.name + "' expects " + std::to_string(weight.shape[2]) +
                            " input channels, got " + std::to_string(input.channels));
    return {input.height, input.width, weight.shape[2], weight.shape[3], weight.shape[0]};
}

}  // namespace

ImageTensor conv2d(const ImageTensor& input, const ParamTensor& weight, const ParamTensor& bias) {
    const auto s = conv_shape(input, weight);
    ImageTensor out(input.height, input.width, s.out_channels);
    kernels::conv2d_forward(s, input.data, weight.values, bias.values, out.data);
    return out;
}

void conv2d_backward(const ImageTensor& input, const ParamTensor& weight,
                     const ImageTensor& grad_output, ParamTensor* grad_weight,
                     ParamTensor* grad_bias, ImageTensor* grad_input) {
    const auto s = conv_shape(input, weight);
    if (grad_weight != nullptr && grad_bias != nullptr)
        kernels::conv2d_backward_weight(s, input.data, grad_output.data, grad_weight->values,
                                        grad_bias->values);
    if (grad_input != nullptr) {
        *grad_input = ImageTensor(input.height, input.width, input.channels);
        kernels::conv2d_backward_input(s, grad_output.data, weight.values, grad_input->data);
    }
}

ImageTensor leaky_relu(const ImageTensor& pre) {
    ImageTensor out = pre;
    for (double& v : out.data)
        if (v < 0.0) v *= kLeakySlope;
    return out;
}

ImageTensor leaky_relu_backward(const ImageTensor& pre, const ImageTensor& grad_output) {
    ImageTensor out = grad_output;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (pre.data[i] < 0.0) out.data[i] *= kLeakySlope;
    return out;
}

ImageTensor sigmoid(const ImageTensor& pre) {
    ImageTensor out = pre;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

ImageTensor sigmoid_backward(const ImageTensor& output, const ImageTensor& grad_output) {
    ImageTensor out = grad_output;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] *= output.data[i] * (1.0 - output.data[i]);
    return out;
}

ImageTensor avg_pool2(const ImageTensor& input) {
    if (input.height % 2 != 0 || input.width % 2 != 0)
        throw ArgumentError("avg_pool2 needs even dimensions, got " + input.shape_string());
    ImageTensor out(input.height / 2, input.width / 2, input.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < out.channels; ++c)
                out.at(y, x, c) = 0.25 * (input.at(2 * y, 2 * x, c) + input.at(2 * y, 2 * x + 1, c) +
                                          input.at(2 * y + 1, 2 * x, c) +
                                          input.at(2 * y + 1, 2 * x + 1, c));
    return out;
}

ImageTensor avg_pool2_backward(const ImageTensor& grad_output) {
    ImageTensor out(grad_output.height * 2, grad_output.width * 2, grad_output.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < out.channels; ++c)
                out.at(y, x, c) = 0.25 * grad_output.at(y / 2, x / 2, c);
    return out;
}

ImageTensor upsample2(const ImageTensor& input) {
    ImageTensor out(input.height * 2, input.width * 2, input.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < out.channels; ++c) out.at(y, x, c) = input.at(y / 2, x / 2, c);
    return out;
}

ImageTensor upsample2_backward(const ImageTensor& grad_output) {
    ImageTensor out(grad_output.height / 2, grad_output.width / 2, grad_output.channels);
    for (int y = 0; y < grad_output.height; ++y)
        for (int x = 0; x < grad_output.width; ++x)
            for (int c = 0; c < out.channels; ++c) out.at(y / 2, x / 2, c) += grad_output.at(y, x, c);
    return out;
}

ImageTensor concat_channels(const ImageTensor& a, const ImageTensor& b) {
    if (a.height != b.height || a.width != b.width)
        throw ArgumentError("concat_channels spatial mismatch");
    ImageTensor out(a.height, a.width, a.channels + b.channels);
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            auto dst = out.pixel(y, x);
            auto pa = a.pixel(y, x);
            auto pb = b.pixel(y, x);
            std::copy(pa.begin(), pa.end(), dst.begin());
            std::copy(pb.begin(), pb.end(), dst.begin() + a.channels);
        }
    return out;
}

void split_channels(const ImageTensor& ab, int channels_a, ImageTensor* a, ImageTensor* b) {
    *a = ImageTensor(ab.height, ab.width, channels_a);
    *b = ImageTensor(ab.height, ab.width, ab.channels - channels_a);
    for (int y = 0; y < ab.height; ++y)
        for (int x = 0; x < ab.width; ++x) {
            auto src = ab.pixel(y, x);
            std::copy(src.begin(), src.begin() + channels_a, a->pixel(y, x).begin());
            std::copy(src.begin() + channels_a, src.end(), b->pixel(y, x).begin());
        }
}

std::vector<double> dense(const std::vector<double>& input, const ParamTensor& weight,
                          const ParamTensor& bias) {
    const int out_n = weight.shape[0], in_n = weight.shape[1];
    if (static_cast<int>(input.size()) != in_n)
        throw ArgumentError("dense '" + weight.name + "' input size mismatch");
    std::vector<double> out(bias.values.begin(), bias.values.end());
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_n; ++o) {
        const double* w = weight.values.data() + static_cast<std::size_t>(o) * in_n;
        double s = 0.0;
        for (int i = 0; i < in_n; ++i) s += w[i] * input[i];
        out[o] += s;
    }
    return out;
}

void dense_backward(const std::vector<double>& input, const ParamTensor& weight,
                    const std::vector<double>& grad_output, ParamTensor* grad_weight,
                    ParamTensor* grad_bias, std::vector<double>* grad_input) {
    const int out_n = weight.shape[0], in_n = weight.shape[1];
    if (grad_weight != nullptr) {
#pragma omp parallel for schedule(static)
        for (int o = 0; o < out_n; ++o) {
            double* gw = grad_weight->values.data() + static_cast<std::size_t>(o) * in_n;
            const double g = grad_output[o];
            for (int i = 0; i < in_n; ++i) gw[i] += g * input[i];
        }
    }
    if (grad_bias != nullptr)
        for (int o = 0; o < out_n; ++o) grad_bias->values[o] += grad_output[o];
    if (grad_input != nullptr) {
        grad_input->assign(static_cast<std::size_t>(in_n), 0.0);
        for (int o = 0; o < out_n; ++o) {
            const double* w = weight.values.data() + static_cast<std::size_t>(o) * in_n;
            const double g = grad_output[o];
            for (int i = 0; i < in_n; ++i) (*grad_input)[i] += g * w[i];
        }
    }
}

void add_inplace(ImageTensor& acc, const ImageTensor& other) {
    require_same_shape(acc, other, "add_inplace");
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += other.data[i];
}

}  // namespace pnunet::layers

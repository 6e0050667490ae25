#pragma once

#include <vector>

#include "pnunet/image.hpp"
#include "pnunet/params.hpp"

// Differentiable building blocks on ImageTensor feature maps. Each forward has
// a matching *_backward that maps the output gradient to the input gradient.
namespace pnunet::layers {

inline constexpr double kLeakySlope = 0.01;

// weight shape [K, K, Cin, Cout], bias shape [Cout].
ImageTensor conv2d(const ImageTensor& input, const ParamTensor& weight, const ParamTensor& bias);

// Any of grad_weight, grad_bias, grad_input may be null. Parameter gradients
// accumulate; grad_input is overwritten.
void conv2d_backward(const ImageTensor& input, const ParamTensor& weight,
                     const ImageTensor& grad_output, ParamTensor* grad_weight,
                     ParamTensor* grad_bias, ImageTensor* grad_input);

ImageTensor leaky_relu(const ImageTensor& pre);
ImageTensor leaky_relu_backward(const ImageTensor& pre, const ImageTensor& grad_output);

ImageTensor sigmoid(const ImageTensor& pre);
ImageTensor sigmoid_backward(const ImageTensor& output, const ImageTensor& grad_output);

// 2x2 average pooling; H and W must be even.
ImageTensor avg_pool2(const ImageTensor& input);
ImageTensor avg_pool2_backward(const ImageTensor& grad_output);

// 2x nearest-neighbour upsampling.
ImageTensor upsample2(const ImageTensor& input);
ImageTensor upsample2_backward(const ImageTensor& grad_output);

ImageTensor concat_channels(const ImageTensor& a, const ImageTensor& b);
// Inverse of concat_channels for gradients: first `channels_a` channels go to *a.
void split_channels(const ImageTensor& ab, int channels_a, ImageTensor* a, ImageTensor* b);

// y = W x + b with W shape [out, in].
std::vector<double> dense(const std::vector<double>& input, const ParamTensor& weight,
                          const ParamTensor& bias);
void dense_backward(const std::vector<double>& input, const ParamTensor& weight,
                    const std::vector<double>& grad_output, ParamTensor* grad_weight,
                    ParamTensor* grad_bias, std::vector<double>* grad_input);

void add_inplace(ImageTensor& acc, const ImageTensor& other);

}  // namespace pnunet::layers

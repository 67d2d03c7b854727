#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "endofair/rng.hpp"

namespace endofair {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return Tensor{std::move(s), std::vector<double>(n, 0.0)};
    }

    std::size_t size() const { return data.size(); }
};

struct DenseSpec {
    std::size_t in = 0, out = 0;
};
struct ReluSpec {};
// Single-channel same-padded cross-correlation, stride 1, scalar bias.
// Anchor at (kh/2, kw/2); zero padding outside the image.
struct ConvSameSpec {
    std::size_t kh = 0, kw = 0;
};

using LayerSpec = std::variant<DenseSpec, ReluSpec, ConvSameSpec>;

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::vector<std::size_t> input_shape;
};

// Signal-to-signal map for a length-n input: Dense(n,h) ReLU Dense(h,h) ReLU Dense(h,n).
NetworkSpec fully_connected_net(std::size_t n, std::size_t hidden);
// Image-to-image map: three same-padded convolutions with ReLU between.
NetworkSpec conv_net(std::size_t height, std::size_t width, std::size_t kh, std::size_t kw);

// Throws std::invalid_argument if adjacent layer shapes do not compose;
// returns the output shape.
std::vector<std::size_t> validate_network(const NetworkSpec& spec);

// Named parameter tensors in layer order (weight/bias per Dense,
// kernel/bias per ConvSame; ReLU holds none).
struct ParamStore {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    Tensor& operator[](std::size_t i) { return tensors[i]; }
    const Tensor& operator[](std::size_t i) const { return tensors[i]; }
    std::size_t count() const { return tensors.size(); }
};

// Fan-in-scaled uniform init, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); biases zero.
// Draw order follows the parameter manifest, so equal seeds give equal params.
ParamStore init_params(const NetworkSpec& spec, SeededRng& rng);

Tensor forward(const NetworkSpec& spec, const ParamStore& params, const Tensor& input);

// Per-layer inputs captured during the forward pass, consumed by backward.
struct ForwardTrace {
    std::vector<Tensor> layer_inputs; // layer_inputs[i] feeds layers[i]
    Tensor output;
};

ForwardTrace forward_traced(const NetworkSpec& spec, const ParamStore& params, const Tensor& input);

struct BackwardResult {
    ParamStore param_grads;
    Tensor input_grad;
};

BackwardResult backward_from_trace(const NetworkSpec& spec, const ParamStore& params,
                                   const ForwardTrace& trace, const Tensor& output_grad);

// Convenience wrapper: runs the forward pass internally.
BackwardResult backward(const NetworkSpec& spec, const ParamStore& params, const Tensor& input,
                        const Tensor& output_grad);

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    ParamStore m, v; // first/second moments, mirroring the parameter shapes
    long t = 0;
};

AdamState init_adam(const AdamConfig& cfg, const ParamStore& params);

// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, ParamStore& params, const ParamStore& grads);

// Checkpoint: `<base>.json` manifest (layers, tensor names, shapes, byte
// offsets) plus `<base>.bin` of little-endian 64-bit floats in manifest order.
void save_checkpoint(const std::string& base_path, const NetworkSpec& spec,
                     const ParamStore& params);

struct Checkpoint {
    NetworkSpec spec;
    ParamStore params;
};

Checkpoint load_checkpoint(const std::string& base_path);

} // namespace endofair

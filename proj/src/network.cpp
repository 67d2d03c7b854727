#include "endofair/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "endofair/errors.hpp"
#include "endofair/parallel.hpp"

#include <json.hpp>

namespace endofair {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string layer_name(std::size_t idx, const char* tensor) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "layer%zu.%s", idx, tensor);
    return buf;
}

} // namespace

NetworkSpec fully_connected_net(std::size_t n, std::size_t hidden) {
    NetworkSpec spec;
    spec.input_shape = {n};
    spec.layers = {DenseSpec{n, hidden}, ReluSpec{}, DenseSpec{hidden, hidden}, ReluSpec{},
                   DenseSpec{hidden, n}};
    return spec;
}

NetworkSpec conv_net(std::size_t height, std::size_t width, std::size_t kh, std::size_t kw) {
    NetworkSpec spec;
    spec.input_shape = {height, width};
    spec.layers = {ConvSameSpec{kh, kw}, ReluSpec{}, ConvSameSpec{kh, kw}, ReluSpec{},
                   ConvSameSpec{kh, kw}};
    return spec;
}

std::vector<std::size_t> validate_network(const NetworkSpec& spec) {
    std::vector<std::size_t> shape = spec.input_shape;
    if (shape.empty() || shape_size(shape) == 0)
        throw std::invalid_argument("network: empty input shape");
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        if (const auto* d = std::get_if<DenseSpec>(&layer)) {
            if (d->in == 0 || d->out == 0)
                throw std::invalid_argument("network: dense layer with zero dimension");
            if (shape.size() != 1 || shape[0] != d->in)
                throw std::invalid_argument("network: dense input length mismatch at layer " +
                                            std::to_string(i));
            shape = {d->out};
        } else if (const auto* c = std::get_if<ConvSameSpec>(&layer)) {
            if (c->kh == 0 || c->kw == 0)
                throw std::invalid_argument("network: conv kernel with zero dimension");
            if (shape.size() != 2)
                throw std::invalid_argument("network: conv layer needs a 2-d input at layer " +
                                            std::to_string(i));
            // same padding: shape unchanged
        }
        // ReLU passes any shape through
    }
    return shape;
}

ParamStore init_params(const NetworkSpec& spec, SeededRng& rng) {
    validate_network(spec);
    ParamStore store;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (const auto* d = std::get_if<DenseSpec>(&spec.layers[i])) {
            Tensor w = Tensor::zeros({d->out, d->in});
            const double bound = std::sqrt(6.0 / static_cast<double>(d->in));
            for (auto& v : w.data) v = rng.uniform(-bound, bound);
            store.names.push_back(layer_name(i, "weight"));
            store.tensors.push_back(std::move(w));
            store.names.push_back(layer_name(i, "bias"));
            store.tensors.push_back(Tensor::zeros({d->out}));
        } else if (const auto* c = std::get_if<ConvSameSpec>(&spec.layers[i])) {
            Tensor k = Tensor::zeros({c->kh, c->kw});
            const double bound = std::sqrt(6.0 / static_cast<double>(c->kh * c->kw));
            for (auto& v : k.data) v = rng.uniform(-bound, bound);
            store.names.push_back(layer_name(i, "kernel"));
            store.tensors.push_back(std::move(k));
            store.names.push_back(layer_name(i, "bias"));
            store.tensors.push_back(Tensor::zeros({1}));
        }
    }
    return store;
}

namespace {

void dense_forward(const DenseSpec& d, const Tensor& w, const Tensor& b, const Tensor& in,
                   Tensor& out) {
    out = Tensor::zeros({d.out});
    const double* wp = w.data.data();
    const double* xp = in.data.data();
    double* yp = out.data.data();
    parallel_for(0, d.out, [&](std::size_t r) {
        const double* row = wp + r * d.in;
        double acc = b.data[r];
        for (std::size_t c = 0; c < d.in; ++c) acc += row[c] * xp[c];
        yp[r] = acc;
    }, 32);
}

// out(i,j) = bias + sum_{u,v} K(u,v) * X(i+u-ch, j+v-cw), zero outside.
void conv_forward(const ConvSameSpec& c, const Tensor& k, const Tensor& b, const Tensor& in,
                  Tensor& out) {
    const std::size_t h = in.shape[0], w = in.shape[1];
    const long ch = static_cast<long>(c.kh / 2), cw = static_cast<long>(c.kw / 2);
    out = Tensor::zeros({h, w});
    const double* kp = k.data.data();
    const double* xp = in.data.data();
    double* yp = out.data.data();
    const double bias = b.data[0];
    parallel_for(0, h, [&](std::size_t i) {
        for (std::size_t j = 0; j < w; ++j) {
            double acc = bias;
            const long ulo = std::max<long>(0, ch - static_cast<long>(i));
            const long uhi = std::min<long>(static_cast<long>(c.kh),
                                            static_cast<long>(h) + ch - static_cast<long>(i));
            const long vlo = std::max<long>(0, cw - static_cast<long>(j));
            const long vhi = std::min<long>(static_cast<long>(c.kw),
                                            static_cast<long>(w) + cw - static_cast<long>(j));
            for (long u = ulo; u < uhi; ++u) {
                const double* krow = kp + static_cast<std::size_t>(u) * c.kw;
                const double* xrow = xp + (static_cast<long>(i) + u - ch) * static_cast<long>(w);
                for (long v = vlo; v < vhi; ++v)
                    acc += krow[v] * xrow[static_cast<long>(j) + v - cw];
            }
            yp[i * w + j] = acc;
        }
    }, 1);
}

void relu_forward(const Tensor& in, Tensor& out) {
    out = in;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
}

} // namespace

ForwardTrace forward_traced(const NetworkSpec& spec, const ParamStore& params,
                            const Tensor& input) {
    if (input.shape != spec.input_shape)
        throw std::invalid_argument("forward: input shape mismatch");
    ForwardTrace trace;
    Tensor cur = input;
    std::size_t p = 0;
    for (const auto& layer : spec.layers) {
        trace.layer_inputs.push_back(cur);
        Tensor next;
        if (const auto* d = std::get_if<DenseSpec>(&layer)) {
            dense_forward(*d, params[p], params[p + 1], cur, next);
            p += 2;
        } else if (const auto* c = std::get_if<ConvSameSpec>(&layer)) {
            conv_forward(*c, params[p], params[p + 1], cur, next);
            p += 2;
        } else {
            relu_forward(cur, next);
        }
        cur = std::move(next);
    }
    trace.output = std::move(cur);
    return trace;
}

Tensor forward(const NetworkSpec& spec, const ParamStore& params, const Tensor& input) {
    return forward_traced(spec, params, input).output;
}

namespace {

void dense_backward(const DenseSpec& d, const Tensor& w, const Tensor& in, const Tensor& og,
                    Tensor& wg, Tensor& bg, Tensor& ig) {
    wg = Tensor::zeros({d.out, d.in});
    bg = og;
    ig = Tensor::zeros({d.in});
    const double* wp = w.data.data();
    const double* xp = in.data.data();
    const double* gp = og.data.data();
    double* wgp = wg.data.data();
    // weight grad: rank-1 outer product og * in^T
    parallel_for(0, d.out, [&](std::size_t r) {
        const double g = gp[r];
        double* row = wgp + r * d.in;
        for (std::size_t c = 0; c < d.in; ++c) row[c] = g * xp[c];
    }, 32);
    // input grad: W^T og
    double* igp = ig.data.data();
    parallel_for(0, d.in, [&](std::size_t c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < d.out; ++r) acc += wp[r * d.in + c] * gp[r];
        igp[c] = acc;
    }, 32);
}

void conv_backward(const ConvSameSpec& c, const Tensor& k, const Tensor& in, const Tensor& og,
                   Tensor& kg, Tensor& bg, Tensor& ig) {
    const std::size_t h = in.shape[0], w = in.shape[1];
    const long ch = static_cast<long>(c.kh / 2), cw = static_cast<long>(c.kw / 2);
    const double* kp = k.data.data();
    const double* xp = in.data.data();
    const double* gp = og.data.data();

    bg = Tensor::zeros({1});
    double bsum = 0.0;
    for (double v : og.data) bsum += v;
    bg.data[0] = bsum;

    // kernel grad: KG(u,v) = sum_{i,j} OG(i,j) X(i+u-ch, j+v-cw)
    kg = Tensor::zeros({c.kh, c.kw});
    double* kgp = kg.data.data();
    parallel_for(0, c.kh, [&](std::size_t u) {
        for (std::size_t v = 0; v < c.kw; ++v) {
            const long du = static_cast<long>(u) - ch, dv = static_cast<long>(v) - cw;
            const long ilo = std::max<long>(0, -du), ihi = std::min<long>(h, static_cast<long>(h) - du);
            const long jlo = std::max<long>(0, -dv), jhi = std::min<long>(w, static_cast<long>(w) - dv);
            double acc = 0.0;
            for (long i = ilo; i < ihi; ++i) {
                const double* grow = gp + i * static_cast<long>(w);
                const double* xrow = xp + (i + du) * static_cast<long>(w) + dv;
                for (long j = jlo; j < jhi; ++j) acc += grow[j] * xrow[j];
            }
            kgp[u * c.kw + v] = acc;
        }
    }, 1);

    // input grad: IG(p,q) = sum_{u,v} K(u,v) OG(p-u+ch, q-v+cw)
    ig = Tensor::zeros({h, w});
    double* igp = ig.data.data();
    parallel_for(0, h, [&](std::size_t p) {
        for (std::size_t q = 0; q < w; ++q) {
            const long ulo = std::max<long>(0, static_cast<long>(p) + ch - static_cast<long>(h) + 1);
            const long uhi = std::min<long>(static_cast<long>(c.kh), static_cast<long>(p) + ch + 1);
            const long vlo = std::max<long>(0, static_cast<long>(q) + cw - static_cast<long>(w) + 1);
            const long vhi = std::min<long>(static_cast<long>(c.kw), static_cast<long>(q) + cw + 1);
            double acc = 0.0;
            for (long u = ulo; u < uhi; ++u) {
                const double* krow = kp + static_cast<std::size_t>(u) * c.kw;
                const double* grow = gp + (static_cast<long>(p) - u + ch) * static_cast<long>(w);
                for (long v = vlo; v < vhi; ++v)
                    acc += krow[v] * grow[static_cast<long>(q) - v + cw];
            }
            igp[p * w + q] = acc;
        }
    }, 1);
}

} // namespace

BackwardResult backward_from_trace(const NetworkSpec& spec, const ParamStore& params,
                                   const ForwardTrace& trace, const Tensor& output_grad) {
    if (output_grad.shape != trace.output.shape)
        throw std::invalid_argument("backward: output_grad shape mismatch");
    BackwardResult res;
    res.param_grads.names = params.names;
    res.param_grads.tensors.resize(params.tensors.size());

    // parameter index just past each layer's tensors
    std::vector<std::size_t> pend(spec.layers.size());
    std::size_t p = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (!std::holds_alternative<ReluSpec>(spec.layers[i])) p += 2;
        pend[i] = p;
    }

    Tensor grad = output_grad;
    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const auto& layer = spec.layers[li];
        const Tensor& in = trace.layer_inputs[li];
        Tensor next_grad;
        if (const auto* d = std::get_if<DenseSpec>(&layer)) {
            const std::size_t pw = pend[li] - 2;
            dense_backward(*d, params[pw], in, grad, res.param_grads.tensors[pw],
                           res.param_grads.tensors[pw + 1], next_grad);
        } else if (const auto* c = std::get_if<ConvSameSpec>(&layer)) {
            const std::size_t pw = pend[li] - 2;
            conv_backward(*c, params[pw], in, grad, res.param_grads.tensors[pw],
                          res.param_grads.tensors[pw + 1], next_grad);
        } else {
            next_grad = grad;
            for (std::size_t i = 0; i < in.data.size(); ++i)
                if (in.data[i] <= 0.0) next_grad.data[i] = 0.0;
        }
        grad = std::move(next_grad);
    }
    res.input_grad = std::move(grad);
    return res;
}

BackwardResult backward(const NetworkSpec& spec, const ParamStore& params, const Tensor& input,
                        const Tensor& output_grad) {
    const auto trace = forward_traced(spec, params, input);
    return backward_from_trace(spec, params, trace, output_grad);
}

AdamState init_adam(const AdamConfig& cfg, const ParamStore& params) {
    AdamState st;
    st.cfg = cfg;
    st.m.names = params.names;
    st.v.names = params.names;
    for (const auto& t : params.tensors) {
        st.m.tensors.push_back(Tensor::zeros(t.shape));
        st.v.tensors.push_back(Tensor::zeros(t.shape));
    }
    return st;
}

void adam_step(AdamState& state, ParamStore& params, const ParamStore& grads) {
    if (grads.tensors.size() != params.tensors.size())
        throw std::invalid_argument("adam_step: gradient/parameter count mismatch");
    state.t += 1;
    const auto& cfg = state.cfg;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
        auto& p = params.tensors[ti].data;
        const auto& g = grads.tensors[ti].data;
        if (g.size() != p.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch at tensor " +
                                        std::to_string(ti));
        auto& m = state.m.tensors[ti].data;
        auto& v = state.v.tensors[ti].data;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_hat);
        }
    }
}

namespace {

using nlohmann::json;

json layer_to_json(const LayerSpec& layer) {
    if (const auto* d = std::get_if<DenseSpec>(&layer))
        return json{{"kind", "dense"}, {"in", d->in}, {"out", d->out}};
    if (const auto* c = std::get_if<ConvSameSpec>(&layer))
        return json{{"kind", "conv_same"}, {"kh", c->kh}, {"kw", c->kw}};
    return json{{"kind", "relu"}};
}

LayerSpec layer_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense") return DenseSpec{j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>()};
    if (kind == "conv_same")
        return ConvSameSpec{j.at("kh").get<std::size_t>(), j.at("kw").get<std::size_t>()};
    if (kind == "relu") return ReluSpec{};
    throw IoError("checkpoint: unknown layer kind '" + kind + "'");
}

void write_le_doubles(std::ofstream& out, const std::vector<double>& v) {
    for (double d : v) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        out.write(bytes, 8);
    }
}

std::vector<double> read_le_doubles(std::ifstream& in, std::size_t n, const std::string& path) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8))
            throw IoError("checkpoint: truncated data file " + path);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        v[i] = std::bit_cast<double>(bits);
    }
    return v;
}

} // namespace

void save_checkpoint(const std::string& base_path, const NetworkSpec& spec,
                     const ParamStore& params) {
    json manifest;
    manifest["format_version"] = 1;
    manifest["input_shape"] = spec.input_shape;
    manifest["layers"] = json::array();
    for (const auto& layer : spec.layers) manifest["layers"].push_back(layer_to_json(layer));
    manifest["tensors"] = json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        manifest["tensors"].push_back(json{{"name", params.names[i]},
                                           {"shape", params.tensors[i].shape},
                                           {"offset", offset}});
        offset += params.tensors[i].size() * 8;
    }
    manifest["data_file"] = base_path.substr(base_path.find_last_of('/') + 1) + ".bin";

    std::ofstream jout(base_path + ".json");
    if (!jout) throw IoError("cannot write checkpoint manifest " + base_path + ".json");
    jout << manifest.dump(2) << '\n';

    std::ofstream bout(base_path + ".bin", std::ios::binary);
    if (!bout) throw IoError("cannot write checkpoint data " + base_path + ".bin");
    for (const auto& t : params.tensors) write_le_doubles(bout, t.data);
    if (!bout) throw IoError("checkpoint write failed " + base_path + ".bin");
}

Checkpoint load_checkpoint(const std::string& base_path) {
    std::ifstream jin(base_path + ".json");
    if (!jin) throw IoError("cannot read checkpoint manifest " + base_path + ".json");
    json manifest;
    try {
        jin >> manifest;
    } catch (const json::exception& e) {
        throw IoError("checkpoint manifest parse error: " + std::string(e.what()));
    }

    Checkpoint ck;
    ck.spec.input_shape = manifest.at("input_shape").get<std::vector<std::size_t>>();
    for (const auto& jl : manifest.at("layers")) ck.spec.layers.push_back(layer_from_json(jl));

    std::ifstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot read checkpoint data " + base_path + ".bin");
    for (const auto& jt : manifest.at("tensors")) {
        ck.params.names.push_back(jt.at("name").get<std::string>());
        auto shape = jt.at("shape").get<std::vector<std::size_t>>();
        const std::size_t n = shape_size(shape);
        ck.params.tensors.emplace_back(std::move(shape), read_le_doubles(bin, n, base_path + ".bin"));
    }
    validate_network(ck.spec);
    return ck;
}

} // namespace endofair

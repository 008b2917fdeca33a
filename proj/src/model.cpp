#include "oralnet/model.hpp"

#include <numeric>

#include "oralnet/errors.hpp"

namespace oralnet {

namespace detail {
std::vector<Layer> resnet34_layers();
std::vector<Layer> mobilenet_v3_small_layers();
Dense classification_head();
}  // namespace detail

MacCount MacReport::total() const {
    MacCount sum;
    for (const auto& row : rows) sum += row.macs;
    return sum;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Tensor::Shape conv_shape(const ConvUnit& u, const Tensor::Shape& in) {
    if (in.size() != 3)
        throw ShapeError(u.name + ": expected C x H x W input, got " + shape_string(in));
    if (in[0] != u.spec.in_channels)
        throw ShapeError(u.name + ": input channels expected " +
                         std::to_string(u.spec.in_channels) + ", got " + std::to_string(in[0]));
    u.spec.validate();
    return {u.spec.out_channels, u.spec.output_extent(in[1], u.spec.kernel_h),
            u.spec.output_extent(in[2], u.spec.kernel_w)};
}

void require_same(const std::string& where, const Tensor::Shape& a, const Tensor::Shape& b) {
    if (a != b)
        throw ShapeError(where + ": shortcut shape " + shape_string(a) + " != branch shape " +
                         shape_string(b));
}

void conv_macs(const ConvUnit& u, const Tensor::Shape& in, MacReport& report) {
    const auto out = conv_shape(u, in);
    report.add(u.name, u.spec.macs(in[1], in[2]));
    // inference batch-norm is one multiply-add per element, counted even though folded
    if (!u.bn.empty()) report.add(u.bn, MacCount{shape_elements(out)});
}

Tensor run_conv(const ConvUnit& u, const Tensor& x, MacReport* report) {
    if (u.weight.empty()) throw UsageError(u.name + ": parameters not bound");
    auto [out, macs] = conv2d(x, u.weight, u.bias.data(), u.spec);
    if (report) {
        report->add(u.name, macs);
        if (!u.bn.empty()) report->add(u.bn, MacCount{out.size()});
    }
    activate_inplace(u.act, out);
    return out;
}

void conv_tensors(const ConvUnit& u, std::vector<std::pair<std::string, Tensor::Shape>>& out) {
    out.emplace_back(u.name + ".weight", u.spec.weight_shape());
    if (u.has_bias) out.emplace_back(u.name + ".bias", Tensor::Shape{u.spec.out_channels});
    if (!u.bn.empty()) {
        const Tensor::Shape c{u.spec.out_channels};
        out.emplace_back(u.bn + ".weight", c);
        out.emplace_back(u.bn + ".bias", c);
        out.emplace_back(u.bn + ".running_mean", c);
        out.emplace_back(u.bn + ".running_var", c);
    }
}

const Tensor& fetch(const WeightStore& store, const std::string& name, const Tensor::Shape& shape) {
    const Tensor& t = store.at(name);
    if (t.shape() != shape)
        throw ShapeError("tensor '" + name + "' has shape " + shape_string(t.shape()) +
                         ", expected " + shape_string(shape));
    return t;
}

void bind_conv(ConvUnit& u, const WeightStore& store) {
    const Tensor& w = fetch(store, u.name + ".weight", u.spec.weight_shape());
    const Tensor::Shape c{u.spec.out_channels};
    std::span<const float> bias;
    if (u.has_bias) bias = fetch(store, u.name + ".bias", c).data();
    if (u.bn.empty()) {
        u.weight = w;
        u.bias = bias.empty() ? Tensor() : Tensor(c, std::vector<float>(bias.begin(), bias.end()));
        return;
    }
    auto [fw, fb] = fold_batchnorm(w, bias, fetch(store, u.bn + ".weight", c).data(),
                                   fetch(store, u.bn + ".bias", c).data(),
                                   fetch(store, u.bn + ".running_mean", c).data(),
                                   fetch(store, u.bn + ".running_var", c).data(), u.bn_epsilon);
    u.weight = std::move(fw);
    u.bias = std::move(fb);
}

void bind_dense(Dense& d, const WeightStore& store) {
    d.weight = fetch(store, d.name + ".weight", {d.out_features, d.in_features});
    d.bias = fetch(store, d.name + ".bias", {d.out_features});
}

void bind_layer(Layer& layer, const WeightStore& store) {
    std::visit(overloaded{
                   [&](ConvUnit& u) { bind_conv(u, store); },
                   [&](BasicBlock& b) {
                       bind_conv(b.conv1, store);
                       bind_conv(b.conv2, store);
                       if (b.downsample) bind_conv(*b.downsample, store);
                   },
                   [&](InvertedResidual& r) {
                       if (r.expand) bind_conv(*r.expand, store);
                       bind_conv(r.depthwise, store);
                       if (r.se) {
                           bind_conv(r.se->fc1, store);
                           bind_conv(r.se->fc2, store);
                       }
                       bind_conv(r.project, store);
                   },
                   [](MaxPool&) {},
                   [](AvgPool&) {},
                   [&](Dense& d) { bind_dense(d, store); },
               },
               layer);
}

Tensor run_dense(const Dense& d, const Tensor& x, MacReport* report) {
    if (d.weight.empty()) throw UsageError(d.name + ": parameters not bound");
    auto [y, macs] = linear(x, d.weight, d.bias.data());
    if (report) report->add(d.name, macs);
    activate_inplace(d.act, y);
    return y;
}

}  // namespace

const std::string& layer_name(const Layer& layer) {
    return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer);
}

Tensor::Shape infer_shape(const Layer& layer, const Tensor::Shape& input) {
    return std::visit(
        overloaded{
            [&](const ConvUnit& u) { return conv_shape(u, input); },
            [&](const BasicBlock& b) {
                const auto branch = conv_shape(b.conv2, conv_shape(b.conv1, input));
                const auto shortcut = b.downsample ? conv_shape(*b.downsample, input) : input;
                require_same(b.name, shortcut, branch);
                return branch;
            },
            [&](const InvertedResidual& r) {
                auto s = r.expand ? conv_shape(*r.expand, input) : input;
                s = conv_shape(r.depthwise, s);
                if (r.se) {
                    const auto gate = conv_shape(r.se->fc2, conv_shape(r.se->fc1, {s[0], 1, 1}));
                    if (gate[0] != s[0])
                        throw ShapeError(r.se->name + ": gate width " + std::to_string(gate[0]) +
                                         " != channels " + std::to_string(s[0]));
                }
                s = conv_shape(r.project, s);
                if (r.residual) require_same(r.name, input, s);
                return s;
            },
            [&](const MaxPool& p) {
                if (input.size() != 3) throw ShapeError(p.name + ": expected C x H x W input");
                return Tensor::Shape{input[0], p.spec.output_extent(input[1]),
                                     p.spec.output_extent(input[2])};
            },
            [&](const AvgPool& p) {
                if (input.size() != 3 || input[1] * input[2] == 0)
                    throw ShapeError(p.name + ": expected nonempty C x H x W input");
                return Tensor::Shape{input[0], 1, 1};
            },
            [&](const Dense& d) {
                if (shape_elements(input) != d.in_features)
                    throw ShapeError(d.name + ": input length expected " +
                                     std::to_string(d.in_features) + ", got " +
                                     std::to_string(shape_elements(input)));
                return Tensor::Shape{d.out_features};
            },
        },
        layer);
}

void layer_macs(const Layer& layer, const Tensor::Shape& input, MacReport& report) {
    std::visit(overloaded{
                   [&](const ConvUnit& u) { conv_macs(u, input, report); },
                   [&](const BasicBlock& b) {
                       conv_macs(b.conv1, input, report);
                       conv_macs(b.conv2, conv_shape(b.conv1, input), report);
                       if (b.downsample) conv_macs(*b.downsample, input, report);
                   },
                   [&](const InvertedResidual& r) {
                       auto s = input;
                       if (r.expand) {
                           conv_macs(*r.expand, s, report);
                           s = conv_shape(*r.expand, s);
                       }
                       conv_macs(r.depthwise, s, report);
                       s = conv_shape(r.depthwise, s);
                       if (r.se) {
                           const Tensor::Shape pooled{s[0], 1, 1};
                           conv_macs(r.se->fc1, pooled, report);
                           conv_macs(r.se->fc2, conv_shape(r.se->fc1, pooled), report);
                       }
                       conv_macs(r.project, s, report);
                   },
                   [](const MaxPool&) {},
                   [](const AvgPool&) {},
                   [&](const Dense& d) {
                       report.add(d.name, MacCount{static_cast<std::uint64_t>(d.in_features) *
                                                   d.out_features});
                   },
               },
               layer);
}

void layer_tensors(const Layer& layer, std::vector<std::pair<std::string, Tensor::Shape>>& out) {
    std::visit(overloaded{
                   [&](const ConvUnit& u) { conv_tensors(u, out); },
                   [&](const BasicBlock& b) {
                       conv_tensors(b.conv1, out);
                       conv_tensors(b.conv2, out);
                       if (b.downsample) conv_tensors(*b.downsample, out);
                   },
                   [&](const InvertedResidual& r) {
                       if (r.expand) conv_tensors(*r.expand, out);
                       conv_tensors(r.depthwise, out);
                       if (r.se) {
                           conv_tensors(r.se->fc1, out);
                           conv_tensors(r.se->fc2, out);
                       }
                       conv_tensors(r.project, out);
                   },
                   [](const MaxPool&) {},
                   [](const AvgPool&) {},
                   [&](const Dense& d) {
                       out.emplace_back(d.name + ".weight",
                                        Tensor::Shape{d.out_features, d.in_features});
                       out.emplace_back(d.name + ".bias", Tensor::Shape{d.out_features});
                   },
               },
               layer);
}

Tensor run_layer(const Layer& layer, Tensor input, MacReport* report) {
    return std::visit(
        overloaded{
            [&](const ConvUnit& u) { return run_conv(u, input, report); },
            [&](const BasicBlock& b) {
                Tensor y = run_conv(b.conv2, run_conv(b.conv1, input, report), report);
                if (b.downsample)
                    add_inplace(y, run_conv(*b.downsample, input, report));
                else
                    add_inplace(y, input);
                activate_inplace(Activation::relu, y);
                return y;
            },
            [&](const InvertedResidual& r) {
                Tensor y = r.expand ? run_conv(*r.expand, input, report) : input;
                y = run_conv(r.depthwise, y, report);
                if (r.se) {
                    const Tensor gate =
                        run_conv(r.se->fc2, run_conv(r.se->fc1, global_avg_pool(y), report), report);
                    scale_channels_inplace(y, gate.data());
                }
                y = run_conv(r.project, y, report);
                if (r.residual) add_inplace(y, input);
                return y;
            },
            [&](const MaxPool& p) { return max_pool2d(input, p.spec); },
            [&](const AvgPool&) { return global_avg_pool(input); },
            [&](const Dense& d) { return run_dense(d, input, report); },
        },
        layer);
}

// ------------------------------------------------------------------ graph

void ModelGraph::bind_head(Tensor weight, Tensor bias) {
    if (weight.shape() != Tensor::Shape{kNumClasses, kFeatureDim})
        throw ShapeError("head.weight must be 2 x 1000, got " + shape_string(weight.shape()));
    if (bias.shape() != Tensor::Shape{kNumClasses})
        throw ShapeError("head.bias must have length 2, got " + shape_string(bias.shape()));
    if (!head_) head_ = detail::classification_head();
    head_->weight = std::move(weight);
    head_->bias = std::move(bias);
}

void ModelGraph::check_input(const Tensor& input) const {
    const Tensor::Shape expected{3, kInputSize, kInputSize};
    if (input.shape() != expected)
        throw ShapeError("model input must be " + shape_string(expected) + ", got " +
                         shape_string(input.shape()));
    if (!bound_) throw UsageError("model parameters are not bound");
}

Tensor ModelGraph::run_backbone(const Tensor& input, MacReport* report) const {
    check_input(input);
    Tensor x = input;
    for (const auto& layer : layers_) x = run_layer(layer, std::move(x), report);
    return x;
}

Tensor ModelGraph::backbone_features(const Tensor& input) const {
    return run_backbone(input, nullptr);
}

Tensor ModelGraph::head_logits(const Tensor& features) const {
    if (!has_head()) throw UsageError("model head is not bound");
    return run_dense(*head_, features, nullptr);
}

Tensor ModelGraph::forward(const Tensor& input) const {
    return head_logits(backbone_features(input));
}

std::pair<Tensor, MacReport> ModelGraph::forward_with_report(const Tensor& input) const {
    if (!has_head()) throw UsageError("model head is not bound");
    MacReport report;
    Tensor features = run_backbone(input, &report);
    Tensor logits = run_dense(*head_, features, &report);
    return {std::move(logits), std::move(report)};
}

MacReport ModelGraph::count_macs(const Tensor::Shape& input_shape) const {
    if (input_shape.size() != 3 || input_shape[0] != 3)
        throw ShapeError("count_macs: input shape must be 3 x H x W, got " +
                         shape_string(input_shape));
    MacReport report;
    Tensor::Shape shape = input_shape;
    for (const auto& layer : layers_) {
        layer_macs(layer, shape, report);
        shape = infer_shape(layer, shape);
    }
    const Dense head = head_ ? *head_ : detail::classification_head();
    layer_macs(head, shape, report);
    infer_shape(head, shape);
    return report;
}

ModelGraph describe_model(Architecture arch) {
    ModelGraph g;
    g.arch_ = arch;
    g.layers_ = arch == Architecture::resnet34 ? detail::resnet34_layers()
                                               : detail::mobilenet_v3_small_layers();
    g.head_ = detail::classification_head();
    std::vector<std::pair<std::string, Tensor::Shape>> tensors;
    for (const auto& layer : g.layers_) layer_tensors(layer, tensors);
    for (const auto& [name, shape] : tensors) {
        const bool running = name.ends_with(".running_mean") || name.ends_with(".running_var");
        if (!running) g.backbone_params_ += shape_elements(shape);
    }
    return g;
}

ModelGraph build_model(Architecture arch, const WeightStore& weights, const BuildOptions& options) {
    ModelGraph g = describe_model(arch);
    for (auto& layer : g.layers_) bind_layer(layer, weights);
    if (weights.contains("head.weight") || options.require_head) {
        Dense& head = *g.head_;
        bind_dense(head, weights);
    }
    // static end-to-end shape validation at the model's input resolution
    g.count_macs({3, kInputSize, kInputSize});
    g.bound_ = true;
    return g;
}

std::vector<std::pair<std::string, Tensor::Shape>> required_tensors(Architecture arch,
                                                                   bool include_head) {
    const ModelGraph g = describe_model(arch);
    std::vector<std::pair<std::string, Tensor::Shape>> out;
    for (const auto& layer : g.layers()) layer_tensors(layer, out);
    if (include_head) layer_tensors(*g.head(), out);
    return out;
}

}  // namespace oralnet

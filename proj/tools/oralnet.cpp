// oralnet: command-line front end for the calculus classification toolkit.

#include <CLI11.hpp>
#include <opencv2/core/version.hpp>

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oralnet/bench.hpp"
#include "oralnet/errors.hpp"
#include "oralnet/head_trainer.hpp"
#include "oralnet/image.hpp"
#include "oralnet/metrics.hpp"
#include "oralnet/model.hpp"
#include "oralnet/preprocess.hpp"
#include "oralnet/spectral.hpp"
#include "oralnet/weight_io.hpp"

#ifndef ORALNET_VERSION
#define ORALNET_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace oralnet;

namespace {

std::uint64_t fnv1a64_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

// Everything the header needs, collected while options are parsed.
struct RunContext {
    std::string command;
    std::optional<std::uint64_t> seed;
    std::vector<fs::path> inputs;

    void print_header(std::ostream& err) const {
        err << "# oralnet " << ORALNET_VERSION << " | opencv " << CV_VERSION << " | " << command;
        if (seed) err << " | seed " << *seed;
        err << '\n';
        for (const auto& p : inputs) {
            if (p.empty() || !fs::is_regular_file(p)) continue;
            err << "# fnv1a64 " << std::hex << std::setw(16) << std::setfill('0') << fnv1a64_file(p)
                << std::dec << std::setfill(' ') << "  " << p.string() << '\n';
        }
    }
};

BoundingBox parse_bbox(const std::string& text) {
    BoundingBox b;
    char c1 = 0, c2 = 0, c3 = 0;
    long long v[4] = {-1, -1, -1, -1};
    std::istringstream in(text);
    if (!(in >> v[0] >> c1 >> v[1] >> c2 >> v[2] >> c3 >> v[3]) || c1 != ',' || c2 != ',' ||
        c3 != ',' || !(in >> std::ws).eof() || v[0] < 0 || v[1] < 0 || v[2] <= 0 || v[3] <= 0)
        throw UsageError("--bbox expects x,y,w,h with non-negative origin and positive size");
    b.x = static_cast<std::size_t>(v[0]);
    b.y = static_cast<std::size_t>(v[1]);
    b.w = static_cast<std::size_t>(v[2]);
    b.h = static_cast<std::size_t>(v[3]);
    return b;
}

// stdout unless a path was given
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw IoError("cannot open '" + path + "' for writing");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
    void finish(const std::string& path) {
        stream().flush();
        if (!stream()) throw IoError("write failed: " + (path.empty() ? "<stdout>" : path));
    }

private:
    std::ofstream file_;
};

// --weights PATH | --synthetic-weights SEED
struct WeightSource {
    std::string path;
    std::optional<std::uint64_t> synthetic_seed;

    void add_options(CLI::App* cmd) {
        auto* w = cmd->add_option("--weights", path, "Backbone weights (.tkws)");
        auto* s = cmd->add_option("--synthetic-weights", synthetic_seed,
                                  "Use deterministic synthetic backbone weights from this seed");
        w->excludes(s);
        s->excludes(w);
    }
    void check() const {
        if (path.empty() && !synthetic_seed)
            throw UsageError("one of --weights or --synthetic-weights is required");
    }
    WeightStore load(Architecture arch) const {
        check();
        if (synthetic_seed) return synthesize_weights(arch, *synthetic_seed, false);
        return read_weights_file(path);
    }
    ModelGraph model(Architecture arch) const {
        BuildOptions opts;
        opts.require_head = false;
        return build_model(arch, load(arch), opts);
    }
};

std::optional<BoundingBox> optional_bbox(const std::string& text) {
    if (text.empty()) return std::nullopt;
    return parse_bbox(text);
}

std::vector<std::size_t> records_in_split(const DatasetManifest& m, const std::string& split) {
    std::vector<std::size_t> idx;
    const std::optional<SplitTag> want =
        split == "all" ? std::nullopt : std::optional<SplitTag>(parse_split_tag(split));
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        if (!want) {
            idx.push_back(i);
        } else {
            if (!m.records[i].split)
                throw DataError("manifest record " + std::to_string(i + 1) + " has no split; run `split` first");
            if (*m.records[i].split == *want) idx.push_back(i);
        }
    }
    if (idx.empty()) throw DataError("no manifest records in split '" + split + "'");
    return idx;
}

std::pair<std::vector<Tensor>, std::vector<Label>> load_inputs(const DatasetManifest& m,
                                                               const std::vector<std::size_t>& idx) {
    std::vector<Tensor> inputs;
    std::vector<Label> labels;
    inputs.reserve(idx.size());
    for (std::size_t i : idx) {
        inputs.push_back(load_model_input(m.records[i].path, m.records[i].box));
        labels.push_back(m.records[i].label);
    }
    return {std::move(inputs), std::move(labels)};
}

LogBase parse_log_base(const std::string& s) {
    if (s == "2") return LogBase::two;
    if (s == "e") return LogBase::e;
    throw UsageError("--log-base must be 2 or e");
}

std::string format_double(double v) {
    std::ostringstream o;
    o << std::setprecision(10) << v;
    return o.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calculus classification toolkit: preprocessing, inference, head training, metrics, "
                 "benchmarking and hyperspectral conversion"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ORALNET_VERSION);

    RunContext ctx;
    std::string arch_name, out_path;
    Architecture arch = Architecture::mobilenet_v3_small;
    auto add_arch = [&](CLI::App* cmd) {
        cmd->add_option("--arch", arch_name, "resnet34 | mobilenet_v3_small")->required();
    };
    auto add_out = [&](CLI::App* cmd, const std::string& help) {
        cmd->add_option("--out", out_path, help);
    };

    // macs
    auto* macs = app.add_subcommand("macs", "Per-layer MAC table for an architecture at 3x224x224");
    add_arch(macs);
    add_out(macs, "CSV output path (default stdout)");

    // preprocess
    std::string image_path, bbox_text;
    auto* pre = app.add_subcommand("preprocess", "Crop, letterbox and normalize one image into a .tkrt");
    pre->add_option("--image", image_path, "Input PNG/JPEG")->required();
    pre->add_option("--bbox", bbox_text, "Crop box x,y,w,h (default whole image)");
    pre->add_option("--out", out_path, "Output .tkrt")->required();
    std::string letterbox_png;
    pre->add_option("--letterbox-png", letterbox_png, "Also save the 640x640 letterboxed crop");

    // split
    std::string manifest_path;
    std::uint64_t seed = 0;
    auto* split = app.add_subcommand("split", "Seeded stratified 70/20/10 split of a manifest");
    split->add_option("--manifest", manifest_path, "CSV path,label,x,y,w,h")->required();
    split->add_option("--seed", seed, "Shuffle seed")->required();
    split->add_option("--out", out_path, "Output manifest with a split column")->required();

    // extract-features
    WeightSource weights;
    std::string split_name = "all";
    auto* extract = app.add_subcommand("extract-features", "Backbone features for manifest records");
    add_arch(extract);
    weights.add_options(extract);
    extract->add_option("--manifest", manifest_path, "Manifest (with split column unless --split all)")
        ->required();
    extract->add_option("--split", split_name, "train | val | test | all")->capture_default_str();
    extract->add_option("--out", out_path, "Output feature cache (.tkws)")->required();

    // train
    std::string train_path, val_path, checkpoint_path, log_base = "2";
    std::optional<std::size_t> epochs, batch;
    std::optional<double> lr;
    auto* train = app.add_subcommand("train", "Train the 2-way head on cached features with Adam");
    add_arch(train);
    train->add_option("--train", train_path, "Training feature cache")->required();
    train->add_option("--val", val_path, "Validation feature cache")->required();
    train->add_option("--seed", seed, "Initialization and shuffle seed")->required();
    train->add_option("--epochs", epochs, "Default: 30 (resnet34) / 50 (mobilenet_v3_small)");
    train->add_option("--batch-size", batch, "Default: 128 (resnet34) / 32 (mobilenet_v3_small)");
    train->add_option("--lr", lr, "Adam learning rate (default 1e-3)");
    train->add_option("--log-base", log_base, "Loss logarithm base: 2 | e")->capture_default_str();
    train->add_option("--checkpoint", checkpoint_path, "Best-validation head checkpoint (.tkws)")
        ->required();
    add_out(train, "Learning curves CSV (default stdout)");

    // evaluate
    std::string features_path, model_label;
    auto* eval = app.add_subcommand("evaluate", "Confusion matrix and metrics report");
    add_arch(eval);
    eval->add_option("--checkpoint", checkpoint_path, "Trained head checkpoint")->required();
    eval->add_option("--features", features_path, "Feature cache (fast path, no backbone)");
    weights.add_options(eval);
    eval->add_option("--manifest", manifest_path, "Manifest to run end to end");
    eval->add_option("--split", split_name, "train | val | test | all")->capture_default_str();
    eval->add_option("--model-name", model_label, "Value of the model column (default: arch)");
    add_out(eval, "Report CSV (default stdout)");

    // classify
    std::string input_path;
    auto* cls = app.add_subcommand("classify", "Classify one image or .tkrt tensor");
    add_arch(cls);
    weights.add_options(cls);
    cls->add_option("--checkpoint", checkpoint_path, "Trained head checkpoint")->required();
    cls->add_option("--input", input_path, "Image or .tkrt")->required();
    cls->add_option("--bbox", bbox_text, "Crop box x,y,w,h for image input");
    add_out(cls, "Result CSV (default stdout)");

    // bench
    std::size_t runs = kDefaultBenchRuns, warmup = kDefaultBenchWarmup;
    auto* bench = app.add_subcommand("bench", "Load time, forward latency, peak memory and MACs");
    add_arch(bench);
    weights.add_options(bench);
    bench->add_option("--input", input_path, "Image or .tkrt (default: zero tensor)");
    bench->add_option("--bbox", bbox_text, "Crop box x,y,w,h for image input");
    bench->add_option("--runs", runs, "Timed runs")->capture_default_str();
    bench->add_option("--warmup", warmup, "Untimed warmup runs")->capture_default_str();
    bool show_latencies = false;
    bench->add_flag("--latencies", show_latencies, "Append one latency_ms row per run");
    add_out(bench, "Report CSV (default stdout)");

    // spectral-convert
    std::string cube_path, illuminant = "d65";
    auto* spec = app.add_subcommand("spectral-convert", "Hyperspectral .tksc cube to an sRGB PNG");
    spec->add_option("--cube", cube_path, "Input cube (.tksc)")->required();
    spec->add_option("--illuminant", illuminant, "d65 | e")->capture_default_str();
    spec->add_option("--out", out_path, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        ctx.command = cmd->get_name();
        if (!arch_name.empty()) arch = parse_architecture(arch_name);
        if (weights.synthetic_seed) ctx.seed = weights.synthetic_seed;
        if (!weights.path.empty()) ctx.inputs.push_back(weights.path);

        if (cmd == macs) {
            ctx.print_header(std::cerr);
            const MacReport report = describe_model(arch).count_macs({3, kInputSize, kInputSize});
            Output out(out_path);
            out.stream() << "layer,macs\n";
            for (const auto& row : report.rows) out.stream() << row.name << ',' << row.macs.macs << '\n';
            out.stream() << "total," << report.total().macs << '\n';
            out.finish(out_path);
        } else if (cmd == pre) {
            ctx.inputs.push_back(image_path);
            ctx.print_header(std::cerr);
            const RgbImage image = load_image(image_path);
            const BoundingBox box =
                optional_bbox(bbox_text).value_or(BoundingBox{0, 0, image.width, image.height});
            const RgbImage boxed = letterbox(crop_bbox(image, box));
            if (!letterbox_png.empty()) save_png(boxed, letterbox_png);
            write_raw_tensor_file(preprocess_image(image, box), out_path);
        } else if (cmd == split) {
            ctx.seed = seed;
            ctx.inputs.push_back(manifest_path);
            ctx.print_header(std::cerr);
            DatasetManifest m = read_manifest(manifest_path);
            const SplitAssignment s = split_dataset(m, seed);
            for (auto i : s.train) m.records[i].split = SplitTag::train;
            for (auto i : s.validation) m.records[i].split = SplitTag::validation;
            for (auto i : s.test) m.records[i].split = SplitTag::test;
            write_manifest(m, out_path);
            std::cerr << "# split train " << s.train.size() << " val " << s.validation.size()
                      << " test " << s.test.size() << '\n';
        } else if (cmd == extract) {
            weights.check();
            ctx.inputs.push_back(manifest_path);
            ctx.print_header(std::cerr);
            const DatasetManifest m = read_manifest(manifest_path);
            const auto idx = records_in_split(m, split_name);
            const ModelGraph model = weights.model(arch);
            const auto [inputs, labels] = load_inputs(m, idx);
            save_feature_set(extract_features(model, inputs, labels), out_path);
        } else if (cmd == train) {
            ctx.seed = seed;
            ctx.inputs.push_back(train_path);
            ctx.inputs.push_back(val_path);
            ctx.print_header(std::cerr);
            TrainConfig cfg = TrainConfig::for_architecture(arch, seed);
            if (epochs) cfg.epochs = *epochs;
            if (batch) cfg.batch_size = *batch;
            if (lr) cfg.adam.learning_rate = *lr;
            cfg.log_base = parse_log_base(log_base);
            const TrainResult result = train_head(load_feature_set(train_path), load_feature_set(val_path), cfg);
            save_checkpoint(result.best, checkpoint_path);
            Output out(out_path);
            write_curves_csv(result.curves, out.stream());
            out.finish(out_path);
            std::cerr << "# best epoch " << result.best.epoch << " val_acc "
                      << format_double(result.best.val_accuracy) << '\n';
        } else if (cmd == eval) {
            ctx.inputs.push_back(checkpoint_path);
            if (!features_path.empty()) ctx.inputs.push_back(features_path);
            if (!manifest_path.empty()) ctx.inputs.push_back(manifest_path);
            if (features_path.empty() == manifest_path.empty())
                throw UsageError("evaluate needs exactly one of --features or --manifest");
            ctx.print_header(std::cerr);
            const MacCount total = describe_model(arch).count_macs({3, kInputSize, kInputSize}).total();
            Evaluation e;
            if (!features_path.empty()) {
                e = evaluate_features(load_checkpoint(checkpoint_path).head,
                                      load_feature_set(features_path), total);
            } else {
                weights.check();
                ModelGraph model = weights.model(arch);
                const Checkpoint ckpt = load_checkpoint(checkpoint_path);
                model.bind_head(ckpt.head.weight_tensor(), ckpt.head.bias_tensor());
                const DatasetManifest m = read_manifest(manifest_path);
                const auto [inputs, labels] = load_inputs(m, records_in_split(m, split_name));
                e = evaluate(model, inputs, labels);
            }
            Output out(out_path);
            out.stream() << report_csv_header() << '\n'
                         << report_csv_row(model_label.empty() ? arch_name : model_label, e.report, e.cm)
                         << '\n';
            out.finish(out_path);
        } else if (cmd == cls) {
            weights.check();
            ctx.inputs.push_back(checkpoint_path);
            ctx.inputs.push_back(input_path);
            ctx.print_header(std::cerr);
            if (!fs::exists(checkpoint_path)) throw IoError("checkpoint not found: " + checkpoint_path);
            ModelGraph model = weights.model(arch);
            const Checkpoint ckpt = load_checkpoint(checkpoint_path);
            model.bind_head(ckpt.head.weight_tensor(), ckpt.head.bias_tensor());
            const Classification c = classify(model, load_model_input(input_path, optional_bbox(bbox_text)));
            Output out(out_path);
            out.stream() << "label,p_no_calculus,p_calculus\n"
                         << label_name(c.label) << ',' << std::setprecision(9)
                         << c.probabilities[0] << ',' << c.probabilities[1] << '\n';
            out.finish(out_path);
        } else if (cmd == bench) {
            weights.check();
            if (!input_path.empty()) ctx.inputs.push_back(input_path);
            ctx.print_header(std::cerr);
            const Tensor input = input_path.empty()
                                     ? Tensor({3, kInputSize, kInputSize})
                                     : load_model_input(input_path, optional_bbox(bbox_text));
            fs::path weights_file = weights.path;
            fs::path scratch;
            if (weights.synthetic_seed) {
                // the load is part of what is timed, so synthetic weights go through a file too
                scratch = fs::temp_directory_path() /
                          ("oralnet-bench-" + std::to_string(::getpid()) + ".tkws");
                write_weights_file(synthesize_weights(arch, *weights.synthetic_seed, false), scratch);
                weights_file = scratch;
            }
            BenchReport report;
            try {
                report = bench_model(weights_file, arch, input, runs, warmup);
            } catch (...) {
                if (!scratch.empty()) fs::remove(scratch);
                throw;
            }
            if (!scratch.empty()) fs::remove(scratch);
            Output out(out_path);
            out.stream() << bench_csv_header() << '\n' << bench_csv_row(report) << '\n';
            if (show_latencies) {
                out.stream() << "run,latency_ms\n";
                for (std::size_t i = 0; i < report.latencies_ms.size(); ++i)
                    out.stream() << i << ',' << std::fixed << std::setprecision(3)
                                 << report.latencies_ms[i] << '\n';
            }
            out.finish(out_path);
        } else if (cmd == spec) {
            ctx.inputs.push_back(cube_path);
            ctx.print_header(std::cerr);
            const SpectralCube cube = read_cube_file(cube_path);
            save_png(cube_to_rgb(cube, cie1931_tables(parse_illuminant(illuminant))), out_path);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "oralnet: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "oralnet: " << e.what() << '\n';
        return 4;
    }
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oralnet/head_trainer.hpp"
#include "oralnet/kernels.hpp"
#include "oralnet/model.hpp"
#include "oralnet/preprocess.hpp"

namespace oralnet {

/// Positive class = calculus present.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    std::uint64_t positives() const noexcept { return tp + fn; }
    std::uint64_t negatives() const noexcept { return fp + tn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const Label> predictions, std::span<const Label> labels);

/// Ratios in [0, 1]. A ratio whose denominator is zero is reported as 0 and
/// its `*_defined` flag is cleared.
struct MetricsReport {
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    bool recall_defined = true;
    bool precision_defined = true;
    bool f1_defined = true;
    MacCount macs;
};

MetricsReport metrics_from_cm(const ConfusionMatrix& cm);

/// argmax of the two logits; a tie counts as calculus.
Label predict_label(float no_calculus_logit, float calculus_logit);

struct Evaluation {
    ConfusionMatrix cm;
    MetricsReport report;
    std::vector<Label> predictions;
};

/// Forward pass over every sample; report.macs comes from count_macs at 3 x 224 x 224.
Evaluation evaluate(const ModelGraph& model, std::span<const Tensor> inputs,
                    std::span<const Label> labels);

/// Same decision rule on cached backbone features with a trained head.
Evaluation evaluate_features(const HeadParams& head, const FeatureSet& data, MacCount macs = {});

/// "72.73" style rendering of a ratio as a percentage.
std::string format_percent(double ratio);

/// `model,accuracy,recall,f1,precision,macs,tp,fp,fn,tn`
std::string report_csv_header();
std::string report_csv_row(const std::string& model, const MetricsReport& report,
                           const ConfusionMatrix& cm);

}  // namespace oralnet

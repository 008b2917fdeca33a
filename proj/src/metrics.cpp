#include "oralnet/metrics.hpp"

#include <cstdio>

#include "oralnet/errors.hpp"

namespace oralnet {

ConfusionMatrix confusion_matrix(std::span<const Label> predictions, std::span<const Label> labels) {
    if (predictions.size() != labels.size())
        throw UsageError("confusion_matrix: " + std::to_string(predictions.size()) +
                         " predictions but " + std::to_string(labels.size()) + " labels");
    if (labels.empty()) throw UsageError("confusion_matrix: no samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = predictions[i] == Label::calculus;
        const bool actual = labels[i] == Label::calculus;
        if (predicted && actual) ++cm.tp;
        else if (predicted) ++cm.fp;
        else if (actual) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport metrics_from_cm(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UsageError("metrics_from_cm: empty confusion matrix");
    MetricsReport r;
    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    r.recall_defined = cm.tp + cm.fn > 0;
    r.recall = r.recall_defined ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : 0.0;
    r.precision_defined = cm.tp + cm.fp > 0;
    r.precision =
        r.precision_defined ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp) : 0.0;
    r.f1_defined = r.recall_defined && r.precision_defined && r.precision + r.recall > 0.0;
    r.f1 = r.f1_defined ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

Label predict_label(float no_calculus_logit, float calculus_logit) {
    return calculus_logit >= no_calculus_logit ? Label::calculus : Label::no_calculus;
}

Evaluation evaluate(const ModelGraph& model, std::span<const Tensor> inputs,
                    std::span<const Label> labels) {
    if (inputs.empty()) throw UsageError("evaluate: empty dataset");
    if (inputs.size() != labels.size()) throw UsageError("evaluate: inputs and labels differ in length");
    Evaluation e;
    for (const auto& x : inputs) {
        const Tensor z = model.forward(x);
        e.predictions.push_back(predict_label(z[0], z[1]));
    }
    e.cm = confusion_matrix(e.predictions, labels);
    e.report = metrics_from_cm(e.cm);
    e.report.macs = model.count_macs({3, kInputSize, kInputSize}).total();
    return e;
}

Evaluation evaluate_features(const HeadParams& head, const FeatureSet& data, MacCount macs) {
    if (data.rows() == 0) throw UsageError("evaluate: empty dataset");
    Evaluation e;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto z = head.logits(data.row(i));
        e.predictions.push_back(z[1] >= z[0] ? Label::calculus : Label::no_calculus);
    }
    e.cm = confusion_matrix(e.predictions, data.labels);
    e.report = metrics_from_cm(e.cm);
    e.report.macs = macs;
    return e;
}

std::string format_percent(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", ratio * 100.0);
    return buf;
}

std::string report_csv_header() { return "model,accuracy,recall,f1,precision,macs,tp,fp,fn,tn"; }

std::string report_csv_row(const std::string& model, const MetricsReport& r,
                           const ConfusionMatrix& cm) {
    return model + ',' + format_percent(r.accuracy) + ',' + format_percent(r.recall) + ',' +
           format_percent(r.f1) + ',' + format_percent(r.precision) + ',' +
           std::to_string(r.macs.macs) + ',' + std::to_string(cm.tp) + ',' + std::to_string(cm.fp) +
           ',' + std::to_string(cm.fn) + ',' + std::to_string(cm.tn);
}

}  // namespace oralnet

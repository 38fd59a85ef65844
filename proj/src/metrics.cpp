#include "mlpsd/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mlpsd/error.hpp"
#include "mlpsd/losses.hpp"

namespace mlpsd {

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ConfigError("average_precision: size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    if (hits == 0) return std::nullopt;
    return sum / static_cast<double>(hits);
}

namespace {

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

} // namespace

MetricsReport evaluate_probabilities(const Eigen::MatrixXd& probabilities, const LabelMatrix& labels, double threshold) {
    if (probabilities.rows() != labels.rows() || probabilities.cols() != labels.cols())
        throw ConfigError("evaluate: score and label shapes differ");
    const auto n = probabilities.rows();
    const auto m = probabilities.cols();
    MetricsReport rep;
    rep.threshold = threshold;
    rep.n_eval = static_cast<int>(n);
    rep.per_category_ap.resize(m);

    double ap_sum = 0.0, cp_sum = 0.0, cr_sum = 0.0;
    int defined = 0;
    long tp_all = 0, pred_all = 0, pos_all = 0;
    std::vector<double> scores(n);
    std::vector<std::uint8_t> truth(n);
    for (Eigen::Index c = 0; c < m; ++c) {
        long tp = 0, pred = 0, pos = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            scores[i] = probabilities(i, c);
            truth[i] = labels(i, c);
            const bool predicted = probabilities(i, c) >= threshold;
            pred += predicted;
            pos += truth[i] != 0;
            tp += predicted && truth[i];
        }
        tp_all += tp;
        pred_all += pred;
        pos_all += pos;
        rep.per_category_ap[c] = average_precision(scores, truth);
        if (!rep.per_category_ap[c]) {
            rep.skipped_categories.push_back(static_cast<int>(c));
            continue;
        }
        ++defined;
        ap_sum += *rep.per_category_ap[c];
        cp_sum += pred ? static_cast<double>(tp) / pred : 0.0;
        cr_sum += static_cast<double>(tp) / pos;
    }
    if (defined) {
        rep.map = ap_sum / defined;
        rep.cp = cp_sum / defined;
        rep.cr = cr_sum / defined;
    }
    rep.cf1 = f1(rep.cp, rep.cr);
    rep.op = pred_all ? static_cast<double>(tp_all) / pred_all : 0.0;
    rep.or_ = pos_all ? static_cast<double>(tp_all) / pos_all : 0.0;
    rep.of1 = f1(rep.op, rep.or_);
    return rep;
}

MetricsReport evaluate(const Model& model, const AnnotationSet& set, double threshold) {
    const int m = set.num_categories();
    if (model.config.output_dim != m) throw ConfigError("evaluate: model does not cover every category");
    std::vector<int> column(m, -1);
    for (int j = 0; j < m; ++j) {
        const int c = model.category_subset[j];
        if (c < 0 || c >= m || column[c] != -1) throw ConfigError("evaluate: model does not cover every category");
        column[c] = j;
    }
    const Eigen::MatrixXd logits = forward(model, set.feature_matrix());
    Eigen::MatrixXd probs(logits.rows(), m);
    for (int c = 0; c < m; ++c) probs.col(c) = logits.col(column[c]).unaryExpr([](double z) { return sigmoid(z); });
    return evaluate_probabilities(probs, set.label_matrix(), threshold);
}

Json report_to_json(const MetricsReport& report) {
    Json j;
    j["map"] = report.map;
    Json ap = Json::array();
    for (const auto& v : report.per_category_ap) ap.push_back(v ? Json(*v) : Json(nullptr));
    j["per_category_ap"] = std::move(ap);
    j["cp"] = report.cp;
    j["cr"] = report.cr;
    j["cf1"] = report.cf1;
    j["op"] = report.op;
    j["or"] = report.or_;
    j["of1"] = report.of1;
    j["threshold"] = report.threshold;
    j["n_eval"] = report.n_eval;
    j["skipped_categories"] = report.skipped_categories;
    return j;
}

} // namespace mlpsd

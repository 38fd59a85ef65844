#include "mlpsd/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mlpsd/error.hpp"
#include "mlpsd/json_util.hpp"

namespace mlpsd {

bool operator==(const Sample& a, const Sample& b) {
    return a.id == b.id && a.features.size() == b.features.size() && a.labels.size() == b.labels.size() &&
           a.features == b.features && a.labels == b.labels;
}

AnnotationSet::AnnotationSet(std::vector<std::string> categories, std::vector<Sample> samples, int feature_dim)
    : categories_(std::move(categories)), samples_(std::move(samples)), feature_dim_(feature_dim) {
    const auto m = static_cast<Eigen::Index>(categories_.size());
    if (m < 2) throw DataError("dataset needs at least 2 categories");
    if (feature_dim_ < 1) throw DataError("feature dimension must be positive");
    std::unordered_set<std::string> ids;
    for (const auto& s : samples_) {
        if (s.features.size() != feature_dim_)
            throw DataError("dimension mismatch: sample '" + s.id + "' has " + std::to_string(s.features.size()) +
                            " features, expected " + std::to_string(feature_dim_));
        if (s.labels.size() != m) throw DataError("dimension mismatch: sample '" + s.id + "' label vector length");
        if ((s.labels.array() > 1).any()) throw DataError("sample '" + s.id + "' has a non-binary label");
        if (!ids.insert(s.id).second) throw DataError("duplicate id '" + s.id + "'");
    }
}

Eigen::MatrixXd AnnotationSet::feature_matrix() const {
    Eigen::MatrixXd x(num_samples(), feature_dim_);
    for (int i = 0; i < num_samples(); ++i) x.row(i) = samples_[i].features.transpose();
    return x;
}

LabelMatrix AnnotationSet::label_matrix() const {
    LabelMatrix y(num_samples(), num_categories());
    for (int i = 0; i < num_samples(); ++i) y.row(i) = samples_[i].labels.transpose();
    return y;
}

AnnotationSet AnnotationSet::select(const IndexList& sample_indices) const {
    std::vector<Sample> picked;
    picked.reserve(sample_indices.size());
    for (int i : sample_indices) picked.push_back(sample(i));
    return AnnotationSet(categories_, std::move(picked), feature_dim_);
}

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

} // namespace

AnnotationSet load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) fail(path, 1, "malformed header: file is empty");
    Json header;
    try {
        header = Json::parse(line);
    } catch (const Json::exception&) {
        fail(path, 1, "malformed header: not JSON");
    }
    if (!header.is_object() || header.value("schema", "") != kDatasetSchema || !header.contains("m") ||
        !header["m"].is_number_integer() || !header.contains("d") || !header["d"].is_number_integer() ||
        !header.contains("names") || !header["names"].is_array())
        fail(path, 1, "malformed header");
    const int m = header["m"].get<int>();
    const int d = header["d"].get<int>();
    if (m < 2 || d < 1 || static_cast<int>(header["names"].size()) != m) fail(path, 1, "malformed header");
    std::vector<std::string> names;
    for (const auto& n : header["names"]) {
        if (!n.is_string()) fail(path, 1, "malformed header: category names must be strings");
        names.push_back(n.get<std::string>());
    }

    std::vector<Sample> samples;
    std::unordered_set<std::string> ids;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Json row;
        try {
            row = Json::parse(line);
        } catch (const Json::exception&) {
            fail(path, lineno, "malformed row: not JSON");
        }
        if (!row.is_object() || !row.contains("id") || !row["id"].is_string() || !row.contains("x") ||
            !row["x"].is_array() || !row.contains("y") || !row["y"].is_array())
            fail(path, lineno, "malformed row");
        Sample s;
        s.id = row["id"].get<std::string>();
        if (!ids.insert(s.id).second) fail(path, lineno, "duplicate id '" + s.id + "'");
        if (static_cast<int>(row["x"].size()) != d)
            fail(path, lineno, "dimension mismatch: expected " + std::to_string(d) + " features");
        s.features.resize(d);
        for (int k = 0; k < d; ++k) {
            const auto& v = row["x"][k];
            if (!v.is_number()) fail(path, lineno, "non-finite feature value");
            s.features(k) = v.get<double>();
            if (!std::isfinite(s.features(k))) fail(path, lineno, "non-finite feature value");
        }
        s.labels = LabelVector::Zero(m);
        for (const auto& v : row["y"]) {
            if (!v.is_number_integer()) fail(path, lineno, "malformed row: label indices must be integers");
            const auto c = v.get<long long>();
            if (c < 0 || c >= m) fail(path, lineno, "label index out of range");
            if (s.labels(c)) fail(path, lineno, "malformed row: repeated label index");
            s.labels(c) = 1;
        }
        samples.push_back(std::move(s));
    }
    return AnnotationSet(std::move(names), std::move(samples), d);
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    for (const auto& s : set.samples())
        if (!s.features.allFinite()) throw DataError("non-finite feature value in sample '" + s.id + "'");

    std::string text;
    Json header;
    header["schema"] = kDatasetSchema;
    header["m"] = set.num_categories();
    header["d"] = set.feature_dim();
    header["names"] = set.categories();
    text += dump_json(header);
    text += '\n';
    for (const auto& s : set.samples()) {
        Json row;
        row["id"] = s.id;
        Json x = Json::array();
        for (Eigen::Index k = 0; k < s.features.size(); ++k) x.push_back(s.features(k));
        row["x"] = std::move(x);
        Json y = Json::array();
        for (Eigen::Index c = 0; c < s.labels.size(); ++c)
            if (s.labels(c)) y.push_back(static_cast<int>(c));
        row["y"] = std::move(y);
        text += dump_json(row);
        text += '\n';
    }
    write_text_file(path, text);
}

} // namespace mlpsd

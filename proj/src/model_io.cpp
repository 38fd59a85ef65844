#include "mlpsd/model.hpp"

namespace mlpsd {

Json model_config_to_json(const ModelConfig& config) {
    Json j;
    j["input_dim"] = config.input_dim;
    j["hidden_dims"] = config.hidden_dims;
    j["output_dim"] = config.output_dim;
    j["init_seed"] = config.init_seed;
    return j;
}

ModelConfig model_config_from_json(const Json& j) {
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<int>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    c.output_dim = j.at("output_dim").get<int>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    c.validate();
    return c;
}

Json model_to_json(const Model& model) {
    Json j;
    j["schema"] = kModelSchema;
    j["config"] = model_config_to_json(model.config);
    j["category_subset"] = model.category_subset;
    Json layers = Json::array();
    for (const auto& layer : model.layers) {
        Json l;
        l["w"] = matrix_to_json(layer.weight);
        l["b"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    return j;
}

Model model_from_json(const Json& j) {
    if (!j.is_object() || j.value("schema", "") != kModelSchema) throw DataError("not a model checkpoint");
    Model model;
    try {
        model.config = model_config_from_json(j.at("config"));
        model.category_subset = j.at("category_subset").get<IndexList>();
        const auto widths = model.config.widths();
        const auto& layers = j.at("layers");
        if (layers.size() + 1 != widths.size()) throw DataError("checkpoint layer count does not match config");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            DenseLayer<double> layer;
            layer.weight = matrix_from_json(layers[l].at("w"));
            const auto b = layers[l].at("b").get<std::vector<double>>();
            layer.bias = Eigen::Map<const Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
            if (layer.weight.rows() != widths[l] || layer.weight.cols() != widths[l + 1] ||
                layer.bias.size() != widths[l + 1])
                throw DataError("checkpoint layer " + std::to_string(l) + " has the wrong shape");
            model.layers.push_back(std::move(layer));
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
    if (static_cast<int>(model.category_subset.size()) != model.config.output_dim)
        throw DataError("checkpoint category subset does not match output_dim");
    return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    write_text_file(path, dump_json(model_to_json(model)) + "\n");
}

Model load_model(const std::filesystem::path& path) {
    return model_from_json(read_json_file(path));
}

} // namespace mlpsd

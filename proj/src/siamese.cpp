#include "ostb/siamese.hpp"

namespace ostb {

using nlohmann::json;

std::string to_string(Architecture a) { return a == Architecture::Conv ? "conv" : "residual"; }

Architecture architecture_from_string(const std::string& s) {
    if (s == "conv") return Architecture::Conv;
    if (s == "residual") return Architecture::Residual;
    throw ConfigError("unknown architecture '" + s + "' (expected conv|residual)");
}

void ConvSiameseConfig::validate() const {
    if (input_side < 16) throw ConfigError("ConvSiameseConfig: input_side too small");
    if (input_channels != 3) throw ConfigError("ConvSiameseConfig: input must have 3 channels");
    if (conv_blocks.empty()) throw ConfigError("ConvSiameseConfig: need at least one conv block");
    if (pool_after.size() != conv_blocks.size())
        throw ConfigError("ConvSiameseConfig: pool_after must match conv_blocks");
    if (conv_blocks.front().first != 10)
        throw ConfigError("ConvSiameseConfig: first kernel must be 10");
    for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
        const auto [k, ch] = conv_blocks[i];
        if (ch <= 0 || ch % 16 != 0)
            throw ConfigError("ConvSiameseConfig: channel count " + std::to_string(ch) +
                              " must be a positive multiple of 16");
        if (i > 0) {
            const int prev = conv_blocks[i - 1].first;
            if (k != prev - 3 && k != prev)
                throw ConfigError("ConvSiameseConfig: kernel sizes must step down by 3 (or repeat), got " +
                                  std::to_string(prev) + " -> " + std::to_string(k));
        }
        if (k < 1) throw ConfigError("ConvSiameseConfig: kernel size must be >= 1");
    }
    if (embedding_dim <= 0) throw ConfigError("ConvSiameseConfig: embedding_dim must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("ConvSiameseConfig: dropout_rate must be in [0,1)");
}

json ConvSiameseConfig::to_json() const {
    json j;
    j["arch"] = "conv";
    j["input_side"] = input_side;
    j["input_channels"] = input_channels;
    j["conv_blocks"] = conv_blocks;
    j["pool_after"] = pool_after;
    j["embedding_dim"] = embedding_dim;
    j["dropout_rate"] = dropout_rate;
    return j;
}

ConvSiameseConfig ConvSiameseConfig::from_json(const json& j) {
    ConvSiameseConfig c;
    c.input_side = j.at("input_side").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.conv_blocks = j.at("conv_blocks").get<std::vector<std::pair<int, int>>>();
    c.pool_after = j.at("pool_after").get<std::vector<bool>>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    return c;
}

ConvSiameseConfig desk_conv_config(int input_side) {
    ConvSiameseConfig c;
    c.input_side = input_side;
    c.conv_blocks = {{10, 16}, {7, 16}, {4, 16}};
    c.pool_after = {true, true, false};
    c.embedding_dim = 256;
    c.dropout_rate = 0.1;
    return c;
}

void ResidualSiameseConfig::validate() const {
    if (input_side < 16) throw ConfigError("ResidualSiameseConfig: input_side too small");
    if (input_channels != 3) throw ConfigError("ResidualSiameseConfig: input must have 3 channels");
    if (stem.first < 1 || stem.second < 1) throw ConfigError("ResidualSiameseConfig: bad stem");
    if (stages.empty()) throw ConfigError("ResidualSiameseConfig: need at least one stage");
    for (const auto& s : stages) {
        if (s.channels <= 0 || s.count <= 0) throw ConfigError("ResidualSiameseConfig: bad stage");
    }
    if (embedding_dim <= 0) throw ConfigError("ResidualSiameseConfig: embedding_dim must be positive");
    if (param_budget.first <= 0 || param_budget.second < param_budget.first)
        throw ConfigError("ResidualSiameseConfig: bad parameter budget");
}

json ResidualSiameseConfig::to_json() const {
    json j;
    j["arch"] = "residual";
    j["input_side"] = input_side;
    j["input_channels"] = input_channels;
    j["stem"] = stem;
    json st = json::array();
    for (const auto& s : stages)
        st.push_back({s.kind == Stage::Kind::Conv ? "conv" : "identity", s.channels, s.count});
    j["stages"] = st;
    j["embedding_dim"] = embedding_dim;
    j["param_budget"] = param_budget;
    return j;
}

ResidualSiameseConfig ResidualSiameseConfig::from_json(const json& j) {
    ResidualSiameseConfig c;
    c.input_side = j.at("input_side").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.stem = j.at("stem").get<std::pair<int, int>>();
    c.stages.clear();
    for (const auto& s : j.at("stages")) {
        Stage stage;
        const std::string kind = s.at(0).get<std::string>();
        if (kind == "conv")
            stage.kind = Stage::Kind::Conv;
        else if (kind == "identity")
            stage.kind = Stage::Kind::Identity;
        else
            throw ConfigError("ResidualSiameseConfig: unknown block kind '" + kind + "'");
        stage.channels = s.at(1).get<int>();
        stage.count = s.at(2).get<int>();
        c.stages.push_back(stage);
    }
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.param_budget = j.at("param_budget").get<std::pair<double, double>>();
    return c;
}

ResidualSiameseConfig desk_residual_config(int input_side) {
    using Stage = ResidualSiameseConfig::Stage;
    ResidualSiameseConfig c;
    c.input_side = input_side;
    c.stem = {5, 8};
    c.stages = {{Stage::Kind::Conv, 8, 1}, {Stage::Kind::Identity, 8, 1}, {Stage::Kind::Conv, 16, 1}};
    c.embedding_dim = 256;
    c.param_budget = {1e4, 1e6};
    return c;
}

}  // namespace ostb

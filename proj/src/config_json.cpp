#include "fan/config_json.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace fan {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument(std::string(what) + ": unknown key '" + it.key() + "'");
}

} // namespace

json model_config_to_json(const ModelConfig& c) {
    return json{{"depth", c.depth},       {"dim", c.dim},
                {"heads", c.heads},       {"patch", c.patch},
                {"mlp_ratio", c.mlp_ratio}, {"kind", to_string(c.kind)},
                {"num_classes", c.num_classes}, {"image_size", c.image_size},
                {"in_channels", c.in_channels}};
}

ModelConfig model_config_from_json(const json& j) {
    reject_unknown(j, {"depth", "dim", "heads", "patch", "mlp_ratio", "kind",
                       "num_classes", "image_size", "in_channels"},
                   "model config");
    ModelConfig c;
    if (j.contains("depth")) c.depth = j.at("depth").get<size_t>();
    if (j.contains("dim")) c.dim = j.at("dim").get<size_t>();
    if (j.contains("heads")) c.heads = j.at("heads").get<size_t>();
    if (j.contains("patch")) c.patch = j.at("patch").get<size_t>();
    if (j.contains("mlp_ratio")) c.mlp_ratio = j.at("mlp_ratio").get<size_t>();
    if (j.contains("kind")) c.kind = block_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<size_t>();
    if (j.contains("image_size")) c.image_size = j.at("image_size").get<size_t>();
    if (j.contains("in_channels")) c.in_channels = j.at("in_channels").get<size_t>();
    c.validate();
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"warmup_epochs", c.warmup_epochs},
                {"cosine", c.cosine},
                {"seed", c.seed},
                {"label_smoothing", c.label_smoothing},
                {"precision", c.precision == Precision::F32 ? "f32" : "f64"},
                {"early_stop_acc", c.early_stop_acc}};
}

TrainConfig train_config_from_json(const json& j) {
    reject_unknown(j, {"lr", "weight_decay", "epochs", "batch_size", "warmup_epochs",
                       "cosine", "seed", "label_smoothing", "precision", "early_stop_acc"},
                   "train config");
    TrainConfig c;
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<size_t>();
    if (j.contains("warmup_epochs")) c.warmup_epochs = j.at("warmup_epochs").get<size_t>();
    if (j.contains("cosine")) c.cosine = j.at("cosine").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("label_smoothing")) c.label_smoothing = j.at("label_smoothing").get<double>();
    if (j.contains("precision")) {
        std::string p = j.at("precision").get<std::string>();
        if (p == "f32") c.precision = Precision::F32;
        else if (p == "f64") c.precision = Precision::F64;
        else throw std::invalid_argument("train config: precision must be f32 or f64");
    }
    if (j.contains("early_stop_acc")) c.early_stop_acc = j.at("early_stop_acc").get<double>();
    c.validate();
    return c;
}

std::string config_hash(const json& j) {
    std::string s = j.dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : s) {
        h ^= static_cast<uint8_t>(ch);
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

} // namespace fan

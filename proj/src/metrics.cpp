#include "fan/metrics.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fan/train.hpp"

namespace fan {

double retention(double clean_acc, double robust_acc) {
    if (clean_acc <= 0.0)
        throw std::invalid_argument("retention: clean accuracy must be > 0");
    return robust_acc / clean_acc;
}

double mce(const ErrorGrid& model_errors, const ErrorGrid& baseline_errors) {
    if (model_errors.size() != baseline_errors.size())
        throw std::invalid_argument("mce: grids differ in size");
    std::set<CorruptionKind> kinds;
    for (const auto& [key, _] : model_errors) {
        if (!baseline_errors.count(key))
            throw std::invalid_argument("mce: grids differ at kind " + to_string(key.first) +
                                        " severity " + std::to_string(key.second));
        kinds.insert(key.first);
    }
    double total = 0.0;
    for (CorruptionKind k : kinds) {
        double em = 0.0, eb = 0.0;
        for (const auto& [key, e] : model_errors)
            if (key.first == k) em += e;
        for (const auto& [key, e] : baseline_errors)
            if (key.first == k) eb += e;
        if (eb <= 0.0)
            throw std::runtime_error("mce: baseline has zero total error for kind " +
                                     to_string(k) + ", CE undefined");
        total += em / eb;
    }
    return 100.0 * total / static_cast<double>(kinds.size());
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["model_id"] = model_id;
    j["baseline_id"] = baseline_id;
    j["clean_acc"] = clean_acc;
    j["robust_acc"] = robust_acc;
    j["retention"] = retention;
    j["mce"] = mce;
    j["errors"] = nlohmann::json::array();
    for (const auto& [key, e] : errors)
        j["errors"].push_back({{"kind", to_string(key.first)},
                               {"severity", key.second},
                               {"error", e}});
    return j.dump(2);
}

std::string EvalReport::csv_header() {
    return "model_id,baseline_id,clean_acc,robust_acc,retention,mce";
}

std::string EvalReport::to_csv_row() const {
    std::ostringstream os;
    os << model_id << "," << baseline_id << "," << clean_acc << "," << robust_acc << ","
       << retention << "," << mce;
    return os.str();
}

EvalReport evaluate_robustness(const Model& model, const std::vector<Tensor>& params,
                               const ShapesDataset& ds,
                               const std::vector<CorruptionKind>& kinds,
                               const std::vector<int>& severities, uint64_t corruption_seed,
                               const std::string& model_id, const SeverityLadders& ladders) {
    EvalReport rep;
    rep.model_id = model_id;
    rep.clean_acc = evaluate(model, params, ds);

    double acc_sum = 0.0;
    for (CorruptionKind k : kinds)
        for (int sev : severities) {
            size_t correct = 0;
            for (size_t i = 0; i < ds.size(); ++i) {
                CorruptionSpec spec{k, sev, corruption_seed, i};
                Tensor img = corrupt(ds.images[i], spec, ladders);
                if (model.predict(params, img) == ds.labels[i]) correct++;
            }
            double acc = static_cast<double>(correct) / static_cast<double>(ds.size());
            rep.errors[{k, sev}] = 1.0 - acc;
            acc_sum += acc;
        }
    rep.robust_acc = acc_sum / static_cast<double>(kinds.size() * severities.size());
    rep.retention = retention(rep.clean_acc, rep.robust_acc);
    return rep;
}

std::vector<EvalReport> robustness_suite(const std::vector<NamedCheckpoint>& checkpoints,
                                         const ShapesDataset& ds,
                                         const std::vector<CorruptionKind>& kinds,
                                         const std::vector<int>& severities,
                                         uint64_t corruption_seed, size_t baseline_index,
                                         const SeverityLadders& ladders) {
    if (baseline_index >= checkpoints.size())
        throw std::invalid_argument("robustness_suite: bad baseline index");
    std::vector<EvalReport> reports;
    for (const auto& ck : checkpoints)
        reports.push_back(evaluate_robustness(*ck.model, *ck.params, ds, kinds, severities,
                                              corruption_seed, ck.id, ladders));
    const ErrorGrid& base = reports[baseline_index].errors;
    for (auto& rep : reports) {
        rep.baseline_id = checkpoints[baseline_index].id;
        rep.mce = mce(rep.errors, base);
    }
    return reports;
}

} // namespace fan

#include "osfuse/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "osfuse/errors.hpp"

namespace osf::cli {

using nlohmann::json;

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            try {
                field = j.at(key).get<std::decay_t<decltype(field)>>();
            } catch (const json::exception& e) {
                throw InputError(std::string("config: field `") + key + "`: " + e.what());
            }
        }
    };
    get("filter", c.filter);
    get("alpha_init", c.alpha_init);
    get("scan", c.scan);
    get("hilbert_direction", c.hilbert_direction);
    get("state_dim", c.state_dim);
    get("area_k", c.area_k);
    get("area_axis", c.area_axis);
    get("head_dim", c.head_dim);
    get("levels", c.levels);
    get("seed", c.seed);
    get("epochs", c.epochs);
    get("lr", c.lr);
    get("momentum", c.momentum);
    get("batch", c.batch);
    get("train_pairs", c.train_pairs);
    get("test_pairs", c.test_pairs);
    get("occlusion_rate", c.occlusion_rate);
    get("speckle", c.speckle);
    get("image_size", c.image_size);
    get("channels", c.channels);
    for (auto& [key, value] : j.items()) {
        static const char* known[] = {
            "filter",     "alpha_init", "scan",        "hilbert_direction", "state_dim",
            "area_k",     "area_axis",  "head_dim",    "levels",            "seed",
            "epochs",     "lr",         "momentum",    "batch",             "train_pairs",
            "test_pairs", "occlusion_rate", "speckle", "image_size",        "channels"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw InputError("config: unknown field `" + key + "`");
    }
    return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw InputError("cannot open config file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return from_json_text(buf.str());
}

std::string RunConfig::to_json() const {
    json j;
    j["filter"] = filter;
    j["alpha_init"] = alpha_init;
    j["scan"] = scan;
    j["hilbert_direction"] = hilbert_direction;
    j["state_dim"] = state_dim;
    j["area_k"] = area_k;
    j["area_axis"] = area_axis;
    j["head_dim"] = head_dim;
    j["levels"] = levels;
    j["seed"] = seed;
    j["epochs"] = epochs;
    j["lr"] = lr;
    j["momentum"] = momentum;
    j["batch"] = batch;
    j["train_pairs"] = train_pairs;
    j["test_pairs"] = test_pairs;
    j["occlusion_rate"] = occlusion_rate;
    j["speckle"] = speckle;
    j["image_size"] = image_size;
    j["channels"] = channels;
    return j.dump(2) + "\n";
}

toy::ToyConfig RunConfig::to_toy() const {
    toy::ToyConfig t;
    t.filter = filters::filter_kind_from_string(filter);
    t.alpha_init = alpha_init;
    t.cmim.kind = scan::scan_kind_from_string(scan);
    t.cmim.hilbert_direction = hilbert_direction;
    t.cmim.state_dim = state_dim;
    t.cmim.levels = levels;
    t.area.k = area_k;
    if (area_axis == "horizontal")
        t.area.axis = afm::Axis::Horizontal;
    else if (area_axis == "vertical")
        t.area.axis = afm::Axis::Vertical;
    else
        throw InputError("config: area_axis must be `horizontal` or `vertical`, got `" +
                         area_axis + "`");
    t.area.head_dim = head_dim;
    t.seed = seed;
    t.epochs = epochs;
    t.lr = lr;
    t.momentum = momentum;
    t.batch = batch;
    t.train_pairs = train_pairs;
    t.test_pairs = test_pairs;
    t.occlusion_rate = occlusion_rate;
    t.speckle = speckle;
    t.image_size = image_size;
    t.channels = channels;
    t.cmim.validate();
    t.area.validate();
    return t;
}

}  // namespace osf::cli

#include "experiment_config.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cloudcluster {
namespace {

using ordered_json = nlohmann::ordered_json;

int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

template <typename T>
T field_as(const ordered_json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

void check_positive(double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string("config key '") + key + "' must be positive");
}

} // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.size_grid.resize(100);
    std::iota(cfg.size_grid.begin(), cfg.size_grid.end(), 1);
    cfg.p_com_values = {0.05, 0.25, 0.5};
    for (int i = 1; i <= 10; ++i) cfg.p_com_grid.push_back(i * 0.05);
    cfg.cluster_grid = {1, 2, 4, 5, 10, 20, 25, 50};
    return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config parse error near line " + std::to_string(line_of_offset(text, e.byte)) +
                          ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    ExperimentConfig cfg = default_config();
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key == "sensors") cfg.sensors = field_as<int>(j, key);
        else if (key == "clusters") cfg.clusters = field_as<int>(j, key);
        else if (key == "p1") cfg.p1 = field_as<double>(j, key);
        else if (key == "loss_fa") cfg.loss_fa = field_as<double>(j, key);
        else if (key == "loss_md") cfg.loss_md = field_as<double>(j, key);
        else if (key == "p_fa") cfg.p_fa = field_as<double>(j, key);
        else if (key == "p_md") cfg.p_md = field_as<double>(j, key);
        else if (key == "p_com") cfg.p_com = field_as<double>(j, key);
        else if (key == "m_s") cfg.m_s = field_as<int>(j, key);
        else if (key == "m_c") cfg.m_c = field_as<int>(j, key);
        else if (key == "r_gamma") cfg.r_gamma = field_as<int>(j, key);
        else if (key == "r_p") cfg.r_p = field_as<int>(j, key);
        else if (key == "delta_gamma_tol") cfg.delta_gamma_tol = field_as<double>(j, key);
        else if (key == "delta_p_tol") cfg.delta_p_tol = field_as<double>(j, key);
        else if (key == "max_iters") cfg.max_iters = field_as<int>(j, key);
        else if (key == "init_scheme") cfg.init_scheme = field_as<std::string>(j, key);
        else if (key == "het_dev_fa") cfg.het_dev_fa = field_as<double>(j, key);
        else if (key == "het_dev_md") cfg.het_dev_md = field_as<double>(j, key);
        else if (key == "realizations") cfg.realizations = field_as<int>(j, key);
        else if (key == "trials") cfg.trials = field_as<std::uint64_t>(j, key);
        else if (key == "seed") cfg.seed = field_as<std::uint64_t>(j, key);
        else if (key == "size_grid") cfg.size_grid = field_as<std::vector<int>>(j, key);
        else if (key == "p_com_values") cfg.p_com_values = field_as<std::vector<double>>(j, key);
        else if (key == "p_com_grid") cfg.p_com_grid = field_as<std::vector<double>>(j, key);
        else if (key == "cluster_grid") cfg.cluster_grid = field_as<std::vector<int>>(j, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
    ordered_json j;
    j["sensors"] = cfg.sensors;
    j["clusters"] = cfg.clusters;
    j["p1"] = cfg.p1;
    j["loss_fa"] = cfg.loss_fa;
    j["loss_md"] = cfg.loss_md;
    j["p_fa"] = cfg.p_fa;
    j["p_md"] = cfg.p_md;
    j["p_com"] = cfg.p_com;
    j["m_s"] = cfg.m_s;
    j["m_c"] = cfg.m_c;
    j["r_gamma"] = cfg.r_gamma;
    j["r_p"] = cfg.r_p;
    j["delta_gamma_tol"] = cfg.delta_gamma_tol;
    j["delta_p_tol"] = cfg.delta_p_tol;
    j["max_iters"] = cfg.max_iters;
    j["init_scheme"] = cfg.init_scheme;
    j["het_dev_fa"] = cfg.het_dev_fa;
    j["het_dev_md"] = cfg.het_dev_md;
    j["realizations"] = cfg.realizations;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["size_grid"] = cfg.size_grid;
    j["p_com_values"] = cfg.p_com_values;
    j["p_com_grid"] = cfg.p_com_grid;
    j["cluster_grid"] = cfg.cluster_grid;
    return j.dump(2) + "\n";
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.sensors < 1) throw ConfigError("config key 'sensors' must be at least 1");
    if (cfg.clusters < 1) throw ConfigError("config key 'clusters' must be at least 1");
    if (cfg.clusters > cfg.sensors)
        throw ConfigError("config key 'clusters' cannot exceed 'sensors'");
    if (!(cfg.p1 > 0.0 && cfg.p1 < 1.0)) throw ConfigError("config key 'p1' must lie in (0, 1)");
    check_positive(cfg.loss_fa, "loss_fa");
    check_positive(cfg.loss_md, "loss_md");
    if (!(cfg.p_fa > 0.0 && cfg.p_fa < 0.5))
        throw ConfigError("config key 'p_fa' must lie in (0, 0.5)");
    if (!(cfg.p_md > 0.0 && cfg.p_md < 0.5))
        throw ConfigError("config key 'p_md' must lie in (0, 0.5)");
    if (!(cfg.p_com >= 0.0 && cfg.p_com <= 1.0))
        throw ConfigError("config key 'p_com' must lie in [0, 1]");
    if (cfg.m_s < 0 || cfg.m_c < 0) throw ConfigError("config keys 'm_s'/'m_c' must be nonnegative");
    if (cfg.r_gamma < 1) throw ConfigError("config key 'r_gamma' must be at least 1");
    if (cfg.r_p < 1) throw ConfigError("config key 'r_p' must be at least 1");
    check_positive(cfg.delta_gamma_tol, "delta_gamma_tol");
    check_positive(cfg.delta_p_tol, "delta_p_tol");
    if (cfg.max_iters < 0) throw ConfigError("config key 'max_iters' must be nonnegative");
    (void)init_scheme_from_name(cfg.init_scheme);
    if (!(cfg.het_dev_fa >= 0.0 && cfg.het_dev_fa < 1.0) ||
        !(cfg.het_dev_md >= 0.0 && cfg.het_dev_md < 1.0))
        throw ConfigError("config keys 'het_dev_fa'/'het_dev_md' must lie in [0, 1)");
    if (!(cfg.p_fa * (1.0 + cfg.het_dev_fa) < 0.5))
        throw ConfigError("'p_fa' deviations must stay below 0.5; shrink 'het_dev_fa'");
    if (!(cfg.p_md * (1.0 + cfg.het_dev_md) < 0.5))
        throw ConfigError("'p_md' deviations must stay below 0.5; shrink 'het_dev_md'");
    if (cfg.realizations < 1) throw ConfigError("config key 'realizations' must be at least 1");
    if (cfg.trials < 1) throw ConfigError("config key 'trials' must be at least 1");
    if (cfg.size_grid.empty()) throw ConfigError("config key 'size_grid' must be nonempty");
    for (int n : cfg.size_grid)
        if (n < 1) throw ConfigError("config key 'size_grid' entries must be at least 1");
    if (cfg.p_com_values.empty()) throw ConfigError("config key 'p_com_values' must be nonempty");
    if (cfg.p_com_grid.empty()) throw ConfigError("config key 'p_com_grid' must be nonempty");
    for (double p : cfg.p_com_values)
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("config key 'p_com_values' entries must lie in [0, 1]");
    for (double p : cfg.p_com_grid)
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("config key 'p_com_grid' entries must lie in [0, 1]");
    if (cfg.cluster_grid.empty()) throw ConfigError("config key 'cluster_grid' must be nonempty");
    for (int n : cfg.cluster_grid)
        if (n < 1) throw ConfigError("config key 'cluster_grid' entries must be at least 1");
}

InitScheme init_scheme_from_name(const std::string& name) {
    if (name == "optimal_homogeneous") return InitScheme::optimal_homogeneous;
    if (name == "midpoint") return InitScheme::midpoint;
    if (name == "all_h1") return InitScheme::all_h1;
    if (name == "all_h0") return InitScheme::all_h0;
    throw ConfigError("unknown init_scheme '" + name +
                      "'; expected optimal_homogeneous, midpoint, all_h1 or all_h0");
}

} // namespace cloudcluster

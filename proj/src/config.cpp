#include "florist/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace florist {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

json parse_toml_scalar(const std::string& tok, int line_no) {
    if (tok.empty()) throw config_error("line " + std::to_string(line_no) + ": empty value");
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"')
            throw config_error("line " + std::to_string(line_no) + ": unterminated string");
        return tok.substr(1, tok.size() - 2);
    }
    if (tok == "true") return true;
    if (tok == "false") return false;
    try {
        if (tok.find_first_of(".eE") == std::string::npos) {
            std::size_t pos = 0;
            long long v = std::stoll(tok, &pos);
            if (pos == tok.size()) return v;
        }
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos == tok.size()) return v;
    } catch (const std::exception&) {
    }
    throw config_error("line " + std::to_string(line_no) + ": cannot parse value '" + tok + "'");
}

json parse_toml_value(const std::string& raw, int line_no) {
    std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']')
            throw config_error("line " + std::to_string(line_no) + ": unterminated array");
        json arr = json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        std::istringstream ss(inner);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) arr.push_back(parse_toml_scalar(item, line_no));
        }
        return arr;
    }
    return parse_toml_scalar(v, line_no);
}

json parse_toml_subset(std::istream& in) {
    json root = json::object();
    json* current = &root;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            // keep '#' inside strings
            const std::size_t quote = line.find('"');
            if (quote == std::string::npos || hash < quote) line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("line " + std::to_string(line_no) + ": bad table header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            current = &root[name];
            if (current->is_null()) *current = json::object();
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        (*current)[key] = parse_toml_value(line.substr(eq + 1), line_no);
    }
    return root;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("field '" + key + "': wrong type");
    }
}

CliConfig from_json(const json& j) {
    CliConfig cfg;
    ExperimentConfig& e = cfg.experiment;

    e.seed = get_or<std::uint64_t>(j, "seed", 42);
    const std::string method = get_or<std::string>(j, "method", "florist");
    const auto parsed = parse_method(method);
    if (!parsed) throw config_error("field 'method': unknown method '" + method + "'");
    e.method = *parsed;
    e.policy.tau = get_or<double>(j, "tau", 0.99);
    if (!(e.policy.tau > 0.0) || e.policy.tau > 1.0)
        throw config_error("field 'tau': must be in (0, 1], got " + std::to_string(e.policy.tau));
    e.rounds = get_or<std::size_t>(j, "rounds", 1);
    e.local_epochs = get_or<std::size_t>(j, "local_epochs", 50);
    e.learning_rate = get_or<double>(j, "learning_rate", 0.05);
    e.noise_sigma = get_or<double>(j, "noise_sigma", 0.01);
    e.planted_rank = get_or<std::size_t>(j, "planted_rank", 3);
    e.holdout_samples = get_or<std::size_t>(j, "holdout_samples", 128);

    const json model = j.contains("model") ? j.at("model") : json::object();
    const std::size_t layers = get_or<std::size_t>(model, "layers", 4);
    const std::size_t m = get_or<std::size_t>(model, "m", 64);
    const std::size_t n = get_or<std::size_t>(model, "n", 64);
    std::vector<std::string> projections =
        get_or<std::vector<std::string>>(model, "projections", {"q_proj", "v_proj"});
    const std::size_t bpp = get_or<std::size_t>(model, "bytes_per_param", 2);
    if (layers < 1) throw config_error("field 'model.layers': must be >= 1");
    if (m < 1 || n < 1) throw config_error("field 'model.m'/'model.n': must be >= 1");
    e.model = ModelConfig::uniform(layers, std::move(projections), m, n, bpp);

    const json clients = j.contains("clients") ? j.at("clients") : json::object();
    std::vector<std::size_t> ranks =
        get_or<std::vector<std::size_t>>(clients, "ranks", {4, 4, 8, 8, 16, 16, 32, 64});
    std::vector<std::size_t> sizes = get_or<std::vector<std::size_t>>(
        clients, "dataset_sizes", std::vector<std::size_t>(ranks.size(), 128));
    if (ranks.empty()) throw config_error("field 'clients.ranks': must be non-empty");
    if (sizes.size() != ranks.size())
        throw config_error("field 'clients.dataset_sizes': length must match clients.ranks");
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        if (ranks[k] < 1) throw config_error("field 'clients.ranks': ranks must be >= 1");
        if (sizes[k] < 1)
            throw config_error("field 'clients.dataset_sizes': sizes must be >= 1");
        e.clients.push_back({k, ranks[k], sizes[k]});
    }

    const json sweep = j.contains("sweep") ? j.at("sweep") : json::object();
    if (sweep.contains("taus")) {
        cfg.taus = get_or<std::vector<double>>(sweep, "taus", {});
    } else {
        const double start = get_or<double>(sweep, "tau_start", 0.80);
        const double stop = get_or<double>(sweep, "tau_stop", 1.00);
        const double step = get_or<double>(sweep, "tau_step", 0.01);
        if (!(step > 0.0)) throw config_error("field 'sweep.tau_step': must be positive");
        for (double t = start; t < stop + step / 2; t += step)
            cfg.taus.push_back(std::min(t, stop));
        if (cfg.taus.empty() || std::abs(cfg.taus.back() - stop) > 1e-12)
            cfg.taus.push_back(stop);
    }
    for (double t : cfg.taus)
        if (!(t > 0.0) || t > 1.0)
            throw config_error("field 'sweep.taus': values must be in (0, 1]");

    const json cost = j.contains("cost") ? j.at("cost") : json::object();
    cfg.client_grid =
        get_or<std::vector<std::size_t>>(cost, "client_grid", {2, 4, 8, 16, 32, 64});
    return cfg;
}

}  // namespace

CliConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    const std::size_t first = text.find_first_not_of(" \t\r\n");
    json j;
    if (first != std::string::npos && text[first] == '{') {
        try {
            j = json::parse(text);
        } catch (const json::exception& ex) {
            throw config_error(std::string("JSON parse error: ") + ex.what());
        }
    } else {
        std::istringstream ss(text);
        j = parse_toml_subset(ss);
    }
    return from_json(j);
}

std::string effective_config_json(const CliConfig& cfg) {
    const ExperimentConfig& e = cfg.experiment;
    json model = {{"layers", e.model.layers},
                  {"projections", e.model.projections},
                  {"m", e.model.dims.empty() ? 0 : e.model.dims[0].m},
                  {"n", e.model.dims.empty() ? 0 : e.model.dims[0].n},
                  {"bytes_per_param", e.model.bytes_per_param}};
    json ranks = json::array(), sizes = json::array();
    for (const auto& c : e.clients) {
        ranks.push_back(c.rank);
        sizes.push_back(c.dataset_size);
    }
    json j = {{"seed", e.seed},
              {"method", method_name(e.method)},
              {"tau", e.policy.tau},
              {"rounds", e.rounds},
              {"local_epochs", e.local_epochs},
              {"learning_rate", e.learning_rate},
              {"noise_sigma", e.noise_sigma},
              {"planted_rank", e.planted_rank},
              {"holdout_samples", e.holdout_samples},
              {"model", model},
              {"clients", {{"ranks", ranks}, {"dataset_sizes", sizes}}},
              {"sweep", {{"taus", cfg.taus}}},
              {"cost", {{"client_grid", cfg.client_grid}}}};
    return j.dump(2) + "\n";
}

}  // namespace florist
